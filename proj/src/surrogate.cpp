#include "isdlab/surrogate.hpp"

#include <stdexcept>
#include <string>

namespace isdlab {

std::size_t bucket_index(int t, int first, int last, std::size_t buckets) {
  if (t < first || t > last)
    throw std::out_of_range("timestep " + std::to_string(t) + " outside surrogate coverage [" +
                            std::to_string(first) + ", " + std::to_string(last) + "]");
  const auto span = static_cast<std::size_t>(last - first + 1);
  return static_cast<std::size_t>(t - first) * buckets / span;
}

std::size_t Surrogate::bucket_of(int t) const {
  return bucket_index(t, first_step, last_step, buckets.size());
}

Surrogate zero_surrogate(std::size_t buckets, int first_step, int last_step, Eigen::Index dim) {
  if (buckets < 1) throw std::invalid_argument("surrogate needs at least one bucket");
  if (first_step > last_step) throw std::invalid_argument("surrogate step range is empty");
  Surrogate s;
  s.first_step = first_step;
  s.last_step = last_step;
  s.buckets.assign(buckets, Surrogate::Bucket{Mat::Zero(dim, dim), Vec::Zero(dim), false, 0});
  return s;
}

Surrogate fit_surrogate(const std::vector<NoisySample>& dataset, std::size_t buckets, double ridge,
                        int first_step, int last_step, Eigen::Index dim) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge penalty must be nonnegative");
  Surrogate s = zero_surrogate(buckets, first_step, last_step, dim);
  s.ridge = ridge;

  std::vector<std::vector<const NoisySample*>> members(buckets);
  for (const auto& sample : dataset) {
    if (sample.x_t.size() != dim || sample.eps.size() != dim)
      throw std::invalid_argument("surrogate sample dimension mismatch");
    members[s.bucket_of(sample.t)].push_back(&sample);
  }

  for (std::size_t b = 0; b < buckets; ++b) {
    const auto& rows = members[b];
    if (rows.empty()) continue;
    if (rows.size() < static_cast<std::size_t>(dim) + 1)
      throw std::invalid_argument("surrogate bucket " + std::to_string(b) + " has " +
                                  std::to_string(rows.size()) + " samples, needs at least d+1");
    const double n = static_cast<double>(rows.size());
    Vec x_mean = Vec::Zero(dim), e_mean = Vec::Zero(dim);
    for (const auto* r : rows) {
      x_mean += r->x_t;
      e_mean += r->eps;
    }
    x_mean /= n;
    e_mean /= n;
    // Centering absorbs the unpenalized intercept.
    Mat xx = Mat::Zero(dim, dim), ex = Mat::Zero(dim, dim);
    for (const auto* r : rows) {
      const Vec xc = r->x_t - x_mean;
      xx.noalias() += xc * xc.transpose();
      ex.noalias() += (r->eps - e_mean) * xc.transpose();
    }
    xx /= n;
    ex /= n;
    xx.diagonal().array() += ridge;
    Eigen::FullPivLU<Mat> lu(xx);
    if (!lu.isInvertible())
      throw std::invalid_argument("surrogate bucket " + std::to_string(b) +
                                  " is singular; use a positive ridge penalty");
    auto& bucket = s.buckets[b];
    // W = ex * xx^{-1}; xx is symmetric so solve the transposed system.
    bucket.weight = lu.solve(ex.transpose()).transpose();
    bucket.bias = e_mean - bucket.weight * x_mean;
    bucket.fitted = true;
    bucket.samples = rows.size();
  }
  return s;
}

Vec surrogate_eps(const Surrogate& s, const Vec& x_t, int t) {
  const auto& bucket = s.buckets[s.bucket_of(t)];
  if (x_t.size() != bucket.bias.size()) throw std::invalid_argument("surrogate_eps: dimension mismatch");
  return bucket.weight * x_t + bucket.bias;
}

}  // namespace isdlab
