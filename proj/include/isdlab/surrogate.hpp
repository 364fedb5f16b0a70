#pragma once

#include <vector>

#include "isdlab/types.hpp"

namespace isdlab {

struct NoisySample {
  Vec x_t;
  int t = 0;
  Vec eps;
};

/// Per-timestep-bucket affine denoiser eps ~ W x_t + b, fitted by ridge
/// regression. Stand-in for a trainable adapter on the renders' own noise.
struct Surrogate {
  struct Bucket {
    Mat weight;
    Vec bias;
    bool fitted = false;  // false: no data reached this bucket, map is zero
    std::size_t samples = 0;
  };

  int first_step = 1;
  int last_step = 1;
  double ridge = 0.0;
  std::vector<Bucket> buckets;

  /// Bucket owning t; throws when t is outside [first_step, last_step].
  std::size_t bucket_of(int t) const;
  Eigen::Index dim() const { return buckets.front().bias.size(); }
};

/// Uniform bucket boundaries over the inclusive step range [first, last].
std::size_t bucket_index(int t, int first, int last, std::size_t buckets);

/// Each bucket minimizes mean ||W x + b - eps||^2 + ridge ||W||_F^2 over its samples.
Surrogate fit_surrogate(const std::vector<NoisySample>& dataset, std::size_t buckets, double ridge,
                        int first_step, int last_step, Eigen::Index dim);

Surrogate zero_surrogate(std::size_t buckets, int first_step, int last_step, Eigen::Index dim);

Vec surrogate_eps(const Surrogate& s, const Vec& x_t, int t);

}  // namespace isdlab
