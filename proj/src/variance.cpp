#include "isdlab/variance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isdlab/parallel.hpp"

namespace isdlab {

std::vector<Draw> draw_stream(Rng& rng, const Problem& problem, DrawShape shape, std::size_t n) {
  std::vector<Draw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(sample_draw(rng, problem, shape));
  return draws;
}

namespace {

Vec unbiased_variance(const std::vector<const Vec*>& xs, Eigen::Index dim) {
  Vec mean = Vec::Zero(dim);
  for (const auto* x : xs) mean += *x;
  mean /= static_cast<double>(xs.size());
  Vec var = Vec::Zero(dim);
  for (const auto* x : xs) var += (*x - mean).cwiseAbs2();
  return var / static_cast<double>(xs.size() - 1);
}

}  // namespace

GradStats grad_stats(const Estimator& estimator, const Vec& theta, std::span<const Draw> draws,
                     const Problem& problem, const StatsOptions& options, std::vector<Vec>* samples) {
  if (draws.size() < 2) throw std::invalid_argument("grad_stats needs at least two draws");
  if (options.buckets < 1) throw std::invalid_argument("grad_stats needs at least one bucket");
  std::vector<GradSample> out(draws.size());
  parallel_for(draws.size(), options.threads,
               [&](std::size_t i) { out[i] = estimator(theta, draws[i]); });

  const auto dim = out.front().grad.size();
  GradStats s;
  s.n = draws.size();
  std::vector<const Vec*> all;
  all.reserve(out.size());
  for (const auto& g : out) {
    if (g.grad.size() != dim) throw std::invalid_argument("estimator returned inconsistent dimensions");
    all.push_back(&g.grad);
    s.norm_trace.push_back(g.grad.norm());
    s.t_trace.push_back(g.t);
  }
  s.mean = Vec::Zero(dim);
  for (const auto* g : all) s.mean += *g;
  s.mean /= static_cast<double>(s.n);
  s.var = unbiased_variance(all, dim);

  const auto [first, last] = problem.range.bounds(problem.schedule.steps());
  std::vector<std::vector<const Vec*>> per_bucket(options.buckets);
  for (const auto& g : out) per_bucket[bucket_index(g.t, first, last, options.buckets)].push_back(&g.grad);
  for (const auto& members : per_bucket) {
    s.bucket_count.push_back(members.size());
    s.bucket_var.push_back(members.size() >= 2 ? unbiased_variance(members, dim) : Vec());
  }
  if (samples) {
    samples->clear();
    for (auto& g : out) samples->push_back(std::move(g.grad));
  }
  return s;
}

GradStats grad_stats(const Estimator& estimator, const Vec& theta, std::size_t n, Rng& rng,
                     const Problem& problem, DrawShape shape, const StatsOptions& options) {
  if (n < 2) throw std::invalid_argument("grad_stats needs at least two draws");
  const auto draws = draw_stream(rng, problem, shape, n);
  return grad_stats(estimator, theta, draws, problem, options);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::FirstLower: return "first-lower";
    case Verdict::SecondLower: return "second-lower";
    case Verdict::Tie: return "tie";
  }
  return "?";
}

namespace {

// P[X <= k] for X ~ Binomial(n, 1/2), summed in log space.
double binomial_half_cdf(std::size_t k, std::size_t n) {
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_choose = log_n_fact - std::lgamma(static_cast<double>(i) + 1.0) -
                              std::lgamma(static_cast<double>(n - i) + 1.0);
    total += std::exp(log_choose + log_half_n);
  }
  return std::min(total, 1.0);
}

}  // namespace

PairedComparison sign_test(const std::string& first, const std::vector<Vec>& first_samples,
                           const Vec& first_mean, const std::string& second,
                           const std::vector<Vec>& second_samples, const Vec& second_mean,
                           double alpha) {
  if (first_samples.size() != second_samples.size())
    throw std::invalid_argument("sign test needs paired samples");
  PairedComparison c{first, second};
  for (std::size_t i = 0; i < first_samples.size(); ++i) {
    const double a = (first_samples[i] - first_mean).squaredNorm();
    const double b = (second_samples[i] - second_mean).squaredNorm();
    if (a < b) ++c.first_lower;
    else if (b < a) ++c.second_lower;
  }
  const std::size_t n = c.first_lower + c.second_lower;
  if (n == 0) return c;
  const std::size_t k = std::min(c.first_lower, c.second_lower);
  c.p_value = std::min(1.0, 2.0 * binomial_half_cdf(k, n));
  if (c.p_value < alpha)
    c.verdict = c.first_lower > c.second_lower ? Verdict::FirstLower : Verdict::SecondLower;
  return c;
}

ComparisonReport compare_estimators(const std::vector<NamedEstimator>& estimators, const Problem& problem,
                                    const Vec& theta, std::size_t n, Rng& rng, const Surrogate* surrogate,
                                    const StatsOptions& options) {
  if (estimators.empty()) throw std::invalid_argument("compare_estimators needs at least one estimator");
  if (theta.size() != problem.render.param_dim())
    throw std::invalid_argument("theta dimension does not match the render map");
  DrawShape shape{false, false};
  for (const auto& e : estimators) {
    e.spec.validate();
    shape = shape | draw_shape(e.spec.kind);
  }
  const auto draws = draw_stream(rng, problem, shape, n);

  ComparisonReport report;
  std::vector<std::vector<Vec>> samples(estimators.size());
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const auto& spec = estimators[i].spec;
    Estimator fn = [&](const Vec& th, const Draw& d) {
      return estimate(problem, spec, th, d, Progress{}, surrogate);
    };
    auto stats = grad_stats(fn, theta, draws, problem, options, &samples[i]);
    stats.label = estimators[i].label;
    stats.estimator = spec;
    report.stats.push_back(std::move(stats));
  }
  for (std::size_t i = 0; i < estimators.size(); ++i)
    for (std::size_t j = i + 1; j < estimators.size(); ++j)
      report.verdicts.push_back(sign_test(report.stats[i].label, samples[i], report.stats[i].mean,
                                          report.stats[j].label, samples[j], report.stats[j].mean));
  return report;
}

std::vector<NoisySample> render_samples(const Problem& problem, const Vec& theta, std::size_t n, Rng& rng) {
  std::vector<NoisySample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Draw d = sample_draw(rng, problem, {true, false});
    const auto& cam = problem.render.camera(d.camera);
    out.push_back({add_noise(render(problem.render, theta, cam), d.t, d.eps, problem.schedule), d.t, d.eps});
  }
  return out;
}

}  // namespace isdlab
