#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isdlab/distill.hpp"

namespace isdlab {

/// Per-coordinate statistics of one estimator over a batch of draws.
struct GradStats {
  std::string label;
  EstimatorSpec estimator;
  std::size_t n = 0;
  Vec mean;
  Vec var;                          // unbiased, per coordinate
  std::vector<double> norm_trace;   // per-draw gradient norms
  std::vector<int> t_trace;         // per-draw timesteps
  std::vector<Vec> bucket_var;      // per timestep bucket; empty vector when < 2 draws
  std::vector<std::size_t> bucket_count;

  double var_mean() const { return var.mean(); }
  double var_trace() const { return var.sum(); }
  double mean_norm() const { return mean.norm(); }
};

using Estimator = std::function<GradSample(const Vec& theta, const Draw& draw)>;

struct StatsOptions {
  std::size_t buckets = 10;
  unsigned threads = 1;
};

std::vector<Draw> draw_stream(Rng& rng, const Problem& problem, DrawShape shape, std::size_t n);

/// Evaluates the estimator on every draw (replaying a shared stream) and
/// reduces in draw order. Requires at least two draws.
GradStats grad_stats(const Estimator& estimator, const Vec& theta, std::span<const Draw> draws,
                     const Problem& problem, const StatsOptions& options = {},
                     std::vector<Vec>* samples = nullptr);

/// Fresh-stream overload: draws n terms from rng first, then evaluates.
GradStats grad_stats(const Estimator& estimator, const Vec& theta, std::size_t n, Rng& rng,
                     const Problem& problem, DrawShape shape, const StatsOptions& options = {});

enum class Verdict { FirstLower, SecondLower, Tie };
std::string_view to_string(Verdict v);

/// Two-sided sign test on paired per-draw squared deviations from each
/// estimator's mean. Zero differences are dropped.
struct PairedComparison {
  std::string first;
  std::string second;
  std::size_t first_lower = 0;   // draws where the first estimator deviated less
  std::size_t second_lower = 0;
  double p_value = 1.0;
  Verdict verdict = Verdict::Tie;
};

PairedComparison sign_test(const std::string& first, const std::vector<Vec>& first_samples,
                           const Vec& first_mean, const std::string& second,
                           const std::vector<Vec>& second_samples, const Vec& second_mean,
                           double alpha = 0.01);

struct ComparisonReport {
  std::vector<GradStats> stats;
  std::vector<PairedComparison> verdicts;  // every pair (i < j), in list order
};

struct NamedEstimator {
  std::string label;
  EstimatorSpec spec;
};

/// Shared-stream comparison of several estimators at one theta. IP_VSD entries
/// use `surrogate`.
ComparisonReport compare_estimators(const std::vector<NamedEstimator>& estimators, const Problem& problem,
                                    const Vec& theta, std::size_t n, Rng& rng,
                                    const Surrogate* surrogate = nullptr,
                                    const StatsOptions& options = {});

/// (x_t, t, eps) triples from renders of theta; the surrogate's training data.
std::vector<NoisySample> render_samples(const Problem& problem, const Vec& theta, std::size_t n, Rng& rng);

}  // namespace isdlab
