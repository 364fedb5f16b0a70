#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isdlab/distill.hpp"

namespace isdlab {

struct AdamParams {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Alternating refit of the IP_VSD control variate from recent renders.
struct SurrogateSettings {
  std::size_t buckets = 10;
  double ridge = 1e-4;
  int refit_every = 50;
  std::size_t window = 2000;  // replay capacity, in samples
  std::size_t batch = 20;     // fresh render samples per iteration
};

struct RunConfig {
  Problem problem;
  EstimatorSpec estimator;
  int iterations = 2000;
  AdamParams adam;
  std::uint64_t seed = 0;
  int stride = 10;
  Vec init;                 // initial theta
  double init_noise = 0.0;  // std of a seeded perturbation added to init
  SurrogateSettings surrogate;

  void validate() const;
};

struct ModeAssignment {
  int component = 0;
  double responsibility = 0.0;
};

struct TraceRecord {
  int iter = 0;
  Vec theta;
  double grad_norm = 0.0;  // norm of the last applied gradient, 0 at iter 0
  double alpha = 1.0;
  double beta = 0.0;
  ModeAssignment mode;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  Vec final_theta;
  double wall_seconds = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

/// Posterior component at time 0 for the render through camera 0. Ties go to
/// the lowest component index.
ModeAssignment classify_mode(const Vec& theta, const MixturePrior& prior, const RenderMap& map);

RunTrace optimize(const RunConfig& config);

struct OscillationMetrics {
  int switches = 0;
  int stable_window = 0;  // records in the longest constant-assignment suffix
};

OscillationMetrics oscillation_metrics(const RunTrace& trace);

/// Smallest pairwise distance between component means (1 for a single component).
double mode_separation(const MixturePrior& prior);

/// Per camera: distance from render(theta, c) to the nearest per-view
/// pushforward mode, divided by the canonical mode separation.
std::vector<double> view_errors(const Vec& theta, const MixturePrior& canonical, const RenderMap& map);

/// Mean over cameras of the distance from render(theta, c) to the nearest
/// per-view pushforward mode, divided by the mode separation.
double consistency_error(const Vec& theta, const MixturePrior& canonical, const RenderMap& map);

/// Distance from theta's canonical render to the target mode: the reference's
/// source component when known, else the nearest component.
double mode_distance(const Vec& theta, const Problem& problem);

}  // namespace isdlab
