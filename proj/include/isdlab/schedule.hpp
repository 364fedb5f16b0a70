#pragma once

#include <string_view>
#include <vector>

#include "isdlab/types.hpp"

namespace isdlab {

enum class ScheduleKind { LinearBeta, Cosine };
enum class WeightKind { SigmaSquared, Unit };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind);
WeightKind parse_weight_kind(std::string_view name);
std::string_view to_string(WeightKind kind);

/// Discrete variance-preserving forward process, indexed by t = 1..T.
///
/// x_t = alpha(t) * x + sigma(t) * eps with alpha(t)^2 + sigma(t)^2 = 1.
/// weight(t) is the loss weighting applied to every distillation gradient.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> alpha, std::vector<double> sigma,
                std::vector<double> weight);

  int steps() const { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_[index(t)]; }
  double sigma(int t) const { return sigma_[index(t)]; }
  double weight(int t) const { return weight_[index(t)]; }

  /// Same coefficients, different loss weighting.
  NoiseSchedule with_weight(WeightKind kind) const;
  NoiseSchedule with_weights(std::vector<double> weight) const;

 private:
  std::size_t index(int t) const;

  std::vector<double> alpha_;
  std::vector<double> sigma_;
  std::vector<double> weight_;
};

NoiseSchedule build_schedule(ScheduleKind kind, int steps,
                             WeightKind weight = WeightKind::SigmaSquared);

/// Truncation of the timestep range as fractions of T.
struct TimestepRange {
  double lo = 0.02;
  double hi = 0.98;

  void validate() const;
  /// Inclusive integer bounds {ceil(lo*T), ..., floor(hi*T)}.
  std::pair<int, int> bounds(int steps) const;
};

int sample_timestep(Rng& rng, const TimestepRange& range, int steps);

Vec add_noise(const Vec& x, int t, const Vec& eps, const NoiseSchedule& sched);

}  // namespace isdlab
