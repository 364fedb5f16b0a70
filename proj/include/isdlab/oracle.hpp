#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isdlab/schedule.hpp"
#include "isdlab/types.hpp"

namespace isdlab {

/// One isotropic Gaussian component: weight * N(mean, variance * I).
struct Component {
  double weight = 1.0;
  Vec mean;
  double variance = 1.0;
};

/// Named Gaussian mixture standing in for a prompt-conditioned image prior.
class MixturePrior {
 public:
  MixturePrior(std::string name, std::vector<Component> components);

  const std::string& name() const { return name_; }
  const std::vector<Component>& components() const { return components_; }
  Eigen::Index dim() const { return components_.front().mean.size(); }
  std::size_t size() const { return components_.size(); }

  double log_density(const Vec& x) const;
  /// Posterior component probabilities at x, computed in log space.
  Vec responsibilities(const Vec& x) const;
  /// Gradient of log_density at x.
  Vec score(const Vec& x) const;

  /// Single Gaussian with the mixture's mean and mean per-coordinate variance.
  MixturePrior moment_matched(std::string name) const;
  /// The null-prompt prior: the moment-matched Gaussian widened by `breadth`
  /// in variance. A null prompt pools many prompts, so it is broader than
  /// any one prompt's prior.
  MixturePrior null_prompt(std::string name, double breadth = 4.0) const;
  MixturePrior with_weights(const std::vector<double>& weights) const;
  double mean_variance() const;

 private:
  std::string name_;
  std::vector<Component> components_;
};

/// Time-t marginal of the prior under the forward process.
MixturePrior marginal_at(const MixturePrior& prior, int t, const NoiseSchedule& sched);

Vec score(const MixturePrior& prior, const Vec& x_t, int t, const NoiseSchedule& sched);

/// Exact epsilon prediction of the mixture: -sigma_t * score.
Vec eps_predict(const MixturePrior& prior, const Vec& x_t, int t, const NoiseSchedule& sched);

struct ReferencePoint {
  Vec x_ref;
  std::optional<int> source_component;
};

ReferencePoint sample_reference(const MixturePrior& prior, Rng& rng);

/// How a reference point conditions the prior. Both modes use the component
/// posterior w_i N(x_ref; mu_i, (s_i^2 + tau^2) I) as the new weights.
///  reweight:  component means and variances are kept.
///  posterior: x_ref is treated as a noisy copy x + N(0, tau^2 I) of the image,
///             so each component also takes its conjugate update
///             mean (tau^2 mu_i + s_i^2 x_ref) / (s_i^2 + tau^2),
///             variance s_i^2 tau^2 / (s_i^2 + tau^2).
enum class ConditioningMode { Reweight, Posterior };

ConditioningMode parse_conditioning_mode(std::string_view name);
std::string_view to_string(ConditioningMode mode);

/// Prior conditioned on a reference point, blended into the base prediction by
/// the image-prompt scale.
class ConditionalOracle {
 public:
  ConditionalOracle(MixturePrior base, ReferencePoint reference, double ip_scale,
                    double temperature, ConditioningMode mode = ConditioningMode::Posterior);

  const MixturePrior& base() const { return base_; }
  const MixturePrior& conditioned() const { return conditioned_; }
  const ReferencePoint& reference() const { return reference_; }
  double ip_scale() const { return ip_scale_; }
  double temperature() const { return temperature_; }
  ConditioningMode mode() const { return mode_; }
  std::vector<double> conditioned_weights() const;

 private:
  MixturePrior base_;
  ReferencePoint reference_;
  double ip_scale_;
  double temperature_;
  ConditioningMode mode_;
  MixturePrior conditioned_;
};

/// Default posterior temperature: a tenth of the mean component variance.
double default_temperature(const MixturePrior& prior);

ConditionalOracle condition(const MixturePrior& prior, const ReferencePoint& ref,
                            double ip_scale, double temperature,
                            ConditioningMode mode = ConditioningMode::Posterior);

Vec ip_eps_predict(const ConditionalOracle& oracle, const Vec& x_t, int t,
                   const NoiseSchedule& sched);

/// Any epsilon predictor evaluated at (x_t, t).
using EpsFn = std::function<Vec(const Vec&, int)>;

/// uncond + scale * (cond - uncond); scale 1 and 0 return the exact operand.
Vec guide(const Vec& cond, const Vec& uncond, double scale);

struct CfgOracle {
  EpsFn cond;
  EpsFn uncond;
  double guidance_scale = 1.0;
};

Vec cfg_eps(const CfgOracle& oracle, const Vec& x_t, int t);

}  // namespace isdlab
