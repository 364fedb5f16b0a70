#include "isdlab/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace isdlab {

namespace {

double log_normal_isotropic(const Vec& x, const Vec& mean, double variance) {
  const double d = static_cast<double>(x.size());
  return -0.5 * (x - mean).squaredNorm() / variance -
         0.5 * d * std::log(2.0 * std::numbers::pi * variance);
}

// Normalizes log-weights in place into probabilities.
Vec softmax(Vec logits) {
  const double peak = logits.maxCoeff();
  logits = (logits.array() - peak).exp();
  return logits / logits.sum();
}

}  // namespace

MixturePrior::MixturePrior(std::string name, std::vector<Component> components)
    : name_(std::move(name)), components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  const auto d = components_.front().mean.size();
  if (d < 1) throw std::invalid_argument("mixture dimension must be positive");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != d) throw std::invalid_argument("mixture means differ in dimension");
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    if (!(c.variance > 0.0)) throw std::invalid_argument("mixture variances must be positive");
    if (!c.mean.allFinite()) throw std::invalid_argument("mixture means must be finite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("mixture weights must sum to 1");
  for (auto& c : components_) c.weight /= total;
}

double MixturePrior::log_density(const Vec& x) const {
  if (x.size() != dim()) throw std::invalid_argument("log_density: dimension mismatch");
  Vec terms(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    terms[static_cast<Eigen::Index>(i)] = std::log(c.weight) + log_normal_isotropic(x, c.mean, c.variance);
  }
  const double peak = terms.maxCoeff();
  return peak + std::log((terms.array() - peak).exp().sum());
}

Vec MixturePrior::responsibilities(const Vec& x) const {
  if (x.size() != dim()) throw std::invalid_argument("responsibilities: dimension mismatch");
  Vec logits(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    logits[static_cast<Eigen::Index>(i)] = std::log(c.weight) + log_normal_isotropic(x, c.mean, c.variance);
  }
  return softmax(std::move(logits));
}

Vec MixturePrior::score(const Vec& x) const {
  const Vec r = responsibilities(x);
  Vec out = Vec::Zero(dim());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    out -= r[static_cast<Eigen::Index>(i)] * (x - c.mean) / c.variance;
  }
  return out;
}

MixturePrior MixturePrior::moment_matched(std::string name) const {
  Vec mean = Vec::Zero(dim());
  for (const auto& c : components_) mean += c.weight * c.mean;
  double second = 0.0;
  for (const auto& c : components_)
    second += c.weight * (c.variance + (c.mean - mean).squaredNorm() / static_cast<double>(dim()));
  return MixturePrior(std::move(name), {Component{1.0, mean, second}});
}

MixturePrior MixturePrior::null_prompt(std::string name, double breadth) const {
  if (!(breadth >= 1.0)) throw std::invalid_argument("null-prompt breadth must be at least 1");
  auto c = moment_matched(name).components().front();
  c.variance *= breadth;
  return MixturePrior(std::move(name), {c});
}

MixturePrior MixturePrior::with_weights(const std::vector<double>& weights) const {
  if (weights.size() != components_.size()) throw std::invalid_argument("weight count mismatch");
  auto comps = components_;
  for (std::size_t i = 0; i < comps.size(); ++i) comps[i].weight = weights[i];
  return MixturePrior(name_, std::move(comps));
}

double MixturePrior::mean_variance() const {
  double v = 0.0;
  for (const auto& c : components_) v += c.variance;
  return v / static_cast<double>(components_.size());
}

MixturePrior marginal_at(const MixturePrior& prior, int t, const NoiseSchedule& sched) {
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  std::vector<Component> comps;
  comps.reserve(prior.size());
  for (const auto& c : prior.components())
    comps.push_back({c.weight, a * c.mean, a * a * c.variance + s * s});
  return MixturePrior(prior.name(), std::move(comps));
}

Vec score(const MixturePrior& prior, const Vec& x_t, int t, const NoiseSchedule& sched) {
  return marginal_at(prior, t, sched).score(x_t);
}

Vec eps_predict(const MixturePrior& prior, const Vec& x_t, int t, const NoiseSchedule& sched) {
  return -sched.sigma(t) * score(prior, x_t, t, sched);
}

ReferencePoint sample_reference(const MixturePrior& prior, Rng& rng) {
  std::vector<double> weights;
  for (const auto& c : prior.components()) weights.push_back(c.weight);
  const int k = std::discrete_distribution<int>(weights.begin(), weights.end())(rng);
  const auto& c = prior.components()[static_cast<std::size_t>(k)];
  Vec x = c.mean + std::sqrt(c.variance) * standard_normal(rng, prior.dim());
  return {std::move(x), k};
}

double default_temperature(const MixturePrior& prior) { return 0.1 * prior.mean_variance(); }

namespace {

std::vector<double> posterior_weights(const MixturePrior& prior, const Vec& x_ref,
                                      double temperature) {
  const auto& comps = prior.components();
  Vec logits(static_cast<Eigen::Index>(comps.size()));
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& c = comps[i];
    logits[static_cast<Eigen::Index>(i)] =
        std::log(c.weight) + log_normal_isotropic(x_ref, c.mean, c.variance + temperature);
  }
  Vec p = softmax(std::move(logits));
  // Keep every component alive; a far reference must not zero out support.
  p = p.cwiseMax(std::numeric_limits<double>::min());
  p /= p.sum();
  return {p.data(), p.data() + p.size()};
}

}  // namespace

ConditioningMode parse_conditioning_mode(std::string_view name) {
  if (name == "posterior") return ConditioningMode::Posterior;
  if (name == "reweight") return ConditioningMode::Reweight;
  throw std::invalid_argument("unknown conditioning mode '" + std::string(name) + "'");
}

std::string_view to_string(ConditioningMode mode) {
  return mode == ConditioningMode::Posterior ? "posterior" : "reweight";
}

ConditionalOracle::ConditionalOracle(MixturePrior base, ReferencePoint reference,
                                     double ip_scale, double temperature, ConditioningMode mode)
    : base_(std::move(base)),
      reference_(std::move(reference)),
      ip_scale_(ip_scale),
      temperature_(temperature),
      mode_(mode),
      conditioned_(base_) {
  if (!(ip_scale_ >= 0.0 && ip_scale_ <= 1.0))
    throw std::invalid_argument("ip_scale must lie in [0, 1]");
  if (!(temperature_ > 0.0)) throw std::invalid_argument("posterior temperature must be positive");
  if (reference_.x_ref.size() != base_.dim())
    throw std::invalid_argument("reference dimension does not match the prior");
  const auto weights = posterior_weights(base_, reference_.x_ref, temperature_);
  if (mode_ == ConditioningMode::Reweight) {
    conditioned_ = base_.with_weights(weights);
    return;
  }
  std::vector<Component> comps;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& c = base_.components()[i];
    const double denom = c.variance + temperature_;
    comps.push_back({weights[i], (temperature_ * c.mean + c.variance * reference_.x_ref) / denom,
                     c.variance * temperature_ / denom});
  }
  conditioned_ = MixturePrior(base_.name(), std::move(comps));
}

std::vector<double> ConditionalOracle::conditioned_weights() const {
  std::vector<double> w;
  for (const auto& c : conditioned_.components()) w.push_back(c.weight);
  return w;
}

ConditionalOracle condition(const MixturePrior& prior, const ReferencePoint& ref,
                            double ip_scale, double temperature, ConditioningMode mode) {
  return ConditionalOracle(prior, ref, ip_scale, temperature, mode);
}

Vec ip_eps_predict(const ConditionalOracle& oracle, const Vec& x_t, int t,
                   const NoiseSchedule& sched) {
  const double lambda = oracle.ip_scale();
  if (lambda == 0.0) return eps_predict(oracle.base(), x_t, t, sched);
  if (lambda == 1.0) return eps_predict(oracle.conditioned(), x_t, t, sched);
  return (1.0 - lambda) * eps_predict(oracle.base(), x_t, t, sched) +
         lambda * eps_predict(oracle.conditioned(), x_t, t, sched);
}

Vec guide(const Vec& cond, const Vec& uncond, double scale) {
  if (cond.size() != uncond.size()) throw std::invalid_argument("guidance: dimension mismatch");
  if (scale == 1.0) return cond;
  if (scale == 0.0) return uncond;
  return uncond + scale * (cond - uncond);
}

Vec cfg_eps(const CfgOracle& oracle, const Vec& x_t, int t) {
  if (oracle.guidance_scale == 1.0) return oracle.cond(x_t, t);
  if (oracle.guidance_scale == 0.0) return oracle.uncond(x_t, t);
  return guide(oracle.cond(x_t, t), oracle.uncond(x_t, t), oracle.guidance_scale);
}

}  // namespace isdlab
