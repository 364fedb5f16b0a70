#include "isdlab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace isdlab {

namespace {

// Rounding slack so that e.g. 0.02 * 1000 lands on 20, not 20.000000000000004.
constexpr double kBoundSlack = 1e-9;
constexpr double kMaxBeta = 0.999;

std::vector<double> weights_for(WeightKind kind, const std::vector<double>& sigma) {
  std::vector<double> w(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i)
    w[i] = kind == WeightKind::SigmaSquared ? sigma[i] * sigma[i] : 1.0;
  return w;
}

std::vector<double> betas_for(ScheduleKind kind, int steps) {
  std::vector<double> betas(static_cast<std::size_t>(steps));
  const double n = steps;
  switch (kind) {
    case ScheduleKind::LinearBeta: {
      // DDPM endpoints rescaled so that other step counts keep the same total noise.
      const double scale = 1000.0 / n;
      const double start = scale * 1e-4;
      const double end = std::min(scale * 0.02, kMaxBeta);
      for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (n - 1.0);
        betas[i] = std::min(start + frac * (end - start), kMaxBeta);
      }
      break;
    }
    case ScheduleKind::Cosine: {
      constexpr double offset = 0.008;
      auto f = [&](double t) {
        const double c = std::cos((t / n + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
        return c * c;
      };
      for (int i = 0; i < steps; ++i)
        betas[i] = std::min(1.0 - f(i + 1.0) / f(i), kMaxBeta);
      break;
    }
  }
  return betas;
}

}  // namespace

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "linear-beta") return ScheduleKind::LinearBeta;
  throw std::invalid_argument("unknown schedule kind '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Cosine ? "cosine" : "linear-beta";
}

WeightKind parse_weight_kind(std::string_view name) {
  if (name == "sigma2") return WeightKind::SigmaSquared;
  if (name == "unit") return WeightKind::Unit;
  throw std::invalid_argument("unknown weight kind '" + std::string(name) + "'");
}

std::string_view to_string(WeightKind kind) {
  return kind == WeightKind::SigmaSquared ? "sigma2" : "unit";
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha, std::vector<double> sigma,
                             std::vector<double> weight)
    : alpha_(std::move(alpha)), sigma_(std::move(sigma)), weight_(std::move(weight)) {
  if (alpha_.size() < 2 || sigma_.size() != alpha_.size() || weight_.size() != alpha_.size())
    throw std::invalid_argument("noise schedule needs at least 2 steps of matching length");
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    if (!(alpha_[i] > 0.0 && alpha_[i] <= 1.0) || !(sigma_[i] >= 0.0 && sigma_[i] < 1.0))
      throw std::invalid_argument("schedule coefficients out of range at t=" + std::to_string(i + 1));
    if (std::abs(alpha_[i] * alpha_[i] + sigma_[i] * sigma_[i] - 1.0) > 1e-12)
      throw std::invalid_argument("schedule is not variance preserving at t=" + std::to_string(i + 1));
    if (!(weight_[i] >= 0.0)) throw std::invalid_argument("negative loss weight");
    if (i > 0 && (alpha_[i] > alpha_[i - 1] || sigma_[i] < sigma_[i - 1]))
      throw std::invalid_argument("schedule is not monotone at t=" + std::to_string(i + 1));
  }
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps())
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps()) + "]");
  return static_cast<std::size_t>(t - 1);
}

NoiseSchedule NoiseSchedule::with_weight(WeightKind kind) const {
  return NoiseSchedule(alpha_, sigma_, weights_for(kind, sigma_));
}

NoiseSchedule NoiseSchedule::with_weights(std::vector<double> weight) const {
  return NoiseSchedule(alpha_, sigma_, std::move(weight));
}

NoiseSchedule build_schedule(ScheduleKind kind, int steps, WeightKind weight) {
  if (steps < 2) throw std::invalid_argument("schedule needs T >= 2");
  const auto betas = betas_for(kind, steps);
  std::vector<double> alpha(betas.size()), sigma(betas.size());
  double alpha_bar = 1.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    alpha_bar *= 1.0 - betas[i];
    alpha[i] = std::sqrt(alpha_bar);
    sigma[i] = std::sqrt(1.0 - alpha_bar);
  }
  auto w = weights_for(weight, sigma);
  return NoiseSchedule(std::move(alpha), std::move(sigma), std::move(w));
}

void TimestepRange::validate() const {
  if (!(lo > 0.0 && lo < hi && hi < 1.0))
    throw std::invalid_argument("timestep range must satisfy 0 < lo < hi < 1");
}

std::pair<int, int> TimestepRange::bounds(int steps) const {
  validate();
  const int first = std::max(1, static_cast<int>(std::ceil(lo * steps - kBoundSlack)));
  const int last = std::min(steps, static_cast<int>(std::floor(hi * steps + kBoundSlack)));
  if (first > last) throw std::invalid_argument("timestep range contains no integer step");
  return {first, last};
}

int sample_timestep(Rng& rng, const TimestepRange& range, int steps) {
  const auto [first, last] = range.bounds(steps);
  return std::uniform_int_distribution<int>(first, last)(rng);
}

Vec add_noise(const Vec& x, int t, const Vec& eps, const NoiseSchedule& sched) {
  if (x.size() != eps.size()) throw std::invalid_argument("add_noise: dimension mismatch");
  return sched.alpha(t) * x + sched.sigma(t) * eps;
}

}  // namespace isdlab
