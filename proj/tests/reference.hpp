// Independent reference computations for the tests. Written from the
// formulas directly, in long double, sharing no code with the library.
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "isdlab/oracle.hpp"

namespace ref {

using ld = long double;

inline ld log_gauss(const isdlab::Vec& x, const isdlab::Vec& mean, ld var) {
  ld q = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) q += std::pow(ld(x[i]) - ld(mean[i]), 2);
  return -0.5L * q / var - 0.5L * ld(x.size()) * std::log(2 * std::numbers::pi_v<ld> * var);
}

// log p_t(x) for the forward-noised mixture with coefficients (a, s).
inline ld log_marginal(const isdlab::MixturePrior& prior, const isdlab::Vec& x, ld a, ld s) {
  std::vector<ld> terms;
  ld top = -INFINITY;
  for (const auto& c : prior.components()) {
    const ld term = std::log(ld(c.weight)) + log_gauss(x, a * c.mean, a * a * c.variance + s * s);
    terms.push_back(term);
    top = std::max(top, term);
  }
  ld sum = 0;
  for (ld t : terms) sum += std::exp(t - top);
  return top + std::log(sum);
}

// Central finite-difference gradient of log_marginal.
inline isdlab::Vec fd_score(const isdlab::MixturePrior& prior, const isdlab::Vec& x, ld a, ld s, ld h) {
  isdlab::Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    isdlab::Vec up = x, down = x;
    up[i] += double(h);
    down[i] -= double(h);
    const ld step = ld(up[i]) - ld(down[i]);
    g[i] = double((log_marginal(prior, up, a, s) - log_marginal(prior, down, a, s)) / step);
  }
  return g;
}

// Cumulative alpha-bar of the cosine schedule, recomputed from the betas.
inline std::vector<ld> cosine_alpha_bar(int steps) {
  const ld s = 0.008L;
  auto f = [&](int t) {
    return std::pow(std::cos((ld(t) / steps + s) / (1 + s) * std::numbers::pi_v<ld> / 2), 2);
  };
  std::vector<ld> out;
  ld prod = 1;
  for (int t = 1; t <= steps; ++t) {
    prod *= 1 - std::min(1 - f(t) / f(t - 1), 0.999L);
    out.push_back(prod);
  }
  return out;
}

inline std::vector<ld> linear_alpha_bar(int steps) {
  const ld scale = 1000.0L / steps;
  const ld lo = 1e-4L * scale, hi = std::min(0.02L * scale, 0.999L);
  std::vector<ld> out;
  ld prod = 1;
  for (int t = 1; t <= steps; ++t) {
    const ld beta = steps == 1 ? lo : lo + (hi - lo) * (t - 1) / (steps - 1);
    prod *= 1 - beta;
    out.push_back(prod);
  }
  return out;
}

}  // namespace ref
