#pragma once

#include <Eigen/Dense>
#include <random>

namespace isdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Every stochastic operation takes this engine explicitly; nothing draws from
/// hidden global state.
using Rng = std::mt19937_64;

/// Fills a vector with independent standard normal draws.
inline Vec standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

}  // namespace isdlab
