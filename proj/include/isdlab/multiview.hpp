#pragma once

#include <vector>

#include "isdlab/oracle.hpp"
#include "isdlab/render.hpp"

namespace isdlab {

/// Canonical appearance prior pushed through each camera of a ring. The joint
/// prediction over stacked views factors into independent per-view predictions.
class MultiViewPrior {
 public:
  MultiViewPrior(MixturePrior canonical, std::vector<Camera> cameras);

  const MixturePrior& canonical() const { return canonical_; }
  const std::vector<Camera>& cameras() const { return cameras_; }
  const std::vector<MixturePrior>& per_view_priors() const { return per_view_; }
  int views() const { return static_cast<int>(cameras_.size()); }
  Eigen::Index view_dim() const { return canonical_.dim(); }

 private:
  MixturePrior canonical_;
  std::vector<Camera> cameras_;
  std::vector<MixturePrior> per_view_;
};

/// Pushforward of an isotropic mixture through an orthogonal transform.
MixturePrior pushforward(const MixturePrior& prior, const Mat& transform);

/// Per-view epsilon predictions over a stacked (V * d_view) input, in camera order.
Vec multiview_eps(const MultiViewPrior& mv, const Vec& stacked, int t, const NoiseSchedule& sched);

}  // namespace isdlab
