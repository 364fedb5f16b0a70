#include "isdlab/multiview.hpp"

#include <stdexcept>

namespace isdlab {

MixturePrior pushforward(const MixturePrior& prior, const Mat& transform) {
  if (transform.rows() != prior.dim() || transform.cols() != prior.dim())
    throw std::invalid_argument("pushforward needs a square transform of the prior's dimension");
  const Mat gram = transform.transpose() * transform;
  if (!gram.isApprox(Mat::Identity(prior.dim(), prior.dim()), 1e-10))
    throw std::invalid_argument("pushforward of an isotropic mixture needs an orthogonal transform");
  std::vector<Component> comps;
  for (const auto& c : prior.components()) comps.push_back({c.weight, transform * c.mean, c.variance});
  return MixturePrior(prior.name(), std::move(comps));
}

MultiViewPrior::MultiViewPrior(MixturePrior canonical, std::vector<Camera> cameras)
    : canonical_(std::move(canonical)), cameras_(std::move(cameras)) {
  if (cameras_.empty()) throw std::invalid_argument("multi-view prior needs at least one camera");
  for (const auto& c : cameras_) per_view_.push_back(pushforward(canonical_, c.transform));
}

Vec multiview_eps(const MultiViewPrior& mv, const Vec& stacked, int t, const NoiseSchedule& sched) {
  const auto d = mv.view_dim();
  if (stacked.size() != d * mv.views())
    throw std::invalid_argument("multiview_eps: stacked length must be V * d_view");
  Vec out(stacked.size());
  for (int v = 0; v < mv.views(); ++v) {
    const Vec view = stacked.segment(v * d, d);
    out.segment(v * d, d) = eps_predict(mv.per_view_priors()[static_cast<std::size_t>(v)], view, t, sched);
  }
  return out;
}

}  // namespace isdlab
