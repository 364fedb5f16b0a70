#include "isdlab/render.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace isdlab {

RenderMap::RenderMap(RenderKind kind, std::vector<Camera> cameras)
    : kind_(kind), cameras_(std::move(cameras)) {
  if (cameras_.empty()) throw std::invalid_argument("render map needs at least one camera");
  const auto rows = cameras_.front().transform.rows();
  const auto cols = cameras_.front().transform.cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("camera transform is empty");
  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    const auto& c = cameras_[i];
    if (c.id != static_cast<int>(i)) throw std::invalid_argument("camera ids must be 0..V-1 in order");
    if (c.transform.rows() != rows || c.transform.cols() != cols)
      throw std::invalid_argument("camera transforms differ in shape");
    if (!c.transform.allFinite()) throw std::invalid_argument("camera transform is not finite");
  }
}

RenderMap RenderMap::identity(Eigen::Index dim) {
  return RenderMap(RenderKind::Identity, {Camera{0, Mat::Identity(dim, dim)}});
}

RenderMap RenderMap::linear_view(std::vector<Camera> cameras) {
  return RenderMap(RenderKind::LinearView, std::move(cameras));
}

const Camera& RenderMap::camera(int id) const {
  if (id < 0 || id >= static_cast<int>(cameras_.size()))
    throw std::out_of_range("unknown camera " + std::to_string(id));
  return cameras_[static_cast<std::size_t>(id)];
}

namespace {

const Camera& owned(const RenderMap& map, const Camera& camera) {
  const auto& own = map.camera(camera.id);
  if (&own != &camera && own.transform != camera.transform)
    throw std::invalid_argument("camera does not belong to this render map");
  return own;
}

}  // namespace

Vec render(const RenderMap& map, const Vec& theta, const Camera& camera) {
  const auto& c = owned(map, camera);
  if (theta.size() != c.transform.cols()) throw std::invalid_argument("render: dimension mismatch");
  if (map.kind() == RenderKind::Identity) return theta;
  return c.transform * theta;
}

Vec vjp(const RenderMap& map, const Camera& camera, const Vec& v) {
  const auto& c = owned(map, camera);
  if (v.size() != c.transform.rows()) throw std::invalid_argument("vjp: dimension mismatch");
  if (map.kind() == RenderKind::Identity) return v;
  return c.transform.transpose() * v;
}

std::vector<Camera> make_camera_ring(int views, Eigen::Index dim, std::uint64_t seed) {
  if (views < 1) throw std::invalid_argument("camera ring needs V >= 1");
  if (dim < 1) throw std::invalid_argument("camera ring needs d >= 1");
  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(views));
  cams.push_back({0, Mat::Identity(dim, dim)});
  if (dim == 2) {
    for (int v = 1; v < views; ++v) {
      const double angle = 2.0 * std::numbers::pi * v / views;
      Mat r(2, 2);
      r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
      cams.push_back({v, r});
    }
    return cams;
  }
  Rng rng(seed);
  for (int v = 1; v < views; ++v) {
    Mat g(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) g.col(j) = standard_normal(rng, dim);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(dim, dim);
    // Fix the sign ambiguity so the result is a deterministic function of g.
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < dim; ++j)
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    cams.push_back({v, q});
  }
  return cams;
}

}  // namespace isdlab
