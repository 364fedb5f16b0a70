#pragma once

#include <vector>

#include "isdlab/types.hpp"

namespace isdlab {

struct Camera {
  int id = 0;
  Mat transform;  // d_view x d_theta
};

enum class RenderKind { Identity, LinearView };

/// Linear parameter-to-observation maps, one per camera.
class RenderMap {
 public:
  static RenderMap identity(Eigen::Index dim);
  static RenderMap linear_view(std::vector<Camera> cameras);

  RenderKind kind() const { return kind_; }
  const std::vector<Camera>& cameras() const { return cameras_; }
  std::size_t camera_count() const { return cameras_.size(); }
  const Camera& camera(int id) const;
  Eigen::Index param_dim() const { return cameras_.front().transform.cols(); }
  Eigen::Index view_dim() const { return cameras_.front().transform.rows(); }

 private:
  RenderMap(RenderKind kind, std::vector<Camera> cameras);

  RenderKind kind_;
  std::vector<Camera> cameras_;
};

Vec render(const RenderMap& map, const Vec& theta, const Camera& camera);
/// Transpose-Jacobian product A_c^T v.
Vec vjp(const RenderMap& map, const Camera& camera, const Vec& v);

/// V orthogonal cameras: equally spaced rotations for d = 2, seeded random
/// orthogonal matrices otherwise. Camera 0 is always the identity.
std::vector<Camera> make_camera_ring(int views, Eigen::Index dim, std::uint64_t seed);

}  // namespace isdlab
