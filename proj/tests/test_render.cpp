#include "doctest.h"

#include <numbers>

#include "isdlab/multiview.hpp"
#include "isdlab/render.hpp"

using namespace isdlab;

namespace {

RenderMap random_linear(Rng& rng, int views, int rows, int cols) {
  std::vector<Camera> cams;
  for (int v = 0; v < views; ++v) {
    Mat a(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a(i, j) = standard_normal(rng, 1)[0];
    cams.push_back({v, a});
  }
  return RenderMap::linear_view(cams);
}

}  // namespace

TEST_CASE("identity render") {
  const auto map = RenderMap::identity(3);
  CHECK(map.camera_count() == 1);
  Vec th(3);
  th << 1, -2, 0.5;
  CHECK(render(map, th, map.camera(0)) == th);
  CHECK(vjp(map, map.camera(0), th) == th);
  CHECK_THROWS(map.camera(1));
  CHECK_THROWS(render(map, Vec::Zero(2), map.camera(0)));
  CHECK_THROWS(vjp(map, map.camera(0), Vec::Zero(4)));
}

TEST_CASE("ring cameras") {
  const auto one = make_camera_ring(1, 2, 0);
  REQUIRE(one.size() == 1);
  CHECK((one[0].transform - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  const auto ring = make_camera_ring(4, 2, 0);
  const auto map = RenderMap::linear_view(ring);
  const Vec e0 = Vec::Unit(2, 0);
  const Vec r = render(map, e0, map.camera(1));
  CHECK(r[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(1.0));
  for (int v = 0; v < 4; ++v) {
    const double ang = std::atan2(ring[std::size_t(v)].transform(1, 0), ring[std::size_t(v)].transform(0, 0));
    const double want = std::remainder(v * std::numbers::pi / 2, 2 * std::numbers::pi);
    CHECK(std::abs(std::remainder(ang - want, 2 * std::numbers::pi)) < 1e-12);
  }
  for (int d : {2, 3, 5}) {
    for (const auto& c : make_camera_ring(6, d, 17))
      CHECK((c.transform.transpose() * c.transform - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto a = make_camera_ring(3, 4, 5), b = make_camera_ring(3, 4, 5), c = make_camera_ring(3, 4, 6);
  CHECK(a[2].transform == b[2].transform);
  CHECK(a[2].transform != c[2].transform);
  CHECK_THROWS(make_camera_ring(0, 2, 0));
}

TEST_CASE("linearity, adjoint and finite-difference Jacobian") {
  Rng rng(12);
  const auto map = random_linear(rng, 3, 2, 4);
  for (const auto& cam : map.cameras()) {
    const Vec t1 = standard_normal(rng, 4), t2 = standard_normal(rng, 4);
    const Vec lhs = render(map, 2.5 * t1 + t2, cam);
    CHECK((lhs - (2.5 * render(map, t1, cam) + render(map, t2, cam))).cwiseAbs().maxCoeff() < 1e-12);

    const Vec v = standard_normal(rng, 2);
    const Vec back = vjp(map, cam, v);
    for (int i = 0; i < 4; ++i) {
      const Vec e = Vec::Unit(4, i);
      CHECK(std::abs(render(map, e, cam).dot(v) - back[i]) < 1e-12);
      // directional derivative of render along e_i, dotted with v
      const double h = 1e-6;
      const Vec th = standard_normal(rng, 4);
      const double fd = (render(map, th + h * e, cam) - render(map, th - h * e, cam)).dot(v) / (2 * h);
      CHECK(std::abs(fd - back[i]) < 1e-8);
    }
  }
}

TEST_CASE("camera ownership") {
  Rng rng(1);
  const auto a = random_linear(rng, 2, 2, 2);
  const auto b = random_linear(rng, 2, 2, 2);
  CHECK_THROWS(render(a, Vec::Zero(2), b.camera(1)));
  CHECK_THROWS(RenderMap::linear_view({}));
  CHECK_THROWS(RenderMap::linear_view({{1, Mat::Identity(2, 2)}}));
}

TEST_CASE("pushforward means match transformed samples") {
  // Modes kept close so that 1e5 samples resolve the mean well inside 0.01.
  const MixturePrior canon("c", {{0.6, (Vec(2) << 1, 0.5).finished(), 0.2},
                                 {0.4, (Vec(2) << -0.5, -1).finished(), 0.2}});
  const auto ring = make_camera_ring(4, 2, 0);
  Rng rng(21);
  for (const auto& cam : ring) {
    const auto pf = pushforward(canon, cam.transform);
    Vec expect = Vec::Zero(2);
    for (const auto& c : pf.components()) expect += c.weight * c.mean;
    Vec mc = Vec::Zero(2);
    const int n = 100'000;
    for (int i = 0; i < n; ++i) mc += cam.transform * sample_reference(canon, rng).x_ref;
    mc /= n;
    CHECK((mc - expect).cwiseAbs().maxCoeff() < 0.01);
    CHECK(pf.components()[0].variance == canon.components()[0].variance);
  }
  CHECK_THROWS(pushforward(canon, 2.0 * Mat::Identity(2, 2)));
}

TEST_CASE("multiview eps") {
  const auto sched = build_schedule(ScheduleKind::Cosine, 1000);
  const MixturePrior canon("c", {{0.5, (Vec(2) << 2, 0).finished(), 0.3},
                                 {0.5, (Vec(2) << -1, 1).finished(), 0.3}});
  const MultiViewPrior one(canon, make_camera_ring(1, 2, 0));
  const Vec x = (Vec(2) << 0.3, -0.7).finished();
  CHECK((multiview_eps(one, x, 300, sched) - eps_predict(one.per_view_priors()[0], x, 300, sched)).isZero(0.0));

  const auto ring = make_camera_ring(3, 2, 0);
  const MultiViewPrior mv(canon, ring);
  Vec stacked(6);
  stacked << 0.1, 0.2, -0.3, 0.4, 1.0, -1.0;
  const Vec out = multiview_eps(mv, stacked, 500, sched);
  for (int v = 0; v < 3; ++v) {
    const Vec expect = eps_predict(pushforward(canon, ring[std::size_t(v)].transform), stacked.segment(2 * v, 2), 500, sched);
    CHECK((out.segment(2 * v, 2) - expect).isZero(0.0));
  }
  CHECK_THROWS(multiview_eps(mv, Vec::Zero(4), 500, sched));
}
