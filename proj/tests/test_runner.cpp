#include "doctest.h"
#include "reference.hpp"

#include <algorithm>

#include "isdlab/multiview.hpp"
#include "isdlab/runner.hpp"

using namespace isdlab;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

RunConfig single_gaussian(double mu, double var, EstimatorKind kind = EstimatorKind::Sds) {
  RunConfig c{make_problem(build_schedule(ScheduleKind::Cosine, 1000), {},
                           MixturePrior("g", {{1.0, v1(mu), var}}), RenderMap::identity(1)),
              {}};
  c.estimator.kind = kind;
  c.estimator.cfg_scale = 1.0;
  c.init = v1(0.0);
  return c;
}

RunConfig two_mode(EstimatorKind kind, std::uint64_t seed) {
  RunConfig c{make_problem(build_schedule(ScheduleKind::Cosine, 1000, WeightKind::Unit), {},
                           MixturePrior("two", {{0.5, v1(-4), 0.25}, {0.5, v1(4), 0.25}}), RenderMap::identity(1)),
              {}};
  c.problem.conditional.emplace(condition(c.problem.prior, {v1(4), 1}, 0.5, default_temperature(c.problem.prior)));
  c.estimator.kind = kind;
  c.init = v1(0.0);
  c.init_noise = 0.01;
  c.seed = seed;
  c.stride = 1;
  return c;
}

RunTrace with_modes(const std::vector<int>& modes) {
  RunTrace t;
  for (int m : modes) t.records.push_back({0, v1(0), 0, 1, 0, {m, 1.0}});
  return t;
}

}  // namespace

TEST_CASE("SDS on a single Gaussian converges to the mean") {
  auto c = single_gaussian(1.0, 0.05);
  const auto trace = optimize(c);
  CHECK_FALSE(trace.aborted);
  CHECK(std::abs(trace.final_theta[0] - 1.0) < 0.05);
  CHECK(trace.records.size() == 2000 / 10 + 1);
  CHECK(mode_distance(trace.final_theta, c.problem) == doctest::Approx(std::abs(trace.final_theta[0] - 1.0)));
}

TEST_CASE("record count and strides") {
  auto c = single_gaussian(1.0, 0.05);
  c.iterations = 95;
  c.stride = 10;
  const auto t = optimize(c);
  REQUIRE(t.records.size() == 95 / 10 + 1);
  CHECK(t.records.back().iter == 90);
  CHECK(t.records.front().grad_norm == 0.0);
  CHECK(t.records[1].grad_norm > 0.0);
}

TEST_CASE("zero learning rate leaves theta alone") {
  auto c = single_gaussian(1.0, 0.05);
  c.adam.lr = 0.0;
  c.init = v1(0.3);
  const auto t = optimize(c);
  CHECK(t.final_theta == c.init);
  for (const auto& r : t.records) CHECK(r.theta == c.init);
}

TEST_CASE("identical configs give identical traces") {
  for (auto kind : {EstimatorKind::Isd, EstimatorKind::IpVsd}) {
    auto c = two_mode(kind, 3);
    c.iterations = 300;
    const auto a = optimize(c), b = optimize(c);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].theta == b.records[i].theta);
      CHECK(a.records[i].grad_norm == b.records[i].grad_norm);
    }
    c.seed = 4;
    CHECK(optimize(c).final_theta != a.final_theta);
  }
}

TEST_CASE("non-finite theta aborts and keeps the partial trace") {
  auto c = single_gaussian(1.0, 0.05);
  c.adam.lr = 1e308;
  c.stride = 1;
  c.init = v1(5.0);
  const auto t = optimize(c);
  CHECK(t.aborted);
  CHECK(t.diagnostic.find("non-finite") != std::string::npos);
  CHECK(t.records.size() >= 1);
  CHECK(t.records.size() < 2001);
}

TEST_CASE("config validation") {
  auto c = single_gaussian(1.0, 0.05);
  c.iterations = 0;
  CHECK_THROWS(optimize(c));
  c = single_gaussian(1.0, 0.05);
  c.adam.lr = -1;
  CHECK_THROWS(optimize(c));
  c = single_gaussian(1.0, 0.05);
  c.init = Vec::Zero(2);
  CHECK_THROWS(optimize(c));
}

TEST_CASE("distance to the mean shrinks window by window") {
  // Median over seeds of |theta - mu|, then the median within each 100-iteration window.
  const int seeds = 21, iters = 1000;
  std::vector<std::vector<double>> dist(iters + 1);
  for (int s = 0; s < seeds; ++s) {
    auto c = single_gaussian(1.0, 0.05);
    c.iterations = iters;
    c.stride = 1;
    c.seed = std::uint64_t(s);
    c.init = v1(3.0);
    const auto t = optimize(c);
    for (const auto& r : t.records) dist[std::size_t(r.iter)].push_back(std::abs(r.theta[0] - 1.0));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  std::vector<double> per_iter;
  for (auto& d : dist) per_iter.push_back(median(d));
  double prev = 1e9;
  for (int w = 0; w + 100 <= iters; w += 100) {
    const double m = median({per_iter.begin() + w, per_iter.begin() + w + 100});
    CHECK(m <= prev + 0.01);
    prev = m;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("classify_mode") {
  const MixturePrior two("two", {{0.5, v1(-2), 0.3}, {0.5, v1(2), 0.3}});
  const auto id = RenderMap::identity(1);
  CHECK(classify_mode(v1(2), two, id).component == 1);
  CHECK(classify_mode(v1(2), two, id).responsibility > 0.5);
  const auto tie = classify_mode(v1(0), two, id);
  CHECK(tie.component == 0);
  CHECK(tie.responsibility == doctest::Approx(0.5));

  // Against a brute-force posterior on a three-mode 1-D prior.
  const MixturePrior three("three", {{0.2, v1(-3), 0.2}, {0.5, v1(0.5), 0.4}, {0.3, v1(3.5), 0.3}});
  Rng rng(1);
  std::uniform_real_distribution<double> u(-6, 6);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const Vec x = v1(u(rng));
    std::vector<ref::ld> post;
    for (const auto& c : three.components()) post.push_back(c.weight * std::exp(ref::log_gauss(x, c.mean, c.variance)));
    const auto best = std::max_element(post.begin(), post.end());
    auto sorted = post;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] - sorted[1] < 1e-9L * sorted[0]) continue;
    ++checked;
    CHECK(classify_mode(x, three, id).component == int(best - post.begin()));
  }
  CHECK(checked > 95);
}

TEST_CASE("oscillation metrics") {
  const auto constant = oscillation_metrics(with_modes({1, 1, 1, 1}));
  CHECK(constant.switches == 0);
  CHECK(constant.stable_window == 4);
  const auto alternating = oscillation_metrics(with_modes({0, 1, 0, 1, 0}));
  CHECK(alternating.switches == 4);
  CHECK(alternating.stable_window == 1);
  const auto settle = oscillation_metrics(with_modes({0, 1, 0, 1, 1, 1}));
  CHECK(settle.switches == 3);
  CHECK(settle.stable_window == 3);
  CHECK_THROWS(oscillation_metrics(with_modes({0})));
}

TEST_CASE("ISD settles on the referenced mode") {
  int hits = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto c = two_mode(EstimatorKind::Isd, s);
    const auto t = optimize(c);
    hits += std::abs(t.final_theta[0] - 4.0) < 0.05 * 8.0;
  }
  CHECK(hits == 10);
}

TEST_CASE("view errors and mode separation") {
  const MixturePrior canon("c", {{0.6, (Vec(2) << 3, 1).finished(), 0.2}, {0.4, (Vec(2) << -2, -2.5).finished(), 0.2}});
  const auto map = RenderMap::linear_view(make_camera_ring(4, 2, 0));
  CHECK(mode_separation(canon) == doctest::Approx(std::sqrt(25.0 + 12.25)));
  for (double e : view_errors(canon.components()[0].mean, canon, map)) CHECK(e < 1e-12);
  CHECK(consistency_error(canon.components()[1].mean, canon, map) < 1e-12);
  const Vec th = (Vec(2) << 0.5, 0.25).finished();
  const auto errs = view_errors(th, canon, map);
  REQUIRE(errs.size() == 4);
  double mean = 0;
  for (std::size_t v = 0; v < 4; ++v) {
    const auto& A = map.cameras()[v].transform;
    const double d0 = (A * th - A * canon.components()[0].mean).norm();
    const double d1 = (A * th - A * canon.components()[1].mean).norm();
    CHECK(errs[v] == doctest::Approx(std::min(d0, d1) / mode_separation(canon)));
    mean += errs[v] / 4;
  }
  CHECK(consistency_error(th, canon, map) == doctest::Approx(mean));
  CHECK(mode_separation(MixturePrior("one", {{1.0, v1(0), 1.0}})) == 1.0);
}
