#include "doctest.h"

#include <functional>

#include "isdlab/distill.hpp"
#include "isdlab/multiview.hpp"

using namespace isdlab;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// Three steps with (alpha, sigma) = (0.6, 0.8) at t = 2, and a range holding only t = 2.
NoiseSchedule toy_schedule() { return NoiseSchedule({0.8, 0.6, 0.28}, {0.6, 0.8, 0.96}, {1, 1, 1}); }
const TimestepRange kOnlyTwo{0.6, 0.7};

Problem single_gaussian(double mu, double var, NoiseSchedule sched, TimestepRange range) {
  return make_problem(std::move(sched), range, MixturePrior("g", {{1.0, v1(mu), var}}), RenderMap::identity(1));
}

Problem two_mode(double m, double lambda, double tau2 = 0.025) {
  auto p = make_problem(build_schedule(ScheduleKind::Cosine, 1000, WeightKind::Unit), {},
                        MixturePrior("two", {{0.5, v1(-m), 0.25}, {0.5, v1(m), 0.25}}),
                        RenderMap::identity(1));
  p.conditional.emplace(condition(p.prior, {v1(m), 1}, lambda, tau2));
  return p;
}

EstimatorSpec spec_of(EstimatorKind kind, double cfg = 1.0, double lambda = 0.5) {
  EstimatorSpec s;
  s.kind = kind;
  s.cfg_scale = cfg;
  s.ip_scale = lambda;
  if (kind == EstimatorKind::Combined) s.combine = CombineSchedule{};
  return s;
}

struct Moments {
  Vec mean;
  Vec se;
  Vec var;
};

Moments moments(const std::vector<Vec>& xs) {
  const double n = static_cast<double>(xs.size());
  Vec mean = Vec::Zero(xs.front().size());
  for (const auto& x : xs) mean += x;
  mean /= n;
  Vec var = Vec::Zero(mean.size());
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  var /= n - 1;
  return {mean, (var / n).cwiseSqrt(), var};
}

std::vector<Draw> draws(const Problem& p, std::size_t n, std::uint64_t seed, DrawShape shape = {}) {
  Rng rng(seed);
  std::vector<Draw> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_draw(rng, p, shape));
  return out;
}

std::vector<Vec> grads(const Problem& p, const EstimatorSpec& s, const Vec& theta, const std::vector<Draw>& ds,
                       Progress progress = {}) {
  std::vector<Vec> out;
  for (const auto& d : ds) out.push_back(estimate(p, s, theta, d, progress).grad);
  return out;
}

}  // namespace

TEST_CASE("SDS expectation matches the closed form") {
  const auto p = single_gaussian(0.0, 1.0, toy_schedule(), kOnlyTwo);
  const auto m = moments(grads(p, spec_of(EstimatorKind::Sds), v1(2.0), draws(p, 100'000, 1)));
  CHECK(std::abs(m.mean[0] - 0.96) < 3 * m.se[0]);

  const auto at_mode = moments(grads(p, spec_of(EstimatorKind::Sds), v1(0.0), draws(p, 100'000, 2)));
  CHECK(std::abs(at_mode.mean[0]) < 3 * at_mode.se[0]);
}

TEST_CASE("zero loss weight annihilates every estimator") {
  auto p = two_mode(2.0, 0.5);
  p.schedule = p.schedule.with_weights(std::vector<double>(1000, 0.0));
  const auto surrogate = zero_surrogate(2, 1, 1000, 1);
  for (auto kind : {EstimatorKind::Sds, EstimatorKind::SdsNoCv, EstimatorKind::IpSds, EstimatorKind::Isd,
                    EstimatorKind::IpVsd, EstimatorKind::TShift}) {
    for (const auto& d : draws(p, 50, 3))
      CHECK(estimate(p, spec_of(kind, 7.5), v1(0.7), d, {}, &surrogate).grad.isZero(0.0));
  }
}

TEST_CASE("SDS and SDS_NOCV share expectations, the control variate lowers variance") {
  const auto p = two_mode(2.0, 0.5);
  const auto ds = draws(p, 100'000, 4);
  const auto a = grads(p, spec_of(EstimatorKind::Sds, 7.5), v1(0.7), ds);
  const auto b = grads(p, spec_of(EstimatorKind::SdsNoCv, 7.5), v1(0.7), ds);
  std::vector<Vec> diff;
  for (std::size_t i = 0; i < a.size(); ++i) diff.push_back(a[i] - b[i]);
  const auto md = moments(diff);
  CHECK(std::abs(md.mean[0]) < 3 * md.se[0]);

  // Mid-schedule variance on the single Gaussian.
  const auto g = single_gaussian(0.5, 0.3, build_schedule(ScheduleKind::Cosine, 1000), {0.45, 0.55});
  const auto gd = draws(g, 20'000, 5);
  const auto va = moments(grads(g, spec_of(EstimatorKind::Sds), v1(1.5), gd)).var[0];
  const auto vb = moments(grads(g, spec_of(EstimatorKind::SdsNoCv), v1(1.5), gd)).var[0];
  CHECK(va < vb);
}

TEST_CASE("estimator identities at zero IP scale") {
  const auto p = two_mode(2.0, 0.0);
  for (double cfg : {1.0, 7.5}) {
    for (const auto& d : draws(p, 200, 6)) {
      const auto sds = estimate(p, spec_of(EstimatorKind::Sds, cfg, 0.0), v1(0.3), d);
      const auto ip = estimate(p, spec_of(EstimatorKind::IpSds, cfg, 0.0), v1(0.3), d);
      CHECK(sds.grad == ip.grad);
      CHECK(estimate(p, spec_of(EstimatorKind::Isd, cfg, 0.0), v1(0.3), d).grad.isZero(0.0));
    }
  }
  // The shifted control variate no longer matches the teacher.
  auto shifted = spec_of(EstimatorKind::TShift, 7.5, 0.0);
  shifted.delta_t = 1;
  int nonzero = 0;
  for (const auto& d : draws(p, 50, 7)) nonzero += !estimate(p, shifted, v1(0.3), d).grad.isZero(0.0);
  CHECK(nonzero == 50);
}

TEST_CASE("IP-SDS with a collapsed posterior pulls toward the selected mode") {
  auto p = two_mode(2.0, 1.0);
  p.conditional.emplace(condition(p.prior, {v1(2.0), 1}, 1.0, 1e-8, ConditioningMode::Reweight));
  for (double theta : {0.0, 1.0, 3.0}) {
    const auto m = moments(grads(p, spec_of(EstimatorKind::IpSds, 1.0, 1.0), v1(theta), draws(p, 20'000, 8)));
    CHECK(m.mean[0] * (theta - 2.0) > 0.0);
    CHECK(std::abs(m.mean[0]) > 3 * m.se[0]);
  }
}

TEST_CASE("ISD at the midpoint points toward the referenced mode") {
  const auto p = two_mode(2.0, 1.0, 1e-8);
  const auto m = moments(grads(p, spec_of(EstimatorKind::Isd, 1.0, 1.0), v1(0.0), draws(p, 20'000, 9)));
  // A negative gradient moves theta toward +m under descent.
  CHECK(m.mean[0] < -3 * m.se[0]);
}

TEST_CASE("IP-VSD with a zero surrogate keeps only the teacher") {
  const auto p = two_mode(2.0, 0.5);
  const auto zero = zero_surrogate(3, 1, 1000, 1);
  for (const auto& d : draws(p, 100, 10)) {
    const auto vsd = estimate(p, spec_of(EstimatorKind::IpVsd, 7.5), v1(0.4), d, {}, &zero);
    const auto ip = estimate(p, spec_of(EstimatorKind::IpSds, 7.5), v1(0.4), d);
    CHECK((vsd.residual - (ip.residual + d.eps)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS(estimate(p, spec_of(EstimatorKind::IpVsd), v1(0.4), draws(p, 1, 1)[0]));
}

TEST_CASE("t-shift clamps and tracks ISD for small shifts") {
  const auto p = two_mode(2.0, 0.5);
  auto spec = spec_of(EstimatorKind::TShift, 7.5);
  spec.delta_t = 5000;
  const Vec theta = v1(0.4);
  for (const auto& d : draws(p, 20, 11)) {
    const Vec x = add_noise(theta, d.t, d.eps, p.schedule);
    const Vec teacher = guide(ip_eps_predict(*p.conditional, x, d.t, p.schedule),
                              eps_predict(p.uncond, x, d.t, p.schedule), 7.5);
    const Vec cv = guide(eps_predict(p.prior, x, 1000, p.schedule), eps_predict(p.uncond, x, 1000, p.schedule), 7.5);
    CHECK((estimate(p, spec, theta, d).residual - (teacher - cv)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // One step of a fine schedule barely moves alpha.
  auto fine = p;
  fine.schedule = build_schedule(ScheduleKind::Cosine, 10'000, WeightKind::Unit);
  spec.delta_t = 1;
  const auto ds = draws(fine, 20'000, 12);
  const auto a = moments(grads(fine, spec, theta, ds));
  const auto b = moments(grads(fine, spec_of(EstimatorKind::Isd, 7.5), theta, ds));
  CHECK(std::abs(a.mean[0] - b.mean[0]) < 1e-3);
  spec.delta_t = 0;
  CHECK_THROWS(spec.validate());
}

namespace {

Problem ring_problem(const MixturePrior& canonical, int views) {
  auto cams = make_camera_ring(views, 2, 0);
  auto p = make_problem(build_schedule(ScheduleKind::Cosine, 1000), {}, canonical, RenderMap::linear_view(cams));
  attach_multiview(p, canonical);
  p.conditional.emplace(condition(canonical, {canonical.components()[0].mean, 0}, 0.5, 0.02));
  return p;
}

const MixturePrior kCanon("c", {{0.6, (Vec(2) << 3, 1).finished(), 0.2}, {0.4, (Vec(2) << -2, -2.5).finished(), 0.2}});

}  // namespace

TEST_CASE("multi-view SDS with one view is single-view SDS") {
  const auto p = ring_problem(kCanon, 1);
  const Vec theta = (Vec(2) << 0.4, -1.0).finished();
  for (auto d : draws(p, 100, 13, {true, true})) {
    d.eps = d.eps_views;
    const auto mvd = estimate(p, spec_of(EstimatorKind::SdsMvd, 7.5), theta, d);
    const auto sds = estimate(p, spec_of(EstimatorKind::Sds, 7.5), theta, d);
    CHECK((mvd.grad - sds.grad).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("multi-view SDS is the sum of per-view SDS terms") {
  const auto p = ring_problem(kCanon, 4);
  const Vec theta = (Vec(2) << 0.4, -1.0).finished();
  std::vector<Problem> per_view;
  for (const auto& cam : p.render.cameras())
    per_view.push_back(make_problem(p.schedule, p.range, pushforward(kCanon, cam.transform),
                                    RenderMap::linear_view({{0, cam.transform}})));
  for (const auto& d : draws(p, 100, 14, {false, true})) {
    const auto mvd = estimate(p, spec_of(EstimatorKind::SdsMvd, 7.5), theta, d);
    Vec sum = Vec::Zero(2);
    for (int v = 0; v < 4; ++v) {
      const Draw dv{d.t, 0, d.eps_views.segment(2 * v, 2), {}};
      sum += estimate(per_view[std::size_t(v)], spec_of(EstimatorKind::Sds, 7.5), theta, dv).grad;
    }
    CHECK((mvd.grad - sum).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("multi-view SDS is stationary at a single canonical mode") {
  const MixturePrior single("s", {{1.0, (Vec(2) << 1.0, -0.5).finished(), 0.3}});
  const auto p = ring_problem(single, 4);
  const auto m = moments(grads(p, spec_of(EstimatorKind::SdsMvd, 1.0), single.components()[0].mean,
                               draws(p, 50'000, 15, {false, true})));
  for (int i = 0; i < 2; ++i) CHECK(std::abs(m.mean[i]) < 3 * m.se[i]);
}

TEST_CASE("alpha/beta schedule endpoints") {
  const CombineSchedule c;
  CHECK(schedule_alpha_beta(0, 2000, c) == std::pair{0.4, 0.6});
  CHECK(schedule_alpha_beta(2000, 2000, c) == std::pair{0.8, 0.02});
  const auto [a, b] = schedule_alpha_beta(1000, 2000, c);
  CHECK(a == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b == doctest::Approx(0.31).epsilon(1e-15));
  CHECK_THROWS(schedule_alpha_beta(2001, 2000, c));
  CHECK_THROWS(schedule_alpha_beta(-1, 2000, c));
}

TEST_CASE("COMBINED degenerations and linearity") {
  const auto p = ring_problem(kCanon, 4);
  const Vec theta = (Vec(2) << 0.4, -1.0).finished();
  auto isd_spec = spec_of(EstimatorKind::Isd, 7.5);
  auto mvd_spec = spec_of(EstimatorKind::SdsMvd, 50.0);
  auto spec = spec_of(EstimatorKind::Combined, 7.5);
  for (const auto& d : draws(p, 100, 16, {true, true})) {
    const Progress prog{300, 1000};
    const Vec isd = estimate(p, isd_spec, theta, d).grad;
    const Vec mvd = estimate(p, mvd_spec, theta, d).grad;

    spec.combine = CombineSchedule{0.4, 0.8, 0.0, 0.0};
    const double a = schedule_alpha_beta(prog.iter, prog.total, *spec.combine).first;
    CHECK(estimate(p, spec, theta, d, prog).grad == a * isd);

    spec.combine = CombineSchedule{0.0, 0.0, 0.6, 0.02};
    const double b = schedule_alpha_beta(prog.iter, prog.total, *spec.combine).second;
    CHECK(estimate(p, spec, theta, d, prog).grad == b * mvd);

    spec.combine = CombineSchedule{};
    const auto [ca, cb] = schedule_alpha_beta(prog.iter, prog.total, *spec.combine);
    CHECK((estimate(p, spec, theta, d, prog).grad - (ca * isd + cb * mvd)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("estimator spec validation") {
  auto s = spec_of(EstimatorKind::Isd);
  s.ip_scale = 1.5;
  CHECK_THROWS(s.validate());
  s.ip_scale = 0.5;
  s.combine = CombineSchedule{};
  CHECK_THROWS(s.validate());
  auto c = spec_of(EstimatorKind::Combined);
  CHECK_NOTHROW(c.validate());
  c.combine.reset();
  CHECK_THROWS(c.validate());
  CHECK_THROWS(parse_estimator_kind("VSD"));
  for (auto k : {EstimatorKind::Sds, EstimatorKind::Combined, EstimatorKind::TShift})
    CHECK(parse_estimator_kind(to_string(k)) == k);

  const auto p = two_mode(2.0, 0.5);
  CHECK_THROWS(grad_isd(p, spec_of(EstimatorKind::Sds), v1(0.0), draws(p, 1, 1)[0]));
  auto bare = p;
  bare.conditional.reset();
  CHECK_THROWS(estimate(bare, spec_of(EstimatorKind::Isd), v1(0.0), draws(p, 1, 1)[0]));
}
