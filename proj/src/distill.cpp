#include "isdlab/distill.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace isdlab {

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "SDS") return EstimatorKind::Sds;
  if (name == "SDS_NOCV") return EstimatorKind::SdsNoCv;
  if (name == "IP_SDS") return EstimatorKind::IpSds;
  if (name == "ISD") return EstimatorKind::Isd;
  if (name == "IP_VSD") return EstimatorKind::IpVsd;
  if (name == "T_SHIFT") return EstimatorKind::TShift;
  if (name == "SDS_MVD") return EstimatorKind::SdsMvd;
  if (name == "COMBINED") return EstimatorKind::Combined;
  throw std::invalid_argument("unknown estimator kind '" + std::string(name) + "'");
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Sds: return "SDS";
    case EstimatorKind::SdsNoCv: return "SDS_NOCV";
    case EstimatorKind::IpSds: return "IP_SDS";
    case EstimatorKind::Isd: return "ISD";
    case EstimatorKind::IpVsd: return "IP_VSD";
    case EstimatorKind::TShift: return "T_SHIFT";
    case EstimatorKind::SdsMvd: return "SDS_MVD";
    case EstimatorKind::Combined: return "COMBINED";
  }
  return "?";
}

CvGuidance parse_cv_guidance(std::string_view name) {
  if (name == "same") return CvGuidance::Same;
  if (name == "uncond") return CvGuidance::Uncond;
  throw std::invalid_argument("unknown control-variate guidance '" + std::string(name) + "'");
}

std::string_view to_string(CvGuidance g) { return g == CvGuidance::Same ? "same" : "uncond"; }

void EstimatorSpec::validate() const {
  if (!(cfg_scale >= 0.0) || !(mvd_cfg_scale >= 0.0))
    throw std::invalid_argument("guidance scales must be nonnegative");
  if (!(ip_scale >= 0.0 && ip_scale <= 1.0)) throw std::invalid_argument("ip_scale must lie in [0, 1]");
  if (kind == EstimatorKind::TShift && delta_t < 1)
    throw std::invalid_argument("delta_t must be at least 1");
  if (combine.has_value() != (kind == EstimatorKind::Combined))
    throw std::invalid_argument("combine schedule must be present exactly for COMBINED");
}

Problem make_problem(NoiseSchedule schedule, TimestepRange range, MixturePrior prior,
                     RenderMap render) {
  range.bounds(schedule.steps());
  if (render.view_dim() != prior.dim())
    throw std::invalid_argument("render view dimension does not match the prior");
  auto uncond = prior.null_prompt(prior.name() + "/uncond");
  return Problem{std::move(schedule), range, std::move(prior), std::move(uncond), std::move(render),
                 std::nullopt, std::nullopt, std::nullopt};
}

void attach_multiview(Problem& problem, const MixturePrior& canonical) {
  if (canonical.dim() != problem.render.view_dim())
    throw std::invalid_argument("multi-view canonical prior does not match the view dimension");
  problem.multiview.emplace(canonical, problem.render.cameras());
  problem.multiview_uncond.emplace(canonical.null_prompt(canonical.name() + "/uncond"),
                                   problem.render.cameras());
}

DrawShape draw_shape(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::SdsMvd: return {false, true};
    case EstimatorKind::Combined: return {true, true};
    default: return {true, false};
  }
}

Draw sample_draw(Rng& rng, const Problem& problem, DrawShape shape) {
  Draw d;
  d.t = sample_timestep(rng, problem.range, problem.schedule.steps());
  const int cams = static_cast<int>(problem.render.camera_count());
  d.camera = std::uniform_int_distribution<int>(0, cams - 1)(rng);
  const auto dv = problem.render.view_dim();
  if (shape.single) d.eps = standard_normal(rng, dv);
  if (shape.stacked) d.eps_views = standard_normal(rng, dv * cams);
  return d;
}

std::pair<double, double> schedule_alpha_beta(int iter, int total, const CombineSchedule& c) {
  if (total < 0 || iter < 0 || iter > total)
    throw std::out_of_range("iteration " + std::to_string(iter) + " outside [0, " +
                            std::to_string(total) + "]");
  if (iter == total) return {c.alpha_end, c.beta_end};
  const double f = static_cast<double>(iter) / static_cast<double>(total);
  return {c.alpha_start + f * (c.alpha_end - c.alpha_start),
          c.beta_start + f * (c.beta_end - c.beta_start)};
}

namespace {

void require_kind(const EstimatorSpec& spec, std::initializer_list<EstimatorKind> kinds,
                  const char* who) {
  if (std::find(kinds.begin(), kinds.end(), spec.kind) == kinds.end())
    throw std::invalid_argument(std::string(who) + " called with estimator kind " +
                                std::string(to_string(spec.kind)));
}

const ConditionalOracle& conditional_of(const Problem& p) {
  if (!p.conditional) throw std::invalid_argument("estimator needs a conditional oracle");
  return *p.conditional;
}

// One rendered, noised view.
struct NoisyView {
  const Camera* camera;
  Vec x_t;
};

NoisyView noisy_view(const Problem& p, const Vec& theta, const Draw& d) {
  if (d.eps.size() != p.render.view_dim())
    throw std::invalid_argument("draw noise does not match the view dimension");
  const auto& cam = p.render.camera(d.camera);
  return {&cam, add_noise(render(p.render, theta, cam), d.t, d.eps, p.schedule)};
}

Vec guided(const Problem& p, const Vec& cond, const Vec& x_t, int t, double scale) {
  if (scale == 1.0) return cond;
  return guide(cond, eps_predict(p.uncond, x_t, t, p.schedule), scale);
}

Vec base_teacher(const Problem& p, const Vec& x_t, int t, double scale) {
  return guided(p, eps_predict(p.prior, x_t, t, p.schedule), x_t, t, scale);
}

Vec ip_teacher(const Problem& p, const Vec& x_t, int t, double scale) {
  return guided(p, ip_eps_predict(conditional_of(p), x_t, t, p.schedule), x_t, t, scale);
}

// Unet-style control variate for the ISD family, evaluated at timestep t_cv.
Vec base_control(const Problem& p, const EstimatorSpec& spec, const Vec& x_t, int t_cv) {
  if (spec.cv_guidance == CvGuidance::Uncond) return eps_predict(p.uncond, x_t, t_cv, p.schedule);
  return base_teacher(p, x_t, t_cv, spec.cfg_scale);
}

GradSample finish(const Problem& p, const Draw& d, const NoisyView& view, Vec residual) {
  GradSample g;
  g.t = d.t;
  g.camera = d.camera;
  g.eps = d.eps;
  g.grad = p.schedule.weight(d.t) * vjp(p.render, *view.camera, residual);
  g.residual = std::move(residual);
  return g;
}

}  // namespace

GradSample grad_sds(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::Sds}, "grad_sds");
  const auto view = noisy_view(p, theta, d);
  return finish(p, d, view, base_teacher(p, view.x_t, d.t, spec.cfg_scale) - d.eps);
}

GradSample grad_sds_nocv(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::SdsNoCv}, "grad_sds_nocv");
  const auto view = noisy_view(p, theta, d);
  return finish(p, d, view, base_teacher(p, view.x_t, d.t, spec.cfg_scale));
}

GradSample grad_ip_sds(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::IpSds}, "grad_ip_sds");
  const auto view = noisy_view(p, theta, d);
  return finish(p, d, view, ip_teacher(p, view.x_t, d.t, spec.cfg_scale) - d.eps);
}

GradSample grad_isd(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::Isd, EstimatorKind::Combined}, "grad_isd");
  const auto view = noisy_view(p, theta, d);
  return finish(p, d, view,
                ip_teacher(p, view.x_t, d.t, spec.cfg_scale) - base_control(p, spec, view.x_t, d.t));
}

GradSample grad_ip_vsd(const Problem& p, const EstimatorSpec& spec, const Surrogate& surrogate,
                       const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::IpVsd}, "grad_ip_vsd");
  const auto view = noisy_view(p, theta, d);
  return finish(p, d, view,
                ip_teacher(p, view.x_t, d.t, spec.cfg_scale) - surrogate_eps(surrogate, view.x_t, d.t));
}

GradSample grad_tshift(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::TShift}, "grad_tshift");
  if (spec.delta_t < 1) throw std::invalid_argument("delta_t must be at least 1");
  const auto view = noisy_view(p, theta, d);
  const int shifted = std::min(d.t + spec.delta_t, p.schedule.steps());
  return finish(p, d, view,
                ip_teacher(p, view.x_t, d.t, spec.cfg_scale) - base_control(p, spec, view.x_t, shifted));
}

GradSample grad_sds_mvd(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d) {
  require_kind(spec, {EstimatorKind::SdsMvd, EstimatorKind::Combined}, "grad_sds_mvd");
  if (!p.multiview || !p.multiview_uncond) throw std::invalid_argument("SDS_MVD needs a multi-view prior");
  const auto& mv = *p.multiview;
  const auto& cams = p.render.cameras();
  if (static_cast<int>(cams.size()) != mv.views())
    throw std::invalid_argument("render map camera count does not match the multi-view prior");
  const auto dv = mv.view_dim();
  if (d.eps_views.size() != dv * mv.views())
    throw std::invalid_argument("draw noise does not match the stacked view dimension");

  Vec stacked(dv * mv.views());
  for (int v = 0; v < mv.views(); ++v) {
    if (cams[static_cast<std::size_t>(v)].transform != mv.cameras()[static_cast<std::size_t>(v)].transform)
      throw std::invalid_argument("render map cameras differ from the multi-view prior's cameras");
    stacked.segment(v * dv, dv) = render(p.render, theta, cams[static_cast<std::size_t>(v)]);
  }
  const Vec x_t = add_noise(stacked, d.t, d.eps_views, p.schedule);
  const double scale = spec.kind == EstimatorKind::Combined ? spec.mvd_cfg_scale : spec.cfg_scale;
  Vec teacher = multiview_eps(mv, x_t, d.t, p.schedule);
  if (scale != 1.0) teacher = guide(teacher, multiview_eps(*p.multiview_uncond, x_t, d.t, p.schedule), scale);
  Vec residual = teacher - d.eps_views;

  Vec back = Vec::Zero(p.render.param_dim());
  for (int v = 0; v < mv.views(); ++v)
    back += vjp(p.render, cams[static_cast<std::size_t>(v)], residual.segment(v * dv, dv));

  GradSample g;
  g.t = d.t;
  g.camera = d.camera;
  g.eps = d.eps_views;
  g.grad = p.schedule.weight(d.t) * back;
  g.residual = std::move(residual);
  return g;
}

GradSample grad_combined(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d,
                         Progress progress) {
  require_kind(spec, {EstimatorKind::Combined}, "grad_combined");
  if (!spec.combine) throw std::invalid_argument("COMBINED needs a combine schedule");
  const auto [alpha, beta] = schedule_alpha_beta(progress.iter, progress.total, *spec.combine);
  GradSample isd = grad_isd(p, spec, theta, d);
  const GradSample mvd = grad_sds_mvd(p, spec, theta, d);
  isd.grad = alpha * isd.grad + beta * mvd.grad;
  return isd;
}

GradSample estimate(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d,
                    Progress progress, const Surrogate* surrogate) {
  switch (spec.kind) {
    case EstimatorKind::Sds: return grad_sds(p, spec, theta, d);
    case EstimatorKind::SdsNoCv: return grad_sds_nocv(p, spec, theta, d);
    case EstimatorKind::IpSds: return grad_ip_sds(p, spec, theta, d);
    case EstimatorKind::Isd: return grad_isd(p, spec, theta, d);
    case EstimatorKind::IpVsd:
      if (!surrogate) throw std::invalid_argument("IP_VSD needs a fitted surrogate");
      return grad_ip_vsd(p, spec, *surrogate, theta, d);
    case EstimatorKind::TShift: return grad_tshift(p, spec, theta, d);
    case EstimatorKind::SdsMvd: return grad_sds_mvd(p, spec, theta, d);
    case EstimatorKind::Combined: return grad_combined(p, spec, theta, d, progress);
  }
  throw std::logic_error("unhandled estimator kind");
}

GradSample sample_gradient(const Problem& p, const EstimatorSpec& spec, const Vec& theta, Rng& rng,
                           Progress progress, const Surrogate* surrogate) {
  const Draw d = sample_draw(rng, p, draw_shape(spec.kind));
  return estimate(p, spec, theta, d, progress, surrogate);
}

}  // namespace isdlab
