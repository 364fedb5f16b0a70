#pragma once

#include <optional>
#include <string_view>
#include <utility>

#include "isdlab/multiview.hpp"
#include "isdlab/oracle.hpp"
#include "isdlab/render.hpp"
#include "isdlab/schedule.hpp"
#include "isdlab/surrogate.hpp"

namespace isdlab {

enum class EstimatorKind { Sds, SdsNoCv, IpSds, Isd, IpVsd, TShift, SdsMvd, Combined };

EstimatorKind parse_estimator_kind(std::string_view name);
std::string_view to_string(EstimatorKind kind);

/// Which prediction the ISD-family control variate is guided with.
///  same:   the control variate gets the teacher's guidance scale.
///  uncond: the control variate is the unconditional prediction alone.
enum class CvGuidance { Same, Uncond };

CvGuidance parse_cv_guidance(std::string_view name);
std::string_view to_string(CvGuidance g);

/// Linear interpolation endpoints for the ISD / multi-view mix.
struct CombineSchedule {
  double alpha_start = 0.4;
  double alpha_end = 0.8;
  double beta_start = 0.6;
  double beta_end = 0.02;
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Isd;
  double cfg_scale = 7.5;
  double mvd_cfg_scale = 50.0;  // multi-view term inside COMBINED
  double ip_scale = 0.5;
  int delta_t = 50;             // T_SHIFT only
  std::optional<CombineSchedule> combine;
  CvGuidance cv_guidance = CvGuidance::Same;

  void validate() const;
};

/// Everything an estimator reads besides theta and its random draw.
struct Problem {
  NoiseSchedule schedule;
  TimestepRange range;
  MixturePrior prior;   // the prompt prior p(x | y)
  MixturePrior uncond;  // the null-prompt prior used by guidance
  RenderMap render;
  std::optional<ConditionalOracle> conditional;
  std::optional<MultiViewPrior> multiview;
  std::optional<MultiViewPrior> multiview_uncond;
};

/// Builds a problem with the null prompt defaulted to prior.null_prompt().
Problem make_problem(NoiseSchedule schedule, TimestepRange range, MixturePrior prior,
                     RenderMap render);
/// Attaches a multi-view prior over the render map's cameras; the per-view
/// null prompt is the pushforward of the canonical null prompt.
void attach_multiview(Problem& problem, const MixturePrior& canonical);

/// The randomness of one Monte Carlo term. Paired comparisons replay the same draws.
struct Draw {
  int t = 0;
  int camera = 0;
  Vec eps;        // single-view noise, d_view
  Vec eps_views;  // stacked noise for the multi-view term, V * d_view
};

struct DrawShape {
  bool single = true;
  bool stacked = false;
  DrawShape operator|(const DrawShape& o) const { return {single || o.single, stacked || o.stacked}; }
};

DrawShape draw_shape(EstimatorKind kind);

/// Consumes t, then camera, then eps, then eps_views from rng, in that order.
Draw sample_draw(Rng& rng, const Problem& problem, DrawShape shape);

struct GradSample {
  int t = 0;
  int camera = 0;
  Vec eps;
  Vec residual;  // teacher minus control variate (ISD residual for COMBINED)
  Vec grad;
};

/// Optimizer progress; only COMBINED reads it.
struct Progress {
  int iter = 0;
  int total = 1;
};

std::pair<double, double> schedule_alpha_beta(int iter, int total, const CombineSchedule& combine);

GradSample grad_sds(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_sds_nocv(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_ip_sds(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_isd(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_ip_vsd(const Problem& p, const EstimatorSpec& spec, const Surrogate& surrogate,
                       const Vec& theta, const Draw& d);
GradSample grad_tshift(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_sds_mvd(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d);
GradSample grad_combined(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d,
                         Progress progress);

/// Dispatches on spec.kind. IP_VSD requires a surrogate.
GradSample estimate(const Problem& p, const EstimatorSpec& spec, const Vec& theta, const Draw& d,
                    Progress progress = {}, const Surrogate* surrogate = nullptr);

/// Draws one term from rng and evaluates it.
GradSample sample_gradient(const Problem& p, const EstimatorSpec& spec, const Vec& theta, Rng& rng,
                           Progress progress = {}, const Surrogate* surrogate = nullptr);

}  // namespace isdlab
