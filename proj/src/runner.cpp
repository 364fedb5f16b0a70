#include "isdlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "isdlab/variance.hpp"

namespace isdlab {

void RunConfig::validate() const {
  estimator.validate();
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (!(adam.lr >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("moment decays must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  if (stride < 1) throw std::invalid_argument("trace stride must be at least 1");
  if (init.size() != problem.render.param_dim())
    throw std::invalid_argument("initial theta does not match the render map");
  if (!(init_noise >= 0.0)) throw std::invalid_argument("init_noise must be nonnegative");
  if (estimator.kind == EstimatorKind::IpVsd && (surrogate.refit_every < 1 || surrogate.window < 2))
    throw std::invalid_argument("surrogate refit settings are invalid");
}

ModeAssignment classify_mode(const Vec& theta, const MixturePrior& prior, const RenderMap& map) {
  const Vec r = prior.responsibilities(render(map, theta, map.camera(0)));
  ModeAssignment best{0, r[0]};
  for (Eigen::Index i = 1; i < r.size(); ++i)
    if (r[i] > best.responsibility) best = {static_cast<int>(i), r[i]};
  return best;
}

namespace {

// Separate stream for surrogate training data so the estimator's draws match
// those of any other estimator run with the same seed.
constexpr std::uint64_t kSurrogateStream = 0x5eed5a77e1u;
constexpr std::uint64_t kInitStream = 0x1417u;

struct SurrogateTrainer {
  const Problem& problem;
  const SurrogateSettings& settings;
  Rng rng;
  std::deque<NoisySample> window;
  Surrogate current;

  SurrogateTrainer(const Problem& p, const SurrogateSettings& s, std::uint64_t seed)
      : problem(p), settings(s), rng(seed ^ kSurrogateStream) {
    const auto [first, last] = p.range.bounds(p.schedule.steps());
    current = zero_surrogate(s.buckets, first, last, p.render.view_dim());
  }

  void observe(const Vec& theta, std::size_t n) {
    for (auto& sample : render_samples(problem, theta, n, rng)) {
      window.push_back(std::move(sample));
      if (window.size() > settings.window) window.pop_front();
    }
  }

  void refit() {
    const auto [first, last] = problem.range.bounds(problem.schedule.steps());
    const auto dim = problem.render.view_dim();
    // Buckets the window has not filled to d+1 stay at the zero map.
    std::vector<std::size_t> counts(settings.buckets, 0);
    for (const auto& s : window) ++counts[bucket_index(s.t, first, last, settings.buckets)];
    std::vector<NoisySample> usable;
    usable.reserve(window.size());
    for (const auto& s : window)
      if (counts[bucket_index(s.t, first, last, settings.buckets)] > static_cast<std::size_t>(dim))
        usable.push_back(s);
    current = fit_surrogate(usable, settings.buckets, settings.ridge, first, last, dim);
  }
};

TraceRecord make_record(int iter, const Vec& theta, double grad_norm, const RunConfig& cfg) {
  TraceRecord r;
  r.iter = iter;
  r.theta = theta;
  r.grad_norm = grad_norm;
  if (cfg.estimator.kind == EstimatorKind::Combined) {
    const auto [a, b] = schedule_alpha_beta(iter, cfg.iterations, *cfg.estimator.combine);
    r.alpha = a;
    r.beta = b;
  }
  r.mode = classify_mode(theta, cfg.problem.prior, cfg.problem.render);
  return r;
}

}  // namespace

RunTrace optimize(const RunConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto& problem = config.problem;
  const auto& adam = config.adam;

  Vec theta = config.init;
  if (config.init_noise > 0.0) {
    Rng init_rng(config.seed ^ kInitStream);
    theta += config.init_noise * standard_normal(init_rng, theta.size());
  }

  std::optional<SurrogateTrainer> trainer;
  if (config.estimator.kind == EstimatorKind::IpVsd) {
    trainer.emplace(problem, config.surrogate, config.seed);
    trainer->observe(theta, config.surrogate.window);
    trainer->refit();
  }

  Rng rng(config.seed);
  Vec m = Vec::Zero(theta.size());
  Vec v = Vec::Zero(theta.size());
  RunTrace trace;
  trace.records.push_back(make_record(0, theta, 0.0, config));

  for (int iter = 0; iter < config.iterations; ++iter) {
    if (trainer) {
      if (iter > 0 && iter % config.surrogate.refit_every == 0) trainer->refit();
    }
    const GradSample g = sample_gradient(problem, config.estimator, theta, rng,
                                         Progress{iter, config.iterations},
                                         trainer ? &trainer->current : nullptr);
    if (trainer) trainer->observe(theta, config.surrogate.batch);

    const double k = iter + 1.0;
    m = adam.beta1 * m + (1.0 - adam.beta1) * g.grad;
    v = adam.beta2 * v + (1.0 - adam.beta2) * g.grad.cwiseAbs2();
    const Vec m_hat = m / (1.0 - std::pow(adam.beta1, k));
    const Vec v_hat = v / (1.0 - std::pow(adam.beta2, k));
    theta -= adam.lr * (m_hat.array() / (v_hat.array().sqrt() + adam.eps)).matrix();

    if (!theta.allFinite()) {
      trace.aborted = true;
      trace.diagnostic = "non-finite theta at iteration " + std::to_string(iter + 1);
      break;
    }
    if ((iter + 1) % config.stride == 0)
      trace.records.push_back(make_record(iter + 1, theta, g.grad.norm(), config));
  }
  trace.final_theta = theta;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

OscillationMetrics oscillation_metrics(const RunTrace& trace) {
  const auto& r = trace.records;
  if (r.size() < 2) throw std::invalid_argument("oscillation metrics need at least two records");
  OscillationMetrics out;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i].mode.component != r[i - 1].mode.component) ++out.switches;
  out.stable_window = 1;
  for (std::size_t i = r.size() - 1; i > 0 && r[i - 1].mode.component == r.back().mode.component; --i)
    ++out.stable_window;
  return out;
}

double mode_separation(const MixturePrior& prior) {
  const auto& c = prior.components();
  if (c.size() < 2) return 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) best = std::min(best, (c[i].mean - c[j].mean).norm());
  return best > 0.0 ? best : 1.0;
}

std::vector<double> view_errors(const Vec& theta, const MixturePrior& canonical, const RenderMap& map) {
  const double separation = mode_separation(canonical);
  std::vector<double> out;
  out.reserve(map.camera_count());
  for (const auto& cam : map.cameras()) {
    const Vec view = render(map, theta, cam);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : canonical.components())
      nearest = std::min(nearest, (view - cam.transform * c.mean).norm());
    out.push_back(nearest / separation);
  }
  return out;
}

double consistency_error(const Vec& theta, const MixturePrior& canonical, const RenderMap& map) {
  const auto errors = view_errors(theta, canonical, map);
  double total = 0.0;
  for (double e : errors) total += e;
  return total / static_cast<double>(errors.size());
}

double mode_distance(const Vec& theta, const Problem& problem) {
  int target = classify_mode(theta, problem.prior, problem.render).component;
  if (problem.conditional && problem.conditional->reference().source_component)
    target = *problem.conditional->reference().source_component;
  const Vec view = render(problem.render, theta, problem.render.camera(0));
  return (view - problem.prior.components()[static_cast<std::size_t>(target)].mean).norm();
}

}  // namespace isdlab
