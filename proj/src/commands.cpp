#include "isdlab/commands.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "isdlab/parallel.hpp"

namespace isdlab {

using nlohmann::json;
namespace fs = std::filesystem;

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.out) config.output = *o.out;
  if (o.seeds) {
    if (o.seeds->empty()) throw ConfigError("--seeds", "expected at least one seed");
    config.seeds = *o.seeds;
  }
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("--threads", "must be at least 1");
    config.threads = *o.threads;
  }
}

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

json vec_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

fs::path experiment_dir(const ExperimentConfig& c) { return fs::path(c.output) / c.experiment; }

const MixturePrior& canonical_of(const ExperimentConfig& c, const Problem& p) {
  return c.canonical ? *c.canonical : p.prior;
}

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  const auto dim = trace.final_theta.size();
  out << "iter";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",theta_" << i;
  out << ",grad_norm,alpha,beta,mode,responsibility\n";
  for (const auto& r : trace.records) {
    out << r.iter;
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << format_number(r.theta[i]);
    out << ',' << format_number(r.grad_norm) << ',' << format_number(r.alpha) << ','
        << format_number(r.beta) << ',' << r.mode.component << ',' << format_number(r.mode.responsibility)
        << '\n';
  }
  return out.str();
}

std::string theta_csv(const Vec& theta) {
  std::ostringstream out;
  out << "index,value\n";
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << i << ',' << format_number(theta[i]) << '\n';
  return out.str();
}

// Metrics of one finished run. Deterministic: no wall-clock values.
json run_metrics(const RunTrace& trace, const RunConfig& run, const ExperimentConfig& config) {
  const auto& p = run.problem;
  const double separation = mode_separation(p.prior);
  const double distance = mode_distance(trace.final_theta, p);
  const auto mode = classify_mode(trace.final_theta, p.prior, p.render);
  std::vector<double> norms;
  for (std::size_t i = 1; i < trace.records.size(); ++i) norms.push_back(trace.records[i].grad_norm);
  json m = {{"final_mode_distance", distance},
            {"mode_separation", separation},
            {"relative_mode_distance", distance / separation},
            {"final_mode", mode.component},
            {"final_responsibility", mode.responsibility},
            {"records", trace.records.size()},
            {"mean_grad_norm", mean(norms)},
            {"max_grad_norm", norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end())}};
  if (trace.records.size() >= 2) {
    const auto osc = oscillation_metrics(trace);
    m["switches"] = osc.switches;
    m["stable_window"] = osc.stable_window;
  }
  if (p.render.camera_count() > 1 || p.multiview) {
    const auto& canonical = canonical_of(config, p);
    m["consistency_error"] = consistency_error(trace.final_theta, canonical, p.render);
    m["view_errors"] = view_errors(trace.final_theta, canonical, p.render);
  }
  return m;
}

struct RunOutcome {
  json metrics;
  bool aborted = false;
};

// Runs one (estimator, seed) pair and writes its trace, final theta and summary into dir.
RunOutcome run_one(const ExperimentConfig& config, const NamedEstimator& est, std::uint64_t seed,
                   const fs::path& dir, bool write_files) {
  const RunConfig run = build_run(config, est.spec, seed);
  const RunTrace trace = optimize(run);
  RunOutcome out{run_metrics(trace, run, config), trace.aborted};
  if (write_files) {
    json summary = {{"experiment", config.experiment},
                    {"estimator", est.label},
                    {"seed", seed},
                    {"aborted", trace.aborted},
                    {"diagnostic", trace.diagnostic},
                    {"final_theta", vec_json(trace.final_theta)},
                    {"metrics", out.metrics},
                    {"config", to_json(config)}};
    write_atomic(dir / "trace.csv", trace_csv(trace));
    write_atomic(dir / "final_theta.csv", theta_csv(trace.final_theta));
    write_atomic(dir / "summary.json", dump(summary));
  }
  return out;
}

json aggregate_runs(const std::vector<std::uint64_t>& seeds, const std::vector<RunOutcome>& outcomes) {
  std::vector<double> distances, relative, switches;
  json per_seed = json::array();
  std::size_t aborted = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& m = outcomes[i].metrics;
    distances.push_back(m["final_mode_distance"].get<double>());
    relative.push_back(m["relative_mode_distance"].get<double>());
    if (m.contains("switches")) switches.push_back(m["switches"].get<double>());
    aborted += outcomes[i].aborted;
    per_seed.push_back({{"seed", seeds[i]}, {"aborted", outcomes[i].aborted}, {"metrics", m}});
  }
  const auto within = std::count_if(relative.begin(), relative.end(), [](double r) { return r <= 0.05; });
  return {{"seeds", seeds.size()},
          {"aborted", aborted},
          {"mean_mode_distance", mean(distances)},
          {"median_mode_distance", median(distances)},
          {"within_5pct_of_separation", within},
          {"median_switches", median(switches)},
          {"runs", per_seed}};
}

}  // namespace

json cmd_run(const ExperimentConfig& config) {
  if (!config.prior) throw ConfigError("$.prior", "required key is missing");
  const auto root = experiment_dir(config);
  const bool nested = config.estimators.size() > 1;
  json summary = {{"experiment", config.experiment}, {"config", to_json(config)}, {"estimators", json::array()}};
  bool any_aborted = false;
  for (const auto& est : config.estimators) {
    std::vector<RunOutcome> outcomes(config.seeds.size());
    parallel_for(config.seeds.size(), config.threads, [&](std::size_t i) {
      const auto seed = config.seeds[i];
      auto dir = root / std::to_string(seed);
      if (nested) dir /= est.label;
      outcomes[i] = run_one(config, est, seed, dir, true);
    });
    json agg = aggregate_runs(config.seeds, outcomes);
    agg["label"] = est.label;
    any_aborted = any_aborted || agg["aborted"].get<std::size_t>() > 0;
    summary["estimators"].push_back(std::move(agg));
  }
  summary["aborted"] = any_aborted;
  write_atomic(root / "summary.json", dump(summary));
  return summary;
}

namespace {

struct VarianceCase {
  std::string name;
  MixturePrior prior;
  std::optional<ReferenceDecl> reference;
  Vec theta;
};

std::vector<VarianceCase> variance_cases(const ExperimentConfig& config) {
  std::vector<VarianceCase> out;
  for (std::size_t i = 0; i < config.variance.benchmarks.size(); ++i) {
    fs::path path = config.variance.benchmarks[i];
    if (path.is_relative()) path = config.base_dir / path;
    auto b = load_benchmark(path);
    out.push_back({b.name, std::move(b.prior), b.reference, std::move(b.theta)});
  }
  if (out.empty()) {
    if (!config.prior) throw ConfigError("$.prior", "needed when variance.benchmarks is empty");
    if (!config.variance.theta) throw ConfigError("$.variance.theta", "needed when variance.benchmarks is empty");
    out.push_back({config.prior->name(), *config.prior, config.reference, *config.variance.theta});
  }
  return out;
}

bool uses_reference(EstimatorKind k) {
  return k == EstimatorKind::IpSds || k == EstimatorKind::Isd || k == EstimatorKind::IpVsd ||
         k == EstimatorKind::TShift || k == EstimatorKind::Combined;
}

const GradStats* find_kind(const ComparisonReport& r, EstimatorKind kind) {
  for (const auto& s : r.stats)
    if (s.estimator.kind == kind) return &s;
  return nullptr;
}

// True when a's variance is at most b's in every coordinate of every bucket
// both estimators populated.
bool bucketwise_le(const GradStats& a, const GradStats& b) {
  for (std::size_t k = 0; k < a.bucket_var.size(); ++k) {
    if (a.bucket_var[k].size() == 0 || b.bucket_var[k].size() == 0) continue;
    if ((a.bucket_var[k].array() > b.bucket_var[k].array()).any()) return false;
  }
  return true;
}

json stats_json(const GradStats& s) {
  json buckets = json::array();
  for (std::size_t k = 0; k < s.bucket_var.size(); ++k)
    buckets.push_back({{"count", s.bucket_count[k]},
                       {"var", s.bucket_var[k].size() ? vec_json(s.bucket_var[k]) : json(nullptr)}});
  return {{"label", s.label},
          {"kind", to_string(s.estimator.kind)},
          {"n", s.n},
          {"mean", vec_json(s.mean)},
          {"var", vec_json(s.var)},
          {"mean_norm", s.mean_norm()},
          {"var_mean", s.var_mean()},
          {"var_trace", s.var_trace()},
          {"buckets", buckets}};
}

}  // namespace

json cmd_variance(const ExperimentConfig& config) {
  const auto& estimators = config.estimators;
  const EstimatorSpec* ip_spec = nullptr;
  for (const auto& e : estimators) {
    if (!uses_reference(e.spec.kind)) continue;
    if (ip_spec && ip_spec->ip_scale != e.spec.ip_scale)
      throw ConfigError("$.estimators", "estimators compared on shared draws must share ip_scale");
    ip_spec = &e.spec;
  }
  const EstimatorSpec& problem_spec = ip_spec ? *ip_spec : estimators.front().spec;
  const bool needs_surrogate = std::any_of(estimators.begin(), estimators.end(),
                                           [](const auto& e) { return e.spec.kind == EstimatorKind::IpVsd; });
  const auto cases = variance_cases(config);
  const auto root = experiment_dir(config);

  json summary = {{"experiment", config.experiment}, {"config", to_json(config)}, {"seeds", json::array()}};
  for (const auto seed : config.seeds) {
    json benchmarks = json::array();
    std::size_t isd_wins = 0, sds_wins = 0, isd_pairs = 0, sds_pairs = 0;
    for (std::size_t b = 0; b < cases.size(); ++b) {
      const auto& vc = cases[b];
      if (ip_spec && !vc.reference) throw ConfigError("$.reference", "benchmark " + vc.name + " lacks a reference");
      const Problem problem = build_problem(config, vc.prior, vc.reference, problem_spec, seed);
      if (vc.theta.size() != problem.render.param_dim())
        throw ConfigError("$.variance.theta", "dimension does not match the render map");

      std::optional<Surrogate> surrogate;
      if (needs_surrogate) {
        Rng fit_rng(seed ^ 0x5eed5a77e1u);
        const auto data = render_samples(problem, vc.theta, config.variance.fit_samples, fit_rng);
        const auto [first, last] = problem.range.bounds(problem.schedule.steps());
        surrogate = fit_surrogate(data, config.surrogate.buckets, config.surrogate.ridge, first, last,
                                  problem.render.view_dim());
      }
      Rng rng(seed);
      const auto report = compare_estimators(estimators, problem, vc.theta, config.variance.draws, rng,
                                             surrogate ? &*surrogate : nullptr,
                                             {config.variance.buckets, config.threads});

      std::ostringstream csv;
      csv << "estimator,t,grad_norm\n";
      for (const auto& s : report.stats)
        for (std::size_t i = 0; i < s.n; ++i)
          csv << s.label << ',' << s.t_trace[i] << ',' << format_number(s.norm_trace[i]) << '\n';
      write_atomic(root / std::to_string(seed) / (vc.name + ".csv"), csv.str());

      json entry = {{"benchmark", vc.name}, {"stats", json::array()}, {"verdicts", json::array()}};
      for (const auto& s : report.stats) entry["stats"].push_back(stats_json(s));
      for (const auto& v : report.verdicts)
        entry["verdicts"].push_back({{"first", v.first},
                                     {"second", v.second},
                                     {"first_lower", v.first_lower},
                                     {"second_lower", v.second_lower},
                                     {"p_value", v.p_value},
                                     {"verdict", to_string(v.verdict)}});
      const auto* isd = find_kind(report, EstimatorKind::Isd);
      const auto* ipsds = find_kind(report, EstimatorKind::IpSds);
      if (isd && ipsds) {
        const bool ok = bucketwise_le(*isd, *ipsds);
        entry["isd_le_ip_sds_every_bucket"] = ok;
        ++isd_pairs;
        isd_wins += ok;
      }
      const auto* sds = find_kind(report, EstimatorKind::Sds);
      const auto* nocv = find_kind(report, EstimatorKind::SdsNoCv);
      if (sds && nocv) {
        const bool ok = (sds->var.array() <= nocv->var.array()).all();
        entry["sds_le_sds_nocv"] = ok;
        ++sds_pairs;
        sds_wins += ok;
      }
      benchmarks.push_back(std::move(entry));
    }
    json per_seed = {{"seed", seed}, {"benchmarks", benchmarks}};
    if (isd_pairs) per_seed["isd_le_ip_sds"] = {{"holds", isd_wins}, {"of", isd_pairs}};
    if (sds_pairs) per_seed["sds_le_sds_nocv"] = {{"holds", sds_wins}, {"of", sds_pairs}};
    write_atomic(root / std::to_string(seed) / "verdicts.json", dump(per_seed));
    summary["seeds"].push_back(std::move(per_seed));
  }
  write_atomic(root / "summary.json", dump(summary));
  return summary;
}

Ablation parse_ablation(std::string_view name) {
  if (name == "ip-scale") return Ablation::IpScale;
  if (name == "control-variate") return Ablation::ControlVariate;
  throw std::invalid_argument("unknown ablation '" + std::string(name) + "' (expected ip-scale or control-variate)");
}

std::string_view to_string(Ablation a) { return a == Ablation::IpScale ? "ip-scale" : "control-variate"; }

std::vector<NamedEstimator> ablation_settings(Ablation which, const EstimatorSpec& base) {
  std::vector<NamedEstimator> out;
  if (which == Ablation::IpScale) {
    for (double lambda : {0.0, 0.2, 0.5, 0.7, 1.0}) {
      EstimatorSpec s = base;
      s.kind = EstimatorKind::Isd;
      s.combine.reset();
      s.ip_scale = lambda;
      out.push_back({"ip_scale=" + format_number(lambda), s});
    }
    return out;
  }
  auto with = [&](EstimatorKind kind, double cfg) {
    EstimatorSpec s = base;
    s.kind = kind;
    s.combine.reset();
    s.cfg_scale = cfg;
    return s;
  };
  out.push_back({"random-noise-cfg7.5", with(EstimatorKind::IpSds, 7.5)});
  out.push_back({"random-noise-cfg100", with(EstimatorKind::IpSds, 100.0)});
  out.push_back({"surrogate", with(EstimatorKind::IpVsd, base.cfg_scale)});
  out.push_back({"t+dt", with(EstimatorKind::TShift, base.cfg_scale)});
  out.push_back({"base-at-t", with(EstimatorKind::Isd, base.cfg_scale)});
  return out;
}

namespace {

EstimatorSpec first_of_kind(const ExperimentConfig& config, EstimatorKind kind, EstimatorSpec fallback) {
  for (const auto& e : config.estimators)
    if (e.spec.kind == kind) return e.spec;
  return fallback;
}

}  // namespace

json cmd_ablate(const ExperimentConfig& config, Ablation which) {
  if (!config.prior) throw ConfigError("$.prior", "required key is missing");
  if (!config.reference) throw ConfigError("$.reference", "ablations need a reference declaration");
  const auto settings = ablation_settings(which, first_of_kind(config, EstimatorKind::Isd, EstimatorSpec{}));
  const auto root = experiment_dir(config) / std::string(to_string(which));

  std::ostringstream csv;
  csv << "setting,kind,ip_scale,cfg_scale,mean_mode_distance,median_mode_distance,mean_consistency_error,"
         "mean_grad_norm,max_grad_norm,aborted\n";
  json rows = json::array();
  for (const auto& setting : settings) {
    std::vector<RunOutcome> outcomes(config.seeds.size());
    parallel_for(config.seeds.size(), config.threads, [&](std::size_t i) {
      outcomes[i] = run_one(config, setting, config.seeds[i], {}, false);
    });
    json agg = aggregate_runs(config.seeds, outcomes);
    std::vector<double> consistency, norms;
    double max_norm = 0.0;
    for (const auto& o : outcomes) {
      if (o.metrics.contains("consistency_error")) consistency.push_back(o.metrics["consistency_error"]);
      norms.push_back(o.metrics["mean_grad_norm"]);
      max_norm = std::max(max_norm, o.metrics["max_grad_norm"].get<double>());
    }
    json row = {{"setting", setting.label},
                {"kind", to_string(setting.spec.kind)},
                {"ip_scale", setting.spec.ip_scale},
                {"cfg_scale", setting.spec.cfg_scale},
                {"mean_mode_distance", agg["mean_mode_distance"]},
                {"median_mode_distance", agg["median_mode_distance"]},
                {"mean_consistency_error", consistency.empty() ? json(nullptr) : json(mean(consistency))},
                {"mean_grad_norm", mean(norms)},
                {"max_grad_norm", max_norm},
                {"aborted", agg["aborted"]},
                {"runs", agg["runs"]}};
    csv << setting.label << ',' << to_string(setting.spec.kind) << ',' << format_number(setting.spec.ip_scale)
        << ',' << format_number(setting.spec.cfg_scale) << ','
        << format_number(row["mean_mode_distance"].get<double>()) << ','
        << format_number(row["median_mode_distance"].get<double>()) << ','
        << (consistency.empty() ? std::string("") : format_number(mean(consistency))) << ','
        << format_number(mean(norms)) << ',' << format_number(max_norm) << ',' << agg["aborted"].dump() << '\n';
    rows.push_back(std::move(row));
  }
  json summary = {{"experiment", config.experiment},
                  {"ablation", to_string(which)},
                  {"rows", rows},
                  {"config", to_json(config)}};
  write_atomic(root / "table.csv", csv.str());
  write_atomic(root / "summary.json", dump(summary));
  return summary;
}

json cmd_janus(const ExperimentConfig& config) {
  if (!config.prior) throw ConfigError("$.prior", "required key is missing");
  if (!config.multiview) throw ConfigError("$.multiview", "the Janus experiment needs a multi-view declaration");
  if (config.render.kind == RenderDecl::Kind::Identity || config.render.views < 2)
    throw ConfigError("$.render.views", "the Janus experiment needs at least two cameras");
  if (!config.reference) throw ConfigError("$.reference", "the Janus experiment needs a reference declaration");

  EstimatorSpec combined_fallback;
  combined_fallback.kind = EstimatorKind::Combined;
  combined_fallback.combine = CombineSchedule{};
  const EstimatorSpec combined = first_of_kind(config, EstimatorKind::Combined, combined_fallback);
  EstimatorSpec isd = combined;
  isd.kind = EstimatorKind::Isd;
  isd.combine.reset();
  const NamedEstimator arms[2] = {{"ISD", isd}, {"COMBINED", combined}};

  const auto root = experiment_dir(config);
  const std::size_t n = config.seeds.size();
  std::vector<RunOutcome> isd_runs(n), combined_runs(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const auto dir = root / std::to_string(config.seeds[i]);
    isd_runs[i] = run_one(config, arms[0], config.seeds[i], dir / "ISD", true);
    combined_runs[i] = run_one(config, arms[1], config.seeds[i], dir / "COMBINED", true);
  });

  std::ostringstream csv;
  csv << "seed,isd_error,combined_error,combined_lower\n";
  std::size_t wins = 0;
  std::vector<double> isd_errors, combined_errors;
  json pairs = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = isd_runs[i].metrics["consistency_error"];
    const double b = combined_runs[i].metrics["consistency_error"];
    const bool lower = b < a;
    wins += lower;
    isd_errors.push_back(a);
    combined_errors.push_back(b);
    csv << config.seeds[i] << ',' << format_number(a) << ',' << format_number(b) << ',' << (lower ? 1 : 0) << '\n';
    pairs.push_back({{"seed", config.seeds[i]},
                     {"isd_error", a},
                     {"combined_error", b},
                     {"isd_view_errors", isd_runs[i].metrics["view_errors"]},
                     {"combined_view_errors", combined_runs[i].metrics["view_errors"]},
                     {"combined_lower", lower}});
  }
  const double isd_mean = mean(isd_errors);
  const double combined_mean = mean(combined_errors);
  const auto& sched = *combined.combine;
  json summary = {{"experiment", config.experiment},
                  {"pairs", n},
                  {"combined_lower", wins},
                  {"min_wins", config.janus.min_wins},
                  {"pass", wins >= config.janus.min_wins},
                  {"isd_mean_error", isd_mean},
                  {"combined_mean_error", combined_mean},
                  {"alpha_schedule", {sched.alpha_start, sched.alpha_end}},
                  {"beta_schedule", {sched.beta_start, sched.beta_end}},
                  {"cfg_scale", combined.cfg_scale},
                  {"mvd_cfg_scale", combined.mvd_cfg_scale},
                  {"per_seed", pairs},
                  {"config", to_json(config)}};
  if (config.janus.e_hi) summary["isd_above_e_hi"] = isd_mean > *config.janus.e_hi;
  if (config.janus.e_lo) summary["combined_below_e_lo"] = combined_mean < *config.janus.e_lo;
  write_atomic(root / "janus.csv", csv.str());
  write_atomic(root / "summary.json", dump(summary));
  return summary;
}

}  // namespace isdlab
