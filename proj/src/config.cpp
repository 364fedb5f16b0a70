#include "isdlab/config.hpp"

#include <fstream>
#include <set>

namespace isdlab {

using nlohmann::json;

namespace {

// Typed access to one JSON object; remembers which keys were read so that
// finish() can reject anything unknown.
class Reader {
 public:
  Reader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key);
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!doc_.contains(key)) throw ConfigError(at(key), "required key is missing");
    return doc_.at(key);
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(raw(key), at(key)) : fallback;
  }
  int integer(const std::string& key, int fallback) {
    return has(key) ? as_integer(raw(key), at(key)) : fallback;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }
  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
    return v.get<bool>();
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items())
      if (!seen_.contains(key)) throw ConfigError(at(key), "unknown key");
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
  }
  static int as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec vector_from(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = Reader::as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

json vector_to(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Mat matrix_from(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  const Vec first = vector_from(v[0], path + "[0]");
  Mat out(static_cast<Eigen::Index>(v.size()), first.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec row = vector_from(v[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != first.size()) throw ConfigError(path, "rows differ in length");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

json matrix_to(const Mat& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_to(m.row(i).transpose()));
  return out;
}

template <typename F>
auto guarded(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

ScheduleDecl schedule_from(const json& doc, const std::string& path) {
  Reader r(doc, path);
  ScheduleDecl s;
  s.kind = guarded(r.at("kind"), [&] { return parse_schedule_kind(r.text("kind", "cosine")); });
  s.steps = r.integer("steps", s.steps);
  if (s.steps < 2) throw ConfigError(r.at("steps"), "must be at least 2");
  s.weight = guarded(r.at("weight"), [&] { return parse_weight_kind(r.text("weight", "sigma2")); });
  if (r.has("range")) {
    const Vec range = vector_from(r.raw("range"), r.at("range"));
    if (range.size() != 2) throw ConfigError(r.at("range"), "expected [lo, hi]");
    s.range = {range[0], range[1]};
    guarded(r.at("range"), [&] { return s.range.bounds(s.steps); });
  }
  r.finish();
  return s;
}

ReferenceDecl reference_from(const json& doc, const std::string& path) {
  Reader r(doc, path);
  ReferenceDecl d;
  int forms = 0;
  if (r.has("point")) {
    d.kind = ReferenceDecl::Kind::Point;
    d.point = vector_from(r.raw("point"), r.at("point"));
    ++forms;
  }
  if (r.has("component_mean")) {
    d.kind = ReferenceDecl::Kind::ComponentMean;
    d.component = Reader::as_integer(r.raw("component_mean"), r.at("component_mean"));
    ++forms;
  }
  if (r.has("sample")) {
    const auto& v = r.raw("sample");
    if (v.is_string() && v.get<std::string>() == "random") {
      d.kind = ReferenceDecl::Kind::SampleRandom;
    } else {
      d.kind = ReferenceDecl::Kind::Sample;
      d.component = Reader::as_integer(v, r.at("sample"));
    }
    ++forms;
  }
  if (forms != 1) throw ConfigError(path, "expected exactly one of point, component_mean, sample");
  r.finish();
  return d;
}

json reference_to(const ReferenceDecl& d) {
  switch (d.kind) {
    case ReferenceDecl::Kind::Point: return {{"point", vector_to(d.point)}};
    case ReferenceDecl::Kind::ComponentMean: return {{"component_mean", d.component}};
    case ReferenceDecl::Kind::Sample: return {{"sample", d.component}};
    case ReferenceDecl::Kind::SampleRandom: return {{"sample", "random"}};
  }
  return {};
}

void check_reference(const ReferenceDecl& d, const MixturePrior& prior, const std::string& path) {
  if ((d.kind == ReferenceDecl::Kind::ComponentMean || d.kind == ReferenceDecl::Kind::Sample) &&
      (d.component < 0 || d.component >= static_cast<int>(prior.size())))
    throw ConfigError(path, "component index out of range");
  if (d.kind == ReferenceDecl::Kind::Point && d.point.size() != prior.dim())
    throw ConfigError(path, "reference dimension does not match the prior");
}

CombineSchedule combine_from(const json& doc, const std::string& path) {
  Reader r(doc, path);
  CombineSchedule c;
  c.alpha_start = r.number("alpha_start", c.alpha_start);
  c.alpha_end = r.number("alpha_end", c.alpha_end);
  c.beta_start = r.number("beta_start", c.beta_start);
  c.beta_end = r.number("beta_end", c.beta_end);
  r.finish();
  return c;
}

NamedEstimator estimator_from(const json& doc, const std::string& path) {
  Reader r(doc, path);
  EstimatorSpec s;
  s.kind = guarded(r.at("kind"), [&] { return parse_estimator_kind(r.text("kind", "ISD")); });
  s.cfg_scale = r.number("cfg_scale", s.cfg_scale);
  if (!(s.cfg_scale >= 0.0)) throw ConfigError(r.at("cfg_scale"), "must be nonnegative");
  s.mvd_cfg_scale = r.number("mvd_cfg_scale", s.mvd_cfg_scale);
  if (!(s.mvd_cfg_scale >= 0.0)) throw ConfigError(r.at("mvd_cfg_scale"), "must be nonnegative");
  s.ip_scale = r.number("ip_scale", s.ip_scale);
  if (!(s.ip_scale >= 0.0 && s.ip_scale <= 1.0)) throw ConfigError(r.at("ip_scale"), "must lie in [0, 1]");
  s.delta_t = r.integer("delta_t", s.delta_t);
  if (s.delta_t < 1) throw ConfigError(r.at("delta_t"), "must be at least 1");
  s.cv_guidance = guarded(r.at("cv_guidance"), [&] { return parse_cv_guidance(r.text("cv_guidance", "same")); });
  if (r.has("combine")) {
    if (s.kind != EstimatorKind::Combined) throw ConfigError(r.at("combine"), "only valid for COMBINED");
    s.combine = combine_from(r.raw("combine"), r.at("combine"));
  } else if (s.kind == EstimatorKind::Combined) {
    s.combine = CombineSchedule{};
  }
  const std::string label = r.text("label", std::string(to_string(s.kind)));
  r.finish();
  return {label, s};
}

json estimator_to(const NamedEstimator& e) {
  const auto& s = e.spec;
  json out = {{"label", e.label},
              {"kind", to_string(s.kind)},
              {"cfg_scale", s.cfg_scale},
              {"mvd_cfg_scale", s.mvd_cfg_scale},
              {"ip_scale", s.ip_scale},
              {"delta_t", s.delta_t},
              {"cv_guidance", to_string(s.cv_guidance)}};
  if (s.combine)
    out["combine"] = {{"alpha_start", s.combine->alpha_start},
                      {"alpha_end", s.combine->alpha_end},
                      {"beta_start", s.combine->beta_start},
                      {"beta_end", s.combine->beta_end}};
  return out;
}

RenderDecl render_from(const json& doc, const std::string& path) {
  Reader r(doc, path);
  RenderDecl d;
  const auto kind = r.text("kind", "identity");
  if (kind == "identity") {
    d.kind = RenderDecl::Kind::Identity;
  } else if (kind == "ring") {
    d.kind = RenderDecl::Kind::Ring;
    d.views = r.integer("views", 4);
    if (d.views < 1) throw ConfigError(r.at("views"), "must be at least 1");
    d.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
  } else if (kind == "linear-view") {
    d.kind = RenderDecl::Kind::LinearView;
    const auto& cams = r.raw("cameras");
    if (!cams.is_array() || cams.empty()) throw ConfigError(r.at("cameras"), "expected a nonempty array");
    for (std::size_t i = 0; i < cams.size(); ++i)
      d.cameras.push_back(matrix_from(cams[i], r.at("cameras") + "[" + std::to_string(i) + "]"));
    d.views = static_cast<int>(d.cameras.size());
  } else {
    throw ConfigError(r.at("kind"), "expected identity, ring, or linear-view");
  }
  r.finish();
  return d;
}

json render_to(const RenderDecl& d) {
  switch (d.kind) {
    case RenderDecl::Kind::Identity: return {{"kind", "identity"}};
    case RenderDecl::Kind::Ring: return {{"kind", "ring"}, {"views", d.views}, {"seed", d.seed}};
    case RenderDecl::Kind::LinearView: {
      json cams = json::array();
      for (const auto& c : d.cameras) cams.push_back(matrix_to(c));
      return {{"kind", "linear-view"}, {"cameras", cams}};
    }
  }
  return {};
}

RenderMap make_render(const RenderDecl& d, Eigen::Index dim) {
  switch (d.kind) {
    case RenderDecl::Kind::Identity: return RenderMap::identity(dim);
    case RenderDecl::Kind::Ring: return RenderMap::linear_view(make_camera_ring(d.views, dim, d.seed));
    case RenderDecl::Kind::LinearView: {
      std::vector<Camera> cams;
      for (std::size_t i = 0; i < d.cameras.size(); ++i) cams.push_back({static_cast<int>(i), d.cameras[i]});
      return RenderMap::linear_view(std::move(cams));
    }
  }
  throw std::logic_error("unhandled render kind");
}

}  // namespace

MixturePrior prior_from_json(const json& doc, const std::string& path) {
  Reader r(doc, path);
  const auto name = r.text("name", "prior");
  const auto& comps = r.raw("components");
  if (!comps.is_array() || comps.empty()) throw ConfigError(r.at("components"), "expected a nonempty array");
  std::vector<Component> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto p = r.at("components") + "[" + std::to_string(i) + "]";
    Reader c(comps[i], p);
    Component comp;
    comp.weight = c.number("weight", 1.0);
    comp.mean = vector_from(c.raw("mean"), c.at("mean"));
    comp.variance = c.number("variance", 1.0);
    c.finish();
    out.push_back(std::move(comp));
  }
  r.finish();
  return guarded(path, [&] { return MixturePrior(name, std::move(out)); });
}

json prior_to_json(const MixturePrior& prior) {
  json comps = json::array();
  for (const auto& c : prior.components())
    comps.push_back({{"weight", c.weight}, {"mean", vector_to(c.mean)}, {"variance", c.variance}});
  return {{"name", prior.name()}, {"components", comps}};
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  Reader r(doc, "$");
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.experiment = r.text("experiment", c.experiment);
  if (c.experiment.empty() || c.experiment.find('/') != std::string::npos)
    throw ConfigError(r.at("experiment"), "must be a nonempty name without '/'");
  if (r.has("schedule")) c.schedule = schedule_from(r.raw("schedule"), r.at("schedule"));
  if (r.has("prior")) c.prior = prior_from_json(r.raw("prior"), r.at("prior"));
  if (r.has("uncond")) c.uncond = prior_from_json(r.raw("uncond"), r.at("uncond"));
  if (r.has("reference")) c.reference = reference_from(r.raw("reference"), r.at("reference"));
  if (r.has("conditioning")) {
    Reader cr(r.raw("conditioning"), r.at("conditioning"));
    c.conditioning.mode = guarded(cr.at("mode"), [&] { return parse_conditioning_mode(cr.text("mode", "posterior")); });
    if (cr.has("temperature")) {
      c.conditioning.temperature = Reader::as_number(cr.raw("temperature"), cr.at("temperature"));
      if (!(*c.conditioning.temperature > 0.0)) throw ConfigError(cr.at("temperature"), "must be positive");
    }
    cr.finish();
  }
  if (r.has("render")) c.render = render_from(r.raw("render"), r.at("render"));
  c.multiview = r.flag("multiview", false);
  if (r.has("canonical")) {
    c.canonical = prior_from_json(r.raw("canonical"), r.at("canonical"));
    c.multiview = true;
  }
  if (r.has("estimator") && r.has("estimators"))
    throw ConfigError("$", "give either estimator or estimators, not both");
  if (r.has("estimator")) c.estimators.push_back(estimator_from(r.raw("estimator"), r.at("estimator")));
  if (r.has("estimators")) {
    const auto& list = r.raw("estimators");
    if (!list.is_array() || list.empty()) throw ConfigError(r.at("estimators"), "expected a nonempty array");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.estimators.push_back(estimator_from(list[i], r.at("estimators") + "[" + std::to_string(i) + "]"));
  }
  if (c.estimators.empty()) c.estimators.push_back({"ISD", EstimatorSpec{}});

  if (r.has("runner")) {
    Reader rr(r.raw("runner"), r.at("runner"));
    auto& run = c.runner;
    run.iterations = rr.integer("iterations", run.iterations);
    if (run.iterations < 1) throw ConfigError(rr.at("iterations"), "must be at least 1");
    run.adam.lr = rr.number("lr", run.adam.lr);
    if (!(run.adam.lr >= 0.0)) throw ConfigError(rr.at("lr"), "must be nonnegative");
    if (rr.has("betas")) {
      const Vec b = vector_from(rr.raw("betas"), rr.at("betas"));
      if (b.size() != 2 || !(b[0] >= 0 && b[0] < 1 && b[1] >= 0 && b[1] < 1))
        throw ConfigError(rr.at("betas"), "expected two decays in [0, 1)");
      run.adam.beta1 = b[0];
      run.adam.beta2 = b[1];
    }
    run.adam.eps = rr.number("eps", run.adam.eps);
    if (!(run.adam.eps > 0.0)) throw ConfigError(rr.at("eps"), "must be positive");
    run.stride = rr.integer("stride", run.stride);
    if (run.stride < 1) throw ConfigError(rr.at("stride"), "must be at least 1");
    if (rr.has("init")) run.init = vector_from(rr.raw("init"), rr.at("init"));
    run.init_noise = rr.number("init_noise", run.init_noise);
    if (!(run.init_noise >= 0.0)) throw ConfigError(rr.at("init_noise"), "must be nonnegative");
    rr.finish();
  }
  if (r.has("surrogate")) {
    Reader sr(r.raw("surrogate"), r.at("surrogate"));
    auto& s = c.surrogate;
    const int buckets = sr.integer("buckets", static_cast<int>(s.buckets));
    if (buckets < 1) throw ConfigError(sr.at("buckets"), "must be at least 1");
    s.buckets = static_cast<std::size_t>(buckets);
    s.ridge = sr.number("ridge", s.ridge);
    if (!(s.ridge >= 0.0)) throw ConfigError(sr.at("ridge"), "must be nonnegative");
    s.refit_every = sr.integer("refit_every", s.refit_every);
    if (s.refit_every < 1) throw ConfigError(sr.at("refit_every"), "must be at least 1");
    const int window = sr.integer("window", static_cast<int>(s.window));
    if (window < 2) throw ConfigError(sr.at("window"), "must be at least 2");
    s.window = static_cast<std::size_t>(window);
    const int batch = sr.integer("batch", static_cast<int>(s.batch));
    if (batch < 0) throw ConfigError(sr.at("batch"), "must be nonnegative");
    s.batch = static_cast<std::size_t>(batch);
    sr.finish();
  }
  if (r.has("variance")) {
    Reader vr(r.raw("variance"), r.at("variance"));
    auto& v = c.variance;
    const int draws = vr.integer("draws", static_cast<int>(v.draws));
    if (draws < 2) throw ConfigError(vr.at("draws"), "must be at least 2 (variance is undefined otherwise)");
    v.draws = static_cast<std::size_t>(draws);
    const int buckets = vr.integer("buckets", static_cast<int>(v.buckets));
    if (buckets < 1) throw ConfigError(vr.at("buckets"), "must be at least 1");
    v.buckets = static_cast<std::size_t>(buckets);
    const int fit = vr.integer("fit_samples", static_cast<int>(v.fit_samples));
    if (fit < 2) throw ConfigError(vr.at("fit_samples"), "must be at least 2");
    v.fit_samples = static_cast<std::size_t>(fit);
    if (vr.has("theta")) v.theta = vector_from(vr.raw("theta"), vr.at("theta"));
    if (vr.has("benchmarks")) {
      const auto& list = vr.raw("benchmarks");
      if (!list.is_array()) throw ConfigError(vr.at("benchmarks"), "expected an array of paths");
      for (const auto& item : list) {
        if (!item.is_string()) throw ConfigError(vr.at("benchmarks"), "expected an array of paths");
        v.benchmarks.push_back(item.get<std::string>());
      }
    }
    vr.finish();
  }
  if (r.has("janus")) {
    Reader jr(r.raw("janus"), r.at("janus"));
    if (jr.has("e_hi")) c.janus.e_hi = Reader::as_number(jr.raw("e_hi"), jr.at("e_hi"));
    if (jr.has("e_lo")) c.janus.e_lo = Reader::as_number(jr.raw("e_lo"), jr.at("e_lo"));
    const int wins = jr.integer("min_wins", static_cast<int>(c.janus.min_wins));
    if (wins < 0) throw ConfigError(jr.at("min_wins"), "must be nonnegative");
    c.janus.min_wins = static_cast<std::size_t>(wins);
    jr.finish();
  }
  if (r.has("seeds")) {
    const auto& list = r.raw("seeds");
    if (!list.is_array() || list.empty()) throw ConfigError(r.at("seeds"), "expected a nonempty array");
    c.seeds.clear();
    for (const auto& s : list) {
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw ConfigError(r.at("seeds"), "seeds must be nonnegative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  const int threads = r.integer("threads", static_cast<int>(c.threads));
  if (threads < 1) throw ConfigError(r.at("threads"), "must be at least 1");
  c.threads = static_cast<unsigned>(threads);
  c.output = r.text("output", c.output);
  r.finish();

  // Cross-field checks.
  if (c.prior) {
    if (c.uncond && c.uncond->dim() != c.prior->dim())
      throw ConfigError("$.uncond", "dimension does not match the prior");
    if (c.reference) check_reference(*c.reference, *c.prior, "$.reference");
    if (c.canonical && c.canonical->dim() != c.prior->dim())
      throw ConfigError("$.canonical", "dimension does not match the prior");
    if (c.runner.init && c.runner.init->size() != c.prior->dim())
      throw ConfigError("$.runner.init", "dimension does not match the prior");
    if (c.variance.theta && c.variance.theta->size() != c.prior->dim())
      throw ConfigError("$.variance.theta", "dimension does not match the prior");
    for (const auto& cam : c.render.cameras)
      if (cam.rows() != c.prior->dim() || cam.cols() != c.prior->dim())
        throw ConfigError("$.render.cameras", "cameras must be square of the prior's dimension");
  }
  for (std::size_t i = 0; i < c.estimators.size(); ++i) {
    const auto kind = c.estimators[i].spec.kind;
    const auto p = "$.estimators[" + std::to_string(i) + "]";
    const bool needs_reference = kind == EstimatorKind::IpSds || kind == EstimatorKind::Isd ||
                                 kind == EstimatorKind::IpVsd || kind == EstimatorKind::TShift ||
                                 kind == EstimatorKind::Combined;
    if (needs_reference && !c.reference && c.variance.benchmarks.empty())
      throw ConfigError(p, std::string(to_string(kind)) + " needs a reference declaration");
    if ((kind == EstimatorKind::SdsMvd || kind == EstimatorKind::Combined) && !c.multiview)
      throw ConfigError(p, std::string(to_string(kind)) + " needs a multi-view declaration");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("malformed config: ") + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json out;
  out["experiment"] = c.experiment;
  out["schedule"] = {{"kind", to_string(c.schedule.kind)},
                     {"steps", c.schedule.steps},
                     {"weight", to_string(c.schedule.weight)},
                     {"range", {c.schedule.range.lo, c.schedule.range.hi}}};
  if (c.prior) out["prior"] = prior_to_json(*c.prior);
  if (c.uncond) out["uncond"] = prior_to_json(*c.uncond);
  if (c.reference) out["reference"] = reference_to(*c.reference);
  out["conditioning"] = {{"mode", to_string(c.conditioning.mode)}};
  if (c.conditioning.temperature) out["conditioning"]["temperature"] = *c.conditioning.temperature;
  out["render"] = render_to(c.render);
  out["multiview"] = c.multiview;
  if (c.canonical) out["canonical"] = prior_to_json(*c.canonical);
  json ests = json::array();
  for (const auto& e : c.estimators) ests.push_back(estimator_to(e));
  out["estimators"] = ests;
  json runner = {{"iterations", c.runner.iterations},
                 {"lr", c.runner.adam.lr},
                 {"betas", {c.runner.adam.beta1, c.runner.adam.beta2}},
                 {"eps", c.runner.adam.eps},
                 {"stride", c.runner.stride},
                 {"init_noise", c.runner.init_noise}};
  if (c.runner.init) runner["init"] = vector_to(*c.runner.init);
  out["runner"] = runner;
  out["surrogate"] = {{"buckets", c.surrogate.buckets},
                      {"ridge", c.surrogate.ridge},
                      {"refit_every", c.surrogate.refit_every},
                      {"window", c.surrogate.window},
                      {"batch", c.surrogate.batch}};
  json variance = {{"draws", c.variance.draws},
                   {"buckets", c.variance.buckets},
                   {"fit_samples", c.variance.fit_samples},
                   {"benchmarks", c.variance.benchmarks}};
  if (c.variance.theta) variance["theta"] = vector_to(*c.variance.theta);
  out["variance"] = variance;
  json janus = {{"min_wins", c.janus.min_wins}};
  if (c.janus.e_hi) janus["e_hi"] = *c.janus.e_hi;
  if (c.janus.e_lo) janus["e_lo"] = *c.janus.e_lo;
  out["janus"] = janus;
  out["seeds"] = c.seeds;
  out["threads"] = c.threads;
  out["output"] = c.output;
  return out;
}

Benchmark load_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read benchmark file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("malformed benchmark: ") + e.what());
  }
  Reader r(doc, "$");
  const auto name = r.text("name", path.stem().string());
  auto prior = prior_from_json(r.raw("prior"), r.at("prior"));
  auto reference = reference_from(r.raw("reference"), r.at("reference"));
  check_reference(reference, prior, r.at("reference"));
  Vec theta = vector_from(r.raw("theta"), r.at("theta"));
  if (theta.size() != prior.dim()) throw ConfigError(r.at("theta"), "dimension does not match the prior");
  r.finish();
  return {name, std::move(prior), std::move(reference), std::move(theta)};
}

ReferencePoint resolve_reference(const ReferenceDecl& decl, const MixturePrior& prior, std::uint64_t seed) {
  constexpr std::uint64_t kReferenceStream = 0x4ef5u;
  switch (decl.kind) {
    case ReferenceDecl::Kind::Point: return {decl.point, std::nullopt};
    case ReferenceDecl::Kind::ComponentMean:
      return {prior.components()[static_cast<std::size_t>(decl.component)].mean, decl.component};
    case ReferenceDecl::Kind::Sample: {
      Rng rng(seed ^ kReferenceStream);
      const auto& c = prior.components()[static_cast<std::size_t>(decl.component)];
      return {c.mean + std::sqrt(c.variance) * standard_normal(rng, prior.dim()), decl.component};
    }
    case ReferenceDecl::Kind::SampleRandom: {
      Rng rng(seed ^ kReferenceStream);
      return sample_reference(prior, rng);
    }
  }
  throw std::logic_error("unhandled reference kind");
}

Problem build_problem(const ExperimentConfig& config, const MixturePrior& prior,
                      const std::optional<ReferenceDecl>& reference, const EstimatorSpec& spec,
                      std::uint64_t seed) {
  const auto& s = config.schedule;
  auto sched = build_schedule(s.kind, s.steps, s.weight);
  Problem p = make_problem(std::move(sched), s.range, prior, make_render(config.render, prior.dim()));
  if (config.uncond) p.uncond = *config.uncond;
  if (reference) {
    const double tau2 = config.conditioning.temperature.value_or(default_temperature(prior));
    p.conditional.emplace(prior, resolve_reference(*reference, prior, seed), spec.ip_scale, tau2,
                          config.conditioning.mode);
  }
  if (config.multiview) attach_multiview(p, config.canonical ? *config.canonical : prior);
  return p;
}

Problem build_problem(const ExperimentConfig& config, const EstimatorSpec& spec, std::uint64_t seed) {
  if (!config.prior) throw ConfigError("$.prior", "required key is missing");
  return build_problem(config, *config.prior, config.reference, spec, seed);
}

RunConfig build_run(const ExperimentConfig& config, const EstimatorSpec& spec, std::uint64_t seed) {
  Problem p = build_problem(config, spec, seed);
  Vec init = config.runner.init.value_or(Vec::Zero(p.render.param_dim()));
  return RunConfig{std::move(p),          spec,       config.runner.iterations, config.runner.adam, seed,
                   config.runner.stride,  std::move(init), config.runner.init_noise, config.surrogate};
}

}  // namespace isdlab
