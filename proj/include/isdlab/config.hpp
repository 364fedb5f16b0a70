#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "isdlab/runner.hpp"
#include "isdlab/variance.hpp"

namespace isdlab {

/// Schema violation; path() is the JSON path of the offending key, e.g. "$.estimator.ip_scale".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ScheduleDecl {
  ScheduleKind kind = ScheduleKind::Cosine;
  int steps = 1000;
  WeightKind weight = WeightKind::SigmaSquared;
  TimestepRange range;
};

struct ReferenceDecl {
  enum class Kind { Point, Sample, SampleRandom, ComponentMean };
  Kind kind = Kind::ComponentMean;
  Vec point;
  int component = 0;
};

struct ConditioningDecl {
  ConditioningMode mode = ConditioningMode::Posterior;
  std::optional<double> temperature;  // default: a tenth of the mean component variance
};

struct RenderDecl {
  enum class Kind { Identity, Ring, LinearView };
  Kind kind = Kind::Identity;
  int views = 1;
  std::uint64_t seed = 0;
  std::vector<Mat> cameras;  // linear-view only
};

struct RunnerDecl {
  int iterations = 2000;
  AdamParams adam;
  int stride = 10;
  std::optional<Vec> init;  // default: zeros
  double init_noise = 0.0;
};

struct VarianceDecl {
  std::size_t draws = 10000;
  std::size_t buckets = 10;
  std::size_t fit_samples = 10000;
  std::optional<Vec> theta;
  std::vector<std::string> benchmarks;  // paths relative to the config file
};

struct JanusDecl {
  std::optional<double> e_hi;
  std::optional<double> e_lo;
  std::size_t min_wins = 45;
};

/// A validated experiment declaration.
struct ExperimentConfig {
  std::string experiment = "experiment";
  ScheduleDecl schedule;
  std::optional<MixturePrior> prior;
  std::optional<MixturePrior> uncond;
  std::optional<ReferenceDecl> reference;
  ConditioningDecl conditioning;
  RenderDecl render;
  bool multiview = false;
  std::optional<MixturePrior> canonical;  // multi-view canonical prior; defaults to `prior`
  std::vector<NamedEstimator> estimators;
  RunnerDecl runner;
  SurrogateSettings surrogate;
  VarianceDecl variance;
  JanusDecl janus;
  std::vector<std::uint64_t> seeds{0};
  unsigned threads = 1;
  std::string output = "out";

  std::filesystem::path base_dir;  // directory of the config file; not serialized
};

ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

nlohmann::json prior_to_json(const MixturePrior& prior);
MixturePrior prior_from_json(const nlohmann::json& doc, const std::string& path = "$");

/// One benchmark of the variance study: a prior, a reference, and the theta
/// at which estimators are compared.
struct Benchmark {
  std::string name;
  MixturePrior prior;
  ReferenceDecl reference;
  Vec theta;
};

Benchmark load_benchmark(const std::filesystem::path& path);

ReferencePoint resolve_reference(const ReferenceDecl& decl, const MixturePrior& prior, std::uint64_t seed);

/// Problem for one estimator: schedule, render map, priors, the conditional
/// oracle (when a reference is declared) and the multi-view prior.
Problem build_problem(const ExperimentConfig& config, const MixturePrior& prior,
                      const std::optional<ReferenceDecl>& reference, const EstimatorSpec& spec,
                      std::uint64_t seed);
Problem build_problem(const ExperimentConfig& config, const EstimatorSpec& spec, std::uint64_t seed);

RunConfig build_run(const ExperimentConfig& config, const EstimatorSpec& spec, std::uint64_t seed);

}  // namespace isdlab
