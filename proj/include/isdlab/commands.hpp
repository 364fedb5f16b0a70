#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isdlab/config.hpp"

namespace isdlab {

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<unsigned> threads;
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// Writes to a sibling temporary file and renames it into place, so the
/// target is either complete or absent.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest text that parses back to the same double.
std::string format_number(double x);

/// Each command writes its files under <output>/<experiment>/ and returns the
/// aggregate summary it wrote. An aborted run is reported in the summary
/// ("aborted": true) rather than thrown.
nlohmann::json cmd_run(const ExperimentConfig& config);
nlohmann::json cmd_variance(const ExperimentConfig& config);

enum class Ablation { IpScale, ControlVariate };
Ablation parse_ablation(std::string_view name);
std::string_view to_string(Ablation a);

/// The five settings of each sweep, in table order.
std::vector<NamedEstimator> ablation_settings(Ablation which, const EstimatorSpec& base);

nlohmann::json cmd_ablate(const ExperimentConfig& config, Ablation which);
nlohmann::json cmd_janus(const ExperimentConfig& config);

}  // namespace isdlab
