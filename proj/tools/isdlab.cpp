// isdlab: run, variance, ablate and janus experiments from a JSON config.
#include <charconv>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isdlab/commands.hpp"

#ifndef ISDLAB_PRESET_DIR
#define ISDLAB_PRESET_DIR "configs/presets"
#endif

namespace fs = std::filesystem;
using namespace isdlab;

namespace {

std::uint64_t parse_seed(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("--seeds", "bad seed '" + s + "'");
  return v;
}

// "3", "0,4,7" or "0-49" (inclusive), mixed freely.
std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_seed(item));
      continue;
    }
    const auto lo = parse_seed(item.substr(0, dash));
    const auto hi = parse_seed(item.substr(dash + 1));
    if (hi < lo) throw ConfigError("--seeds", "empty range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("--seeds", "expected at least one seed");
  return out;
}

fs::path preset_path(const std::string& name) {
  fs::path p = fs::path(ISDLAB_PRESET_DIR) / (name + ".json");
  if (!fs::exists(p)) throw ConfigError("--preset", "no preset named '" + name + "' in " ISDLAB_PRESET_DIR);
  return p;
}

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::string seeds;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--preset", c.preset, "named preset from " ISDLAB_PRESET_DIR);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--seeds", c.seeds, "seed list, e.g. 0,3,7 or 0-49");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  if (c.config.empty() == c.preset.empty()) throw ConfigError("$", "give exactly one of --config or --preset");
  auto config = load_config(c.config.empty() ? preset_path(c.preset) : fs::path(c.config));
  Overrides o;
  if (!c.out.empty()) o.out = c.out;
  if (!c.seeds.empty()) o.seeds = parse_seeds(c.seeds);
  if (c.threads) o.threads = c.threads;
  apply_overrides(config, o);
  return config;
}

void report(const std::string& line) { std::cout << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-distillation estimator lab"};
  app.require_subcommand(1);

  Common run_opts, var_opts, abl_opts, janus_opts;
  std::string which;
  auto* run = app.add_subcommand("run", "optimize per seed; write trace, final theta and summary");
  add_common(run, run_opts);
  auto* variance = app.add_subcommand("variance", "paired gradient-variance comparison over benchmarks");
  add_common(variance, var_opts);
  auto* ablate = app.add_subcommand("ablate", "ip-scale or control-variate sweep");
  add_common(ablate, abl_opts);
  ablate->add_option("which", which, "ip-scale | control-variate")->required();
  auto* janus = app.add_subcommand("janus", "paired ISD vs COMBINED multi-view runs");
  add_common(janus, janus_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = load(run_opts);
      const auto summary = cmd_run(config);
      for (const auto& e : summary["estimators"])
        report(e["label"].get<std::string>() + ": median mode distance " + e["median_mode_distance"].dump() +
               ", median switches " + e["median_switches"].dump() + ", aborted " + e["aborted"].dump());
      return summary["aborted"].get<bool>() ? 1 : 0;
    }
    if (*variance) {
      const auto config = load(var_opts);
      const auto summary = cmd_variance(config);
      for (const auto& s : summary["seeds"]) {
        std::string line = "seed " + s["seed"].dump() + ": " + std::to_string(s["benchmarks"].size()) + " benchmarks";
        if (s.contains("isd_le_ip_sds"))
          line += ", ISD<=IP-SDS " + s["isd_le_ip_sds"]["holds"].dump() + "/" + s["isd_le_ip_sds"]["of"].dump();
        if (s.contains("sds_le_sds_nocv"))
          line += ", SDS<=SDS_NOCV " + s["sds_le_sds_nocv"]["holds"].dump() + "/" + s["sds_le_sds_nocv"]["of"].dump();
        report(line);
      }
      return 0;
    }
    if (*ablate) {
      const auto kind = parse_ablation(which);
      const auto config = load(abl_opts);
      const auto summary = cmd_ablate(config, kind);
      for (const auto& r : summary["rows"])
        report(r["setting"].get<std::string>() + ": mean mode distance " + r["mean_mode_distance"].dump() +
               ", mean grad norm " + r["mean_grad_norm"].dump());
      return 0;
    }
    if (*janus) {
      const auto config = load(janus_opts);
      const auto summary = cmd_janus(config);
      report("COMBINED lower in " + summary["combined_lower"].dump() + "/" + summary["pairs"].dump() +
             " pairs (need " + summary["min_wins"].dump() + "); mean error ISD " + summary["isd_mean_error"].dump() +
             ", COMBINED " + summary["combined_mean_error"].dump());
      return summary["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
