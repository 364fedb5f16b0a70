#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isdlab/commands.hpp"

namespace py = pybind11;
using namespace isdlab;

namespace {

ExperimentConfig load(const std::string& path, std::optional<std::string> out,
                      std::optional<std::vector<std::uint64_t>> seeds, std::optional<unsigned> threads) {
  auto config = load_config(path);
  apply_overrides(config, {std::move(out), std::move(seeds), threads});
  return config;
}

std::vector<Component> components_from(const std::vector<std::tuple<double, Vec, double>>& raw) {
  std::vector<Component> out;
  for (const auto& [w, m, v] : raw) out.push_back({w, m, v});
  return out;
}

}  // namespace

PYBIND11_MODULE(_isdlab, m) {
  m.doc() = "Score-distillation estimator lab";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def("alpha", &NoiseSchedule::alpha, py::arg("t"))
      .def("sigma", &NoiseSchedule::sigma, py::arg("t"))
      .def("weight", &NoiseSchedule::weight, py::arg("t"));

  m.def(
      "build_schedule",
      [](const std::string& kind, int steps, const std::string& weight) {
        return build_schedule(parse_schedule_kind(kind), steps, parse_weight_kind(weight));
      },
      py::arg("kind") = "cosine", py::arg("steps") = 1000, py::arg("weight") = "sigma2");

  py::class_<MixturePrior>(m, "MixturePrior")
      .def(py::init([](std::string name, const std::vector<std::tuple<double, Vec, double>>& comps) {
             return MixturePrior(std::move(name), components_from(comps));
           }),
           py::arg("name"), py::arg("components"),
           "components: list of (weight, mean, variance); weights must sum to 1")
      .def_property_readonly("name", &MixturePrior::name)
      .def_property_readonly("dim", &MixturePrior::dim)
      .def("log_density", &MixturePrior::log_density, py::arg("x"))
      .def("responsibilities", &MixturePrior::responsibilities, py::arg("x"))
      .def("score", py::overload_cast<const Vec&>(&MixturePrior::score, py::const_), py::arg("x"));

  m.def("marginal_at", &marginal_at, py::arg("prior"), py::arg("t"), py::arg("schedule"));
  m.def("score", py::overload_cast<const MixturePrior&, const Vec&, int, const NoiseSchedule&>(&score),
        py::arg("prior"), py::arg("x_t"), py::arg("t"), py::arg("schedule"));
  m.def("eps_predict", &eps_predict, py::arg("prior"), py::arg("x_t"), py::arg("t"), py::arg("schedule"));
  m.def("schedule_alpha_beta",
        [](int iter, int total) { return schedule_alpha_beta(iter, total, CombineSchedule{}); },
        py::arg("iter"), py::arg("total"));

  // Commands return the summary they wrote, as a JSON string.
  auto command = [&m](const char* name, auto fn) {
    m.def(
        name,
        [fn](const std::string& config, std::optional<std::string> out,
             std::optional<std::vector<std::uint64_t>> seeds, std::optional<unsigned> threads) {
          const auto c = load(config, std::move(out), std::move(seeds), threads);
          py::gil_scoped_release release;
          return fn(c).dump();
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("seeds") = py::none(),
        py::arg("threads") = py::none());
  };
  command("_run", [](const ExperimentConfig& c) { return cmd_run(c); });
  command("_variance", [](const ExperimentConfig& c) { return cmd_variance(c); });
  command("_janus", [](const ExperimentConfig& c) { return cmd_janus(c); });
  m.def(
      "_ablate",
      [](const std::string& config, const std::string& which, std::optional<std::string> out,
         std::optional<std::vector<std::uint64_t>> seeds, std::optional<unsigned> threads) {
        const auto c = load(config, std::move(out), std::move(seeds), threads);
        const auto a = parse_ablation(which);
        py::gil_scoped_release release;
        return cmd_ablate(c, a).dump();
      },
      py::arg("config"), py::arg("which"), py::arg("out") = py::none(), py::arg("seeds") = py::none(),
      py::arg("threads") = py::none());
}
