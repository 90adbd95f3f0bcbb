#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rlrelax/commands.hpp"
#include "rlrelax/graph.hpp"

namespace py = pybind11;
using namespace rlrelax;

namespace {

Configuration make_config(const Matrix& positions, const std::vector<int>& species, double side) {
  return Configuration(positions, species, SimulationBox::cubic(side, static_cast<int>(positions.cols())));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Energy models, minimizers and the relaxation policy.";

  py::register_exception<NumericalError>(m, "NumericalError");
  py::register_exception<InputError>(m, "InputError");

  py::class_<Configuration>(m, "Configuration")
      .def(py::init(&make_config), py::arg("positions"), py::arg("species"), py::arg("side"))
      .def_readwrite("positions", &Configuration::positions)
      .def_readwrite("species", &Configuration::species)
      .def_property_readonly("box_lengths", [](const Configuration& c) { return c.box.lengths(); })
      .def("__len__", &Configuration::size);

  m.def("wrap", &wrap);
  m.def("read_config", [](const std::string& path, const std::vector<std::string>& names) {
    return read_config(path, names);
  });

  py::class_<PotentialModel>(m, "PotentialModel")
      .def_property_readonly("system", &PotentialModel::system_tag)
      .def_property_readonly("species", &PotentialModel::species_names)
      .def_property_readonly("cutoff", &PotentialModel::cutoff)
      .def("energy", &PotentialModel::total_energy)
      .def("forces", &PotentialModel::forces)
      .def("per_atom_energies",
           [](const PotentialModel& p, const Configuration& c) { return p.evaluate(c, false).per_atom; })
      .def("equilibrium_length", &PotentialModel::equilibrium_length);
  m.def("make_model", py::overload_cast<const std::string&>(&make_model), py::arg("system"));

  m.def(
      "minimize",
      [](const Configuration& c, const PotentialModel& model, const std::string& method, int steps) {
        const MinimizeResult r =
            minimize(c, model, parse_method(method), steps, MinimizerSettings::for_system(model.system_tag()));
        return py::make_tuple(r.config, r.energies);
      },
      py::arg("config"), py::arg("model"), py::arg("method") = "fire", py::arg("steps") = 1000,
      "Returns (final configuration, energy trace) with the per-system step sizes.");

  m.def(
      "random_pack",
      [](int n, double side, const std::map<int, double>& mix, double min_dist, std::uint64_t seed) {
        RngStream rng(seed);
        return random_pack(n, SimulationBox::cubic(side), mix, min_dist, rng);
      },
      py::arg("n"), py::arg("side"), py::arg("species_mix"), py::arg("min_dist"), py::arg("seed") = 0);

  m.def("discounted_returns", &discounted_returns, py::arg("rewards"), py::arg("gamma"));

  m.def(
      "node_features",
      [](const Configuration& c, const PotentialModel& model) { return make_graph_state(c, model).node_features; });

  py::class_<PolicyParameters>(m, "Policy")
      .def_static("load", [](const std::string& path) { return PolicyParameters::load(path); })
      .def("save", [](const PolicyParameters& p, const std::string& path) { p.save(path); })
      .def("parameter_count", &PolicyParameters::parameter_count)
      .def("predict", [](PolicyParameters& p, const Configuration& c, const PotentialModel& model) {
        return predict(p, make_graph_state(c, model), ad::Mode::Eval);
      });
  m.def(
      "init_policy",
      [](const PotentialModel& model, int width, std::uint64_t seed) {
        ExperimentConfig cfg = defaults_for(model.system_tag());
        cfg.policy.width = width;
        RngStream rng(seed);
        return init_params(policy_config_for(cfg, model), rng);
      },
      py::arg("model"), py::arg("width") = 48, py::arg("seed") = 0);

  m.def(
      "run",
      [](const std::string& command, const std::map<std::string, std::string>& overrides,
         const std::string& out) { return run_command(command, parse_experiment("", overrides), out); },
      py::arg("command"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("out") = "out",
      "Runs a CLI subcommand in-process and returns its exit code.");
}
