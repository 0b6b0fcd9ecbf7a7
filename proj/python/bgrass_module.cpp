#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bgrass/pg.hpp"
#include "bgrass/pipeline.hpp"
#include "bgrass/random.hpp"

namespace py = pybind11;

namespace {

bgrass::Epsilon to_epsilon(const py::object& value) {
  if (py::isinstance<py::str>(value)) return bgrass::Epsilon::parse(value.cast<std::string>());
  const double v = value.cast<double>();
  if (std::isinf(v)) return bgrass::Epsilon::infinite();
  return bgrass::Epsilon::finite(v);
}

py::dict summary_to_dict(const bgrass::PosteriorSummary& s) {
  py::list aes;
  for (std::size_t j = 0; j < s.aes.size(); ++j) {
    const auto& a = s.aes[j];
    py::dict d;
    d["term"] = a.term;
    d["mean"] = a.mean;
    d["median"] = a.median;
    d["ci_low"] = a.ci_low;
    d["ci_high"] = a.ci_high;
    d["selection_prob"] = a.selection_prob;
    d["prob_positive"] = a.prob_positive;
    d["nc_prob"] = a.nc_prob ? py::object(py::float_(*a.nc_prob)) : py::object(py::none());
    d["fdr_signal"] = a.fdr_signal;
    d["nc_signal"] = a.nc_signal;
    d["rhat"] = j < s.diagnostics.rhat.size() ? s.diagnostics.rhat[j] : 1.0;
    aes.append(d);
  }
  py::list groups;
  for (const auto& g : s.groups) {
    py::dict d;
    d["group"] = g.group;
    d["size"] = g.size;
    d["probability"] = g.probability;
    d["flagged"] = g.flagged;
    groups.append(d);
  }
  py::dict out;
  out["aes"] = aes;
  out["groups"] = groups;
  out["max_rhat"] = s.diagnostics.max_rhat;
  return out;
}

}  // namespace

PYBIND11_MODULE(_bgrass, m) {
  m.doc() = "Graph-regularized spike-and-slab logistic regression for AE signal detection";

  py::register_exception<bgrass::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "sample_pg",
      [](int b, double c, int n, std::uint64_t seed) {
        bgrass::Rng rng(seed);
        py::array_t<double> out(n);
        auto buf = out.mutable_unchecked<1>();
        for (int i = 0; i < n; ++i) buf(i) = bgrass::pg::sample_pg(b, c, rng);
        return out;
      },
      py::arg("b"), py::arg("c"), py::arg("n"), py::arg("seed") = 1, "Draw n values from PG(b, c).");
  m.def("pg_mean", &bgrass::pg::mean, py::arg("b"), py::arg("c"));
  m.def("pg_variance", &bgrass::pg::variance, py::arg("b"), py::arg("c"));

  m.def(
      "correlation",
      [](int num_vertices, const std::map<std::string, std::vector<int>>& groups, const py::object& epsilon) {
        const auto graph = bgrass::graph_from_groups(num_vertices, groups);
        return Eigen::MatrixXd(bgrass::correlation_from_graph(graph, to_epsilon(epsilon)).omega);
      },
      py::arg("num_vertices"), py::arg("groups"), py::arg("epsilon"),
      "Correlation matrix Omega_eps for a graph given as {group: [vertex, ...]}.");
  m.def(
      "laplacian",
      [](int num_vertices, const std::map<std::string, std::vector<int>>& groups) {
        return bgrass::laplacian(bgrass::graph_from_groups(num_vertices, groups));
      },
      py::arg("num_vertices"), py::arg("groups"));

  m.def(
      "fit",
      [](const std::string& config_path, const std::optional<std::string>& out_dir, bool allow_nonconverged) {
        auto config = bgrass::load_config(config_path);
        if (out_dir) config.output_dir = *out_dir;
        bgrass::FitOptions options;
        options.allow_nonconverged = allow_nonconverged;
        bgrass::FitResult result;
        {
          py::gil_scoped_release release;
          result = bgrass::cmd_fit(config, options);
        }
        py::dict d = summary_to_dict(result.summary);
        d["run_dir"] = result.run_dir;
        d["model"] = result.model;
        d["epsilon"] = result.epsilon.to_string();
        d["converged"] = result.converged;
        d["exit_code"] = result.exit_code;
        d["warnings"] = result.warnings;
        return d;
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("allow_nonconverged") = false,
      "Run a fit from a JSON config file and return the posterior summary.");

  m.def(
      "validate",
      [](const std::string& config_path) {
        const auto r = bgrass::cmd_validate(bgrass::load_config(config_path));
        py::dict d;
        d["reports_parsed"] = r.reports_parsed;
        d["malformed_rows"] = r.malformed_rows;
        d["num_aes"] = r.num_aes;
        d["num_strata"] = r.num_strata;
        d["num_predictors"] = r.num_predictors;
        d["num_edges"] = r.num_edges;
        d["num_groups"] = r.num_groups;
        d["isolated_aes"] = r.isolated_aes;
        py::dict cond;
        for (const auto& [e, c] : r.conditioning) cond[py::str(e.to_string())] = c;
        d["conditioning"] = cond;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("config"));

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) { return bgrass::auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
}
