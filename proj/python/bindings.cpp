#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcnas/cost_model.hpp"
#include "pcnas/engine.hpp"
#include "pcnas/evaluation.hpp"
#include "pcnas/json_io.hpp"
#include "pcnas/nsga2.hpp"
#include "pcnas/report.hpp"
#include "pcnas/search_space.hpp"

namespace py = pybind11;
using namespace pcnas;

namespace {

// Genomes cross the boundary as canonical strings; structured data as JSON text.

Genome parse_genome(const std::string& text) {
  if (!text.empty() && text.front() == '{') return genome_from_json(Json::parse(text));
  return decode(text);
}

SupernetDescription parse_supernet(const std::string& text) {
  return text.empty() ? reference_supernet() : supernet_from_json(Json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  // Translators run newest first, so the base class is registered first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<EvaluationError>(m, "EvaluationError", base.ptr());

  m.def("supernet_genome", [] { return encode(supernet_genome()); });
  m.def("normalize_genome", [](const std::string& g) { return encode(parse_genome(g)); });
  m.def("genome_json", [](const std::string& g) { return genome_to_json(parse_genome(g)).dump(); });
  m.def("cardinality", [](const std::string& mode) {
    return cardinality(SearchSpace::standard(),
                       StageMask{mask_mode_from_string(mode), supernet_genome()});
  });
  m.def("reference_supernet_json", [] { return supernet_to_json(reference_supernet()).dump(); });
  m.def(
      "compute_costs",
      [](const std::string& g, const std::string& supernet) {
        const auto r = compute_costs(parse_genome(g), parse_supernet(supernet));
        return py::make_tuple(r.params, r.flops);
      },
      py::arg("genome"), py::arg("supernet_json") = "");
  m.def("surrogate_error", [](const std::string& g) { return surrogate_error(parse_genome(g)); });
  m.def(
      "surrogate_batch_accuracies",
      [](const std::string& g, std::uint64_t seed, std::size_t begin, std::size_t end) {
        return surrogate_batch_accuracies(parse_genome(g), seed, begin, end);
      },
      py::arg("genome"), py::arg("run_seed"), py::arg("batch_begin"), py::arg("batch_end"));
  m.def(
      "evaluate",
      [](const std::string& g, std::uint64_t seed, const std::string& policy) {
        const auto p = policy.empty() ? EarlyStopPolicy{} : policy_from_json(Json::parse(policy));
        p.validate();
        SurrogateEvaluator ev(seed, p.total_batches);
        return outcome_to_json(evaluate_with_early_stopping(ev, parse_genome(g), p)).dump();
      },
      py::arg("genome"), py::arg("run_seed") = 0, py::arg("policy_json") = "");
  m.def(
      "non_dominated_sort",
      [](const std::vector<std::vector<double>>& points) {
        std::vector<ObjectiveVector> vs;
        for (const auto& p : points) {
          ObjectiveVector v;
          v.values = p;
          v.labels.assign(p.size(), Objective::MiouError);
          vs.push_back(std::move(v));
        }
        return fast_non_dominated_sort(vs);
      },
      py::arg("points"));
  m.def(
      "hypervolume",
      [](const std::vector<std::vector<double>>& points, const std::vector<double>& reference) {
        return hypervolume(points, reference);
      },
      py::arg("points"), py::arg("reference"));
  m.def(
      "run_search",
      [](const std::string& config, const std::string& supernet) {
        const auto cfg = config_from_json(Json::parse(config));
        const auto desc = parse_supernet(supernet);
        const auto space = SearchSpace::standard();
        SearchResult r;
        {
          py::gil_scoped_release release;
          r = run_single_stage(cfg, SearchContext{space, desc});
        }
        return result_to_json(r).dump();
      },
      py::arg("config_json"), py::arg("supernet_json") = "");
}
