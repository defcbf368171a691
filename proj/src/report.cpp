#include "pcnas/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pcnas {

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument(text);
  return v;
}

Json crowding_json(double v) { return std::isinf(v) ? Json("inf") : Json(v); }

}  // namespace

Json config_to_json(const SearchConfig& c) {
  Json objectives = Json::array();
  for (auto o : c.objectives) objectives.push_back(std::string(to_string(o)));
  Json evaluator{{"kind", c.evaluator.kind == EvaluatorSpec::Kind::External ? "external"
                                                                             : "builtin"},
                 {"timeout_ms", c.evaluator.timeout.count()}};
  if (c.evaluator.kind == EvaluatorSpec::Kind::External) evaluator["command"] = c.evaluator.command;
  return Json{{"population_size", c.population_size},
              {"max_generations", c.max_generations},
              {"objectives", std::move(objectives)},
              {"mask", std::string(to_string(c.mask_mode))},
              {"mask_base", encode(c.mask_base)},
              {"run_seed", c.run_seed},
              {"mutation_prob", c.mutation_prob},
              {"hd_epsilon", c.hd_epsilon},
              {"hd_window", c.hd_window},
              {"early_stop", policy_to_json(c.early_stop)},
              {"evaluator", std::move(evaluator)},
              {"jobs", c.jobs}};
}

SearchConfig config_from_json(const Json& j, SearchConfig c) {
  if (!j.is_object()) throw ConfigError("search configuration must be a JSON object");
  static const std::vector<std::string> known = {
      "population_size", "max_generations", "objectives", "mask",   "mask_base", "run_seed",
      "mutation_prob",   "hd_epsilon",      "hd_window",  "early_stop", "evaluator", "jobs"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  try {
    c.population_size = j.value("population_size", c.population_size);
    c.max_generations = j.value("max_generations", c.max_generations);
    if (j.contains("objectives")) {
      c.objectives.clear();
      for (const auto& o : j.at("objectives")) {
        c.objectives.push_back(objective_from_string(o.get<std::string>()));
      }
    }
    if (j.contains("mask")) c.mask_mode = mask_mode_from_string(j.at("mask").get<std::string>());
    if (j.contains("mask_base")) c.mask_base = genome_from_json(j.at("mask_base"));
    c.run_seed = j.value("run_seed", c.run_seed);
    c.mutation_prob = j.value("mutation_prob", c.mutation_prob);
    c.hd_epsilon = j.value("hd_epsilon", c.hd_epsilon);
    c.hd_window = j.value("hd_window", c.hd_window);
    if (j.contains("early_stop")) c.early_stop = policy_from_json(j.at("early_stop"), c.early_stop);
    if (j.contains("evaluator")) {
      const auto& e = j.at("evaluator");
      const auto kind = e.value("kind", std::string("builtin"));
      if (kind == "builtin") {
        c.evaluator.kind = EvaluatorSpec::Kind::Builtin;
      } else if (kind == "external") {
        c.evaluator.kind = EvaluatorSpec::Kind::External;
        c.evaluator.command = e.value("command", std::string{});
      } else {
        throw ConfigError("unknown evaluator kind '" + kind + "'");
      }
      c.evaluator.timeout =
          std::chrono::milliseconds(e.value("timeout_ms", c.evaluator.timeout.count()));
    }
    c.jobs = j.value("jobs", c.jobs);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("bad mask_base: ") + e.what());
  }
  c.validate();
  return c;
}

Json front_entry_to_json(const FrontEntry& e) {
  return Json{{"genome", encode(e.genome)},     {"miou_error", e.miou_error},
              {"params", e.params},             {"flops", e.flops},
              {"early_stopped", e.early_stopped}, {"rank", e.rank},
              {"crowding", crowding_json(e.crowding)}};
}

FrontEntry front_entry_from_json(const Json& j) {
  FrontEntry e;
  e.genome = genome_from_json(j.at("genome"));
  e.miou_error = j.at("miou_error").get<double>();
  e.params = j.at("params").get<std::uint64_t>();
  e.flops = j.at("flops").get<std::uint64_t>();
  e.early_stopped = j.value("early_stopped", false);
  e.rank = j.value("rank", std::size_t{0});
  const auto& c = j.at("crowding");
  e.crowding = c.is_string() ? parse_double(c.get<std::string>()) : c.get<double>();
  return e;
}

Json result_to_json(const SearchResult& r) {
  auto front_json = [](const std::vector<FrontEntry>& front) {
    Json arr = Json::array();
    for (const auto& e : front) arr.push_back(front_entry_to_json(e));
    return arr;
  };
  Json history = Json::array();
  for (const auto& rec : r.history) {
    history.push_back(Json{{"generation", rec.generation},
                           {"hypervolume", rec.hypervolume},
                           {"hd_vs_previous", rec.hd_vs_previous
                                                  ? crowding_json(*rec.hd_vs_previous)
                                                  : Json(nullptr)},
                           {"evaluations_performed", rec.evaluations_performed},
                           {"early_stops", rec.early_stops},
                           {"front", front_json(rec.front)}});
  }
  Json hd = Json::array();
  for (double v : r.hd_series()) hd.push_back(crowding_json(v));
  return Json{{"config", config_to_json(r.config)},
              {"generations_run", r.history.size()},
              {"total_evaluations", r.total_evaluations},
              {"cache_hits", r.cache_hits},
              {"evaluator_faults", r.evaluator_faults},
              {"early_stops", r.early_stops},
              {"stopped_early_by_hd", r.stopped_early_by_hd},
              {"hd_series", std::move(hd)},
              {"final_front", front_json(r.final_front)},
              {"history", std::move(history)}};
}

void write_front_csv(std::ostream& out, const std::vector<FrontEntry>& front) {
  out << "genome,miou_error,params,flops,rank,crowding\n";
  for (const auto& e : front) {
    out << '"' << encode(e.genome) << "\"," << format_double(e.miou_error) << ',' << e.params
        << ',' << e.flops << ',' << e.rank << ',' << format_double(e.crowding) << '\n';
  }
}

std::vector<FrontEntry> read_front_csv(std::istream& in) {
  std::vector<FrontEntry> out;
  std::string line;
  if (!std::getline(in, line) || line != "genome,miou_error,params,flops,rank,crowding") {
    throw Error("front CSV: unexpected header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "front CSV line " + std::to_string(line_no);
    if (line.front() != '"') throw Error(where + ": genome column must be quoted");
    const auto close = line.find('"', 1);
    if (close == std::string::npos || close + 1 >= line.size() || line[close + 1] != ',') {
      throw Error(where + ": unterminated genome column");
    }
    FrontEntry e;
    e.genome = decode(line.substr(1, close - 1));
    std::vector<std::string> cells;
    std::stringstream rest(line.substr(close + 2));
    std::string cell;
    while (std::getline(rest, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw Error(where + ": expected 6 columns");
    try {
      e.miou_error = parse_double(cells[0]);
      e.params = std::stoull(cells[1]);
      e.flops = std::stoull(cells[2]);
      e.rank = std::stoull(cells[3]);
      e.crowding = parse_double(cells[4]);
    } catch (const std::exception&) {
      throw Error(where + ": malformed number");
    }
    out.push_back(e);
  }
  return out;
}

void write_plot_csv(std::ostream& out, const Json& summary) {
  out << "generation,genome,miou_error_pct,params_m,flops_g\n";
  char buf[160];
  for (const auto& rec : summary.at("history")) {
    const auto gen = rec.at("generation").get<std::size_t>();
    for (const auto& e : rec.at("front")) {
      std::snprintf(buf, sizeof buf, "%zu,\"%s\",%.4f,%.6f,%.6f\n", gen,
                    e.at("genome").get<std::string>().c_str(),
                    100.0 * e.at("miou_error").get<double>(),
                    static_cast<double>(e.at("params").get<std::uint64_t>()) / 1e6,
                    static_cast<double>(e.at("flops").get<std::uint64_t>()) / 1e9);
      out << buf;
    }
  }
}

}  // namespace pcnas
