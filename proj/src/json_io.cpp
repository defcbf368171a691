#include "pcnas/json_io.hpp"

#include <fstream>

#include "pcnas/errors.hpp"

namespace pcnas {

namespace {

template <std::size_t N, typename T>
void read_array(const Json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) throw ParseError(key, "missing field");
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    throw ParseError(key, "expected an array of " + std::to_string(N) + " numbers");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (!arr[i].is_number()) {
      throw ParseError(std::string(key) + "[" + std::to_string(i) + "]", "not a number");
    }
    const double v = arr[i].get<double>();
    if constexpr (std::is_integral_v<T>) {
      if (v != std::round(v)) {
        throw ParseError(std::string(key) + "[" + std::to_string(i) + "]", "not an integer");
      }
      out[i] = static_cast<T>(v);
    } else {
      out[i] = v;
    }
  }
}

std::optional<std::size_t> optional_site(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer()) {
    throw StructuralError(std::string(key) + " must be an integer or null");
  }
  const auto v = j.at(key).get<long long>();
  if (v < 0) throw StructuralError(std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

Json site_json(const std::optional<std::size_t>& site) {
  return site ? Json(*site) : Json(nullptr);
}

}  // namespace

Json genome_to_json(const Genome& g) {
  Json j;
  j["filter_ratios"] = g.filter_ratios;
  j["strides"] = g.strides;
  j["k"] = g.k_values;
  j["subsampling"] = g.subsampling;
  return j;
}

Genome genome_from_json(const Json& j, const SearchSpace& space) {
  if (j.is_string()) return decode(j.get<std::string>(), space);
  if (!j.is_object()) throw ParseError("genome", "expected an object or canonical string");
  Genome g;
  read_array(j, "filter_ratios", g.filter_ratios);
  read_array(j, "strides", g.strides);
  read_array(j, "k", g.k_values);
  read_array(j, "subsampling", g.subsampling);
  space.validate(g);
  // Snap ratios to the exact allowed values.
  for (std::size_t i = 0; i < kFilterRatioSites; ++i) {
    g.filter_ratios[i] =
        space.gene(i).allowed_values[static_cast<std::size_t>(space.value_index(i, g.gene(i)))];
  }
  return g;
}

Json cost_report_to_json(const CostReport& report) {
  return Json{{"params", report.params}, {"flops", report.flops}};
}

Json layer_to_json(const LayerSpec& layer) {
  Json j;
  if (!layer.name.empty()) j["name"] = layer.name;
  j["role"] = std::string(to_string(layer.role));
  j["c_in"] = layer.c_in;
  j["c_out"] = layer.c_out;
  j["filter_ratio_site"] = site_json(layer.filter_ratio_site);
  j["stride_site"] = site_json(layer.stride_site);
  j["k_site"] = site_json(layer.k_site);
  j["stage"] = layer.stage;
  if (layer.inputs) j["inputs"] = *layer.inputs;
  if (layer.extra_in) j["extra_in"] = layer.extra_in;
  return j;
}

LayerSpec layer_from_json(const Json& j) {
  if (!j.is_object()) throw StructuralError("layer entry must be an object");
  try {
    LayerSpec layer;
    layer.name = j.value("name", std::string{});
    layer.role = layer_role_from_string(j.at("role").get<std::string>());
    layer.c_in = j.at("c_in").get<std::int64_t>();
    layer.c_out = j.at("c_out").get<std::int64_t>();
    layer.filter_ratio_site = optional_site(j, "filter_ratio_site");
    layer.stride_site = optional_site(j, "stride_site");
    layer.k_site = optional_site(j, "k_site");
    layer.stage = j.value("stage", std::size_t{0});
    if (j.contains("inputs") && !j.at("inputs").is_null()) {
      layer.inputs = j.at("inputs").get<std::vector<std::size_t>>();
    }
    layer.extra_in = j.value("extra_in", std::int64_t{0});
    return layer;
  } catch (const Json::exception& e) {
    throw StructuralError(std::string("bad layer entry: ") + e.what());
  }
}

Json supernet_to_json(const SupernetDescription& desc) {
  Json layers = Json::array();
  for (const auto& layer : desc.layers) layers.push_back(layer_to_json(layer));
  return Json{{"input_points", desc.input_points},
              {"encoder_stage_count", desc.encoder_stage_count},
              {"layers", std::move(layers)}};
}

SupernetDescription supernet_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("layers") || !j.at("layers").is_array()) {
    throw StructuralError("supernet description needs a 'layers' array");
  }
  SupernetDescription desc;
  try {
    desc.input_points = j.at("input_points").get<std::int64_t>();
    desc.encoder_stage_count = j.value("encoder_stage_count", kSubsamplingSites);
  } catch (const Json::exception& e) {
    throw StructuralError(std::string("bad supernet header: ") + e.what());
  }
  for (const auto& layer : j.at("layers")) desc.layers.push_back(layer_from_json(layer));
  validate_structure(desc);
  return desc;
}

Json outcome_to_json(const EvaluationOutcome& outcome) {
  return Json{{"miou", outcome.miou},
              {"miou_error", outcome.miou_error},
              {"batches_used", outcome.batches_used},
              {"early_stopped", outcome.early_stopped}};
}

Json policy_to_json(const EarlyStopPolicy& policy) {
  return Json{{"check_fraction", policy.check_fraction},
              {"accuracy_threshold", policy.accuracy_threshold},
              {"total_batches", policy.total_batches}};
}

EarlyStopPolicy policy_from_json(const Json& j, EarlyStopPolicy p) {
  if (!j.is_object()) throw ConfigError("early_stop must be an object");
  try {
    p.check_fraction = j.value("check_fraction", p.check_fraction);
    p.accuracy_threshold = j.value("accuracy_threshold", p.accuracy_threshold);
    p.total_batches = j.value("total_batches", p.total_batches);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad early_stop block: ") + e.what());
  }
  p.validate();
  return p;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace pcnas
