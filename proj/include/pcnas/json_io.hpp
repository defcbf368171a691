#pragma once

#include <string>

#include "json.hpp"
#include "pcnas/cost_model.hpp"
#include "pcnas/evaluation.hpp"
#include "pcnas/search_space.hpp"

namespace pcnas {

using Json = nlohmann::json;

/// {"filter_ratios":[13],"strides":[6],"k":[5],"subsampling":[5]}
Json genome_to_json(const Genome& g);
/// Accepts the object form or a canonical genome string. Throws ParseError.
Genome genome_from_json(const Json& j, const SearchSpace& space = SearchSpace::standard());

Json cost_report_to_json(const CostReport& report);

Json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const Json& j);
Json supernet_to_json(const SupernetDescription& desc);
/// Throws StructuralError on schema violations or an inconsistent layer graph.
SupernetDescription supernet_from_json(const Json& j);

Json outcome_to_json(const EvaluationOutcome& outcome);
Json policy_to_json(const EarlyStopPolicy& policy);
EarlyStopPolicy policy_from_json(const Json& j, EarlyStopPolicy defaults = {});

/// Reads and parses a JSON file; throws ConfigError if it cannot.
Json read_json_file(const std::string& path);

}  // namespace pcnas
