#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pcnas/engine.hpp"
#include "pcnas/json_io.hpp"

namespace pcnas {

Json config_to_json(const SearchConfig& config);
/// Missing keys keep the value from `defaults`. Throws ConfigError.
SearchConfig config_from_json(const Json& j, SearchConfig defaults = {});

Json front_entry_to_json(const FrontEntry& entry);
FrontEntry front_entry_from_json(const Json& j);
Json result_to_json(const SearchResult& result);

/// Columns genome,miou_error,params,flops,rank,crowding; the genome column is
/// quoted because the canonical string contains commas.
void write_front_csv(std::ostream& out, const std::vector<FrontEntry>& front);
std::vector<FrontEntry> read_front_csv(std::istream& in);

/// Long-format plotting table: generation, genome, error in percent, params
/// in millions, FLOPs in billions.
void write_plot_csv(std::ostream& out, const Json& summary);

}  // namespace pcnas
