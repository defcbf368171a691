#include "pcnas/search_space.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pcnas/errors.hpp"

namespace pcnas {

namespace {

constexpr double kValueTolerance = 1e-9;

constexpr std::array<std::size_t, 4> kGroupSizes = {kFilterRatioSites, kStrideSites, kKSites,
                                                    kSubsamplingSites};
constexpr std::array<char, 4> kGroupTags = {'F', 'S', 'K', 'R'};

std::string gene_field(std::size_t gene_index) {
  const auto [group, site] = locate_gene(gene_index);
  return std::string(1, kGroupTags[static_cast<std::size_t>(group)]) + "[" +
         std::to_string(site) + "]";
}

std::string format_value(GeneGroup group, double value) {
  char buf[32];
  if (group == GeneGroup::FilterRatio) {
    std::snprintf(buf, sizeof buf, "%.1f", value);
  } else {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(value)));
  }
  return buf;
}

std::string describe_values(const GeneSpec& spec) {
  std::string out = "{";
  for (std::size_t i = 0; i < spec.allowed_values.size(); ++i) {
    if (i) out += ",";
    out += format_value(spec.group, spec.allowed_values[i]);
  }
  return out + "}";
}

void check_value_set(const std::vector<double>& values, GeneGroup group) {
  if (values.empty()) {
    throw ConfigError(std::string(to_string(group)) + ": allowed values must not be empty");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ConfigError(std::string(to_string(group)) + ": non-finite allowed value");
    }
    if (group != GeneGroup::FilterRatio && values[i] != std::round(values[i])) {
      throw ConfigError(std::string(to_string(group)) + ": allowed values must be integers");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw ConfigError(std::string(to_string(group)) +
                        ": allowed values must be strictly increasing");
    }
  }
}

}  // namespace

std::string_view to_string(GeneGroup group) noexcept {
  switch (group) {
    case GeneGroup::FilterRatio: return "filter_ratio";
    case GeneGroup::Stride: return "stride";
    case GeneGroup::K: return "k";
    case GeneGroup::Subsampling: return "subsampling";
  }
  return "?";
}

std::pair<GeneGroup, std::size_t> locate_gene(std::size_t gene_index) {
  std::size_t offset = 0;
  for (std::size_t group = 0; group < kGroupSizes.size(); ++group) {
    if (gene_index < offset + kGroupSizes[group]) {
      return {static_cast<GeneGroup>(group), gene_index - offset};
    }
    offset += kGroupSizes[group];
  }
  throw std::out_of_range("gene index " + std::to_string(gene_index));
}

double Genome::gene(std::size_t index) const {
  const auto [group, site] = locate_gene(index);
  switch (group) {
    case GeneGroup::FilterRatio: return filter_ratios[site];
    case GeneGroup::Stride: return strides[site];
    case GeneGroup::K: return k_values[site];
    case GeneGroup::Subsampling: return subsampling[site];
  }
  return 0.0;
}

void Genome::set_gene(std::size_t index, double value) {
  const auto [group, site] = locate_gene(index);
  switch (group) {
    case GeneGroup::FilterRatio: filter_ratios[site] = value; break;
    case GeneGroup::Stride: strides[site] = static_cast<int>(std::lround(value)); break;
    case GeneGroup::K: k_values[site] = static_cast<int>(std::lround(value)); break;
    case GeneGroup::Subsampling: subsampling[site] = static_cast<int>(std::lround(value)); break;
  }
}

SearchSpace::SearchSpace(std::vector<double> filter_ratios, std::vector<double> strides,
                         std::vector<double> k_values, std::vector<double> subsampling) {
  const std::array<std::vector<double>*, 4> sets = {&filter_ratios, &strides, &k_values,
                                                    &subsampling};
  genes_.reserve(kGeneCount);
  for (std::size_t group = 0; group < sets.size(); ++group) {
    const auto g = static_cast<GeneGroup>(group);
    check_value_set(*sets[group], g);
    for (std::size_t site = 0; site < kGroupSizes[group]; ++site) {
      genes_.push_back(GeneSpec{g, site, *sets[group]});
    }
  }
}

SearchSpace SearchSpace::standard() {
  return SearchSpace({0.4, 0.6, 0.8, 1.0}, {1, 2, 3, 4}, {16, 18, 20, 22}, {2, 4, 6, 8});
}

int SearchSpace::value_index(std::size_t index, double value) const noexcept {
  const auto& values = genes_[index].allowed_values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i] - value) <= kValueTolerance) return static_cast<int>(i);
  }
  return -1;
}

bool SearchSpace::contains(const Genome& g) const noexcept {
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (value_index(i, g.gene(i)) < 0) return false;
  }
  return true;
}

void SearchSpace::validate(const Genome& g) const {
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (value_index(i, g.gene(i)) < 0) {
      const auto& spec = genes_[i];
      throw ParseError(gene_field(i), "value " + format_value(spec.group, g.gene(i)) +
                                          " not in allowed " +
                                          std::string(to_string(spec.group)) + " values " +
                                          describe_values(spec));
    }
  }
}

std::string_view to_string(MaskMode mode) noexcept {
  switch (mode) {
    case MaskMode::Full: return "full";
    case MaskMode::SamplingOnly: return "sampling";
    case MaskMode::ArchitecturalOnly: return "architectural";
  }
  return "?";
}

MaskMode mask_mode_from_string(std::string_view text) {
  if (text == "full") return MaskMode::Full;
  if (text == "sampling" || text == "sampling_only") return MaskMode::SamplingOnly;
  if (text == "architectural" || text == "architectural_only") return MaskMode::ArchitecturalOnly;
  throw ConfigError("unknown mask mode '" + std::string(text) + "'");
}

StageMask StageMask::full() { return StageMask{MaskMode::Full, supernet_genome()}; }

bool StageMask::is_free(std::size_t gene_index) const noexcept {
  const bool architectural = gene_index < kFilterRatioSites;
  switch (mode) {
    case MaskMode::Full: return true;
    case MaskMode::SamplingOnly: return !architectural;
    case MaskMode::ArchitecturalOnly: return architectural;
  }
  return true;
}

Genome StageMask::apply(Genome g) const {
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (!is_free(i)) g.set_gene(i, base.gene(i));
  }
  return g;
}

std::uint64_t cardinality(const SearchSpace& space, const StageMask& mask) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (!mask.is_free(i)) continue;
    const std::uint64_t n = space.gene(i).allowed_values.size();
    if (total > std::numeric_limits<std::uint64_t>::max() / n) {
      throw std::overflow_error("search-space cardinality exceeds 64 bits");
    }
    total *= n;
  }
  return total;
}

Genome supernet_genome() {
  Genome g;
  g.filter_ratios.fill(1.0);
  g.strides.fill(1);
  g.k_values.fill(16);
  g.subsampling = {4, 4, 4, 4, 2};
  return g;
}

Genome random_genome(const SearchSpace& space, const StageMask& mask, Rng& rng) {
  Genome g = mask.base;
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (!mask.is_free(i)) continue;
    const auto& values = space.gene(i).allowed_values;
    g.set_gene(i, values[rng.uniform_index(values.size())]);
  }
  return g;
}

std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, const StageMask& mask,
                                    Rng& rng) {
  Genome first = mask.base;
  Genome second = mask.base;
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (!mask.is_free(i)) continue;
    const bool from_a = rng.coin();
    first.set_gene(i, from_a ? a.gene(i) : b.gene(i));
    second.set_gene(i, from_a ? b.gene(i) : a.gene(i));
  }
  return {first, second};
}

Genome mutate(const Genome& g, const SearchSpace& space, const StageMask& mask, Rng& rng,
              double per_gene_prob) {
  if (!(per_gene_prob >= 0.0 && per_gene_prob <= 1.0)) {
    throw ConfigError("mutation probability must lie in [0, 1]");
  }
  Genome out = mask.apply(g);
  for (std::size_t i = 0; i < kGeneCount; ++i) {
    if (!mask.is_free(i)) continue;
    const double u = rng.uniform01();
    if (!(u < per_gene_prob)) continue;
    const auto& values = space.gene(i).allowed_values;
    if (values.size() < 2) continue;
    const int current = space.value_index(i, out.gene(i));
    std::size_t pick = rng.uniform_index(values.size() - 1);
    if (current >= 0 && pick >= static_cast<std::size_t>(current)) ++pick;
    out.set_gene(i, values[pick]);
  }
  return out;
}

std::string encode(const Genome& g) {
  std::string out;
  out.reserve(128);
  std::size_t index = 0;
  for (std::size_t group = 0; group < kGroupSizes.size(); ++group) {
    if (group) out += '|';
    out += kGroupTags[group];
    out += ':';
    for (std::size_t site = 0; site < kGroupSizes[group]; ++site, ++index) {
      if (site) out += ',';
      out += format_value(static_cast<GeneGroup>(group), g.gene(index));
    }
  }
  return out;
}

Genome decode(std::string_view text, const SearchSpace& space) {
  Genome g;
  std::size_t index = 0;
  std::size_t pos = 0;
  for (std::size_t group = 0; group < kGroupSizes.size(); ++group) {
    const std::string section(1, kGroupTags[group]);
    if (group) {
      if (pos >= text.size() || text[pos] != '|') {
        throw ParseError(section, "expected '|' before section");
      }
      ++pos;
    }
    if (text.substr(pos, 2) != section + ":") {
      throw ParseError(section, "expected section prefix '" + section + ":'");
    }
    pos += 2;
    for (std::size_t site = 0; site < kGroupSizes[group]; ++site, ++index) {
      const std::string field = section + "[" + std::to_string(site) + "]";
      if (site) {
        if (pos >= text.size() || text[pos] != ',') {
          throw ParseError(field, "expected " + std::to_string(kGroupSizes[group]) +
                                      " comma-separated values");
        }
        ++pos;
      }
      double value = 0.0;
      const char* begin = text.data() + pos;
      const char* end = text.data() + text.size();
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr == begin) throw ParseError(field, "not a number");
      pos += static_cast<std::size_t>(ptr - begin);
      const auto& spec = space.gene(index);
      const int found = space.value_index(index, value);
      if (found < 0) {
        throw ParseError(field, "value " + std::string(begin, ptr) + " not in allowed " +
                                    std::string(to_string(spec.group)) + " values " +
                                    describe_values(spec));
      }
      g.set_gene(index, spec.allowed_values[static_cast<std::size_t>(found)]);
    }
  }
  if (pos != text.size()) throw ParseError("R", "trailing characters after genome");
  return g;
}

}  // namespace pcnas
