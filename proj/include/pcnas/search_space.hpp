#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pcnas/rng.hpp"

namespace pcnas {

inline constexpr std::size_t kFilterRatioSites = 13;
inline constexpr std::size_t kStrideSites = 6;
inline constexpr std::size_t kKSites = 5;
inline constexpr std::size_t kSubsamplingSites = 5;
inline constexpr std::size_t kGeneCount =
    kFilterRatioSites + kStrideSites + kKSites + kSubsamplingSites;

enum class GeneGroup { FilterRatio, Stride, K, Subsampling };

std::string_view to_string(GeneGroup group) noexcept;

/// Group and in-group site of a flat gene index in canonical order
/// (F x13, S x6, K x5, R x5).
std::pair<GeneGroup, std::size_t> locate_gene(std::size_t gene_index);

/// A subnetwork of the supernet. Filter ratios are architectural genes;
/// strides, K and subsampling ratios are sampling genes.
struct Genome {
  std::array<double, kFilterRatioSites> filter_ratios{};
  std::array<int, kStrideSites> strides{};
  std::array<int, kKSites> k_values{};
  std::array<int, kSubsamplingSites> subsampling{};

  /// Value of gene `index` in canonical order.
  double gene(std::size_t index) const;
  void set_gene(std::size_t index, double value);

  friend bool operator==(const Genome&, const Genome&) = default;
};

struct GeneSpec {
  GeneGroup group = GeneGroup::FilterRatio;
  std::size_t site_index = 0;
  std::vector<double> allowed_values;
};

/// The 29 categorical genes with their allowed values.
class SearchSpace {
 public:
  /// Builds a space from one value set per group. Every set must be
  /// non-empty and strictly increasing; integer groups must hold integers.
  SearchSpace(std::vector<double> filter_ratios, std::vector<double> strides,
              std::vector<double> k_values, std::vector<double> subsampling);

  /// Ratios {0.4, 0.6, 0.8, 1.0}, strides {1..4}, K {16, 18, 20, 22},
  /// subsampling {2, 4, 6, 8}.
  static SearchSpace standard();

  const std::vector<GeneSpec>& genes() const noexcept { return genes_; }
  const GeneSpec& gene(std::size_t index) const { return genes_.at(index); }

  bool contains(const Genome& g) const noexcept;

  /// Throws ParseError naming the first gene that is not an allowed value.
  void validate(const Genome& g) const;

  /// Position of `value` in the allowed values of gene `index`, or -1.
  int value_index(std::size_t index, double value) const noexcept;

 private:
  std::vector<GeneSpec> genes_;
};

enum class MaskMode { Full, SamplingOnly, ArchitecturalOnly };

std::string_view to_string(MaskMode mode) noexcept;
MaskMode mask_mode_from_string(std::string_view text);

/// Restricts the genetic operators to one gene group; masked-out genes are
/// always taken from `base`.
struct StageMask {
  MaskMode mode = MaskMode::Full;
  Genome base{};

  static StageMask full();
  bool is_free(std::size_t gene_index) const noexcept;
  /// Copies every masked-out gene of `base` into `g`.
  Genome apply(Genome g) const;
};

/// Product of allowed-value counts over the genes the mask leaves free.
/// Throws std::overflow_error past 2^64 - 1.
std::uint64_t cardinality(const SearchSpace& space, const StageMask& mask);

/// The full RandLA-Net configuration: all ratios 1.0, strides 1, K 16,
/// subsampling (4, 4, 4, 4, 2).
Genome supernet_genome();

Genome random_genome(const SearchSpace& space, const StageMask& mask, Rng& rng);

/// Uniform crossover: for each free gene one fair coin decides which parent
/// feeds the first child; the second child takes the other parent's value.
std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b,
                                    const StageMask& mask, Rng& rng);

inline constexpr double kDefaultMutationProb = 1.0 / static_cast<double>(kGeneCount);

/// Each free gene is replaced with probability `per_gene_prob` by a uniform
/// draw among its other allowed values.
Genome mutate(const Genome& g, const SearchSpace& space, const StageMask& mask, Rng& rng,
              double per_gene_prob = kDefaultMutationProb);

/// Canonical form "F:1.0,...|S:1,...|K:16,...|R:4,...".
std::string encode(const Genome& g);

/// Inverse of encode(). Throws ParseError on malformed text or values outside
/// `space`.
Genome decode(std::string_view text, const SearchSpace& space = SearchSpace::standard());

}  // namespace pcnas
