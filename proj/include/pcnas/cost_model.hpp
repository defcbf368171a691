#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcnas/search_space.hpp"

namespace pcnas {

enum class LayerRole { FC, LfaMlp, RandomSample, BridgeMlp, DecoderMlp, Upsample, Head };

std::string_view to_string(LayerRole role) noexcept;
LayerRole layer_role_from_string(std::string_view text);

/// True for roles that hold weights (everything but sampling and upsampling).
bool is_parameterized(LayerRole role) noexcept;

/// One 1x1 convolution / fully-connected layer of the supernet, or a
/// weight-free point sampling step.
///
/// Input channels are the concatenation of the resolved outputs of `inputs`
/// plus `extra_in` unpruned channels (xyz, colour, relative-position
/// encodings). When `inputs` is absent the layer reads the previous layer, or
/// the raw `c_in` features if it is first.
struct LayerSpec {
  std::string name;
  LayerRole role = LayerRole::FC;
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::optional<std::size_t> filter_ratio_site;
  std::optional<std::size_t> stride_site;
  std::optional<std::size_t> k_site;
  /// Encoder stage for FC/LFA/RandomSample layers, decoder stage for
  /// Upsample/DecoderMlp layers.
  std::size_t stage = 0;
  std::optional<std::vector<std::size_t>> inputs;
  std::int64_t extra_in = 0;
};

struct SupernetDescription {
  std::int64_t input_points = 0;
  std::vector<LayerSpec> layers;
  std::size_t encoder_stage_count = kSubsamplingSites;
};

/// Throws StructuralError on dangling site bindings, forward or
/// out-of-range input references, or declared c_in that disagrees with the
/// declared inputs.
void validate_structure(const SupernetDescription& desc);

/// Additionally requires every one of the 13/6/5/5 gene sites to be bound and
/// one RandomSample layer per encoder stage.
void check_complete_binding(const SupernetDescription& desc);

/// Calibrated RandLA-Net (S3DIS configuration: 40960 points, d_out 16/64/128/
/// 256/512, 13 classes) with each LFA block flattened into its 1x1 MLPs.
SupernetDescription reference_supernet();

struct ResolvedChannels {
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
};

/// max(1, round-half-up(ratio * filters)).
std::int64_t scaled_filters(std::int64_t filters, double ratio) noexcept;

std::vector<ResolvedChannels> resolve_channels(const Genome& g, const SupernetDescription& desc);

/// Point counts per encoder level: P0 = input_points,
/// P(s+1) = floor(P(s) / subsampling[s]).
std::vector<std::int64_t> point_levels(const Genome& g, const SupernetDescription& desc);

struct CostReport {
  std::uint64_t params = 0;
  /// Multiply-accumulate counted as two operations.
  std::uint64_t flops = 0;

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

std::uint64_t count_params(const Genome& g, const SupernetDescription& desc);
std::uint64_t count_flops(const Genome& g, const SupernetDescription& desc);
CostReport compute_costs(const Genome& g, const SupernetDescription& desc);

/// Indices of the max(1, round(ratio * n)) filters with the largest L1 norm,
/// ties to the lower index, returned in ascending order.
std::vector<std::size_t> l1_filter_selection(std::span<const double> filter_l1_norms,
                                             double ratio);

}  // namespace pcnas
