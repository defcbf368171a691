#include "pcnas/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pcnas/errors.hpp"

namespace pcnas {

namespace {

bool is_pass_through(LayerRole role) noexcept { return !is_parameterized(role); }

std::string layer_label(const SupernetDescription& desc, std::size_t i) {
  const auto& name = desc.layers[i].name;
  return "layer " + std::to_string(i) + (name.empty() ? "" : " (" + name + ")");
}

// Encoder level whose point count a layer operates on.
std::size_t point_level(const LayerSpec& layer, const SupernetDescription& desc) {
  switch (layer.role) {
    case LayerRole::FC:
    case LayerRole::Head: return 0;
    case LayerRole::LfaMlp:
    case LayerRole::RandomSample: return layer.stage;
    case LayerRole::BridgeMlp: return desc.encoder_stage_count;
    case LayerRole::DecoderMlp:
    case LayerRole::Upsample: return desc.encoder_stage_count - 1 - layer.stage;
  }
  return 0;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

std::string_view to_string(LayerRole role) noexcept {
  switch (role) {
    case LayerRole::FC: return "FC";
    case LayerRole::LfaMlp: return "LFA_MLP";
    case LayerRole::RandomSample: return "RandomSample";
    case LayerRole::BridgeMlp: return "BridgeMLP";
    case LayerRole::DecoderMlp: return "DecoderMLP";
    case LayerRole::Upsample: return "Upsample";
    case LayerRole::Head: return "Head";
  }
  return "?";
}

LayerRole layer_role_from_string(std::string_view text) {
  for (auto role : {LayerRole::FC, LayerRole::LfaMlp, LayerRole::RandomSample,
                    LayerRole::BridgeMlp, LayerRole::DecoderMlp, LayerRole::Upsample,
                    LayerRole::Head}) {
    if (text == to_string(role)) return role;
  }
  throw StructuralError("unknown layer role '" + std::string(text) + "'");
}

bool is_parameterized(LayerRole role) noexcept {
  return role != LayerRole::RandomSample && role != LayerRole::Upsample;
}

void validate_structure(const SupernetDescription& desc) {
  if (desc.input_points <= 0) throw StructuralError("input_points must be positive");
  if (desc.encoder_stage_count == 0 || desc.encoder_stage_count > kSubsamplingSites) {
    throw StructuralError("encoder_stage_count must lie in [1, 5]");
  }
  if (desc.layers.empty()) throw StructuralError("description has no layers");

  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    const auto& layer = desc.layers[i];
    const auto label = layer_label(desc, i);
    if (layer.c_in <= 0 || layer.c_out <= 0 || layer.extra_in < 0) {
      throw StructuralError(label + ": channel counts must be positive");
    }
    if (layer.filter_ratio_site && *layer.filter_ratio_site >= kFilterRatioSites) {
      throw StructuralError(label + ": dangling filter_ratio_site " +
                            std::to_string(*layer.filter_ratio_site));
    }
    if (layer.stride_site && *layer.stride_site >= kStrideSites) {
      throw StructuralError(label + ": dangling stride_site " +
                            std::to_string(*layer.stride_site));
    }
    if (layer.k_site) {
      if (*layer.k_site >= kKSites) {
        throw StructuralError(label + ": dangling k_site " + std::to_string(*layer.k_site));
      }
      if (layer.role != LayerRole::LfaMlp) {
        throw StructuralError(label + ": k_site is only valid on LFA_MLP layers");
      }
    }
    const bool staged = layer.role == LayerRole::LfaMlp || layer.role == LayerRole::RandomSample ||
                        layer.role == LayerRole::DecoderMlp || layer.role == LayerRole::Upsample;
    if (staged && layer.stage >= desc.encoder_stage_count) {
      throw StructuralError(label + ": stage " + std::to_string(layer.stage) + " out of range");
    }
    if (is_pass_through(layer.role)) {
      if (layer.filter_ratio_site || layer.stride_site || layer.k_site) {
        throw StructuralError(label + ": sampling layers carry no gene sites");
      }
      if (layer.c_in != layer.c_out) {
        throw StructuralError(label + ": sampling layers must preserve channels");
      }
    }

    std::int64_t expected = layer.extra_in;
    if (layer.inputs) {
      for (std::size_t src : *layer.inputs) {
        if (src >= i) {
          throw StructuralError(label + ": input " + std::to_string(src) +
                                " is not an earlier layer");
        }
        expected += desc.layers[src].c_out;
      }
    } else if (i > 0) {
      expected += desc.layers[i - 1].c_out;
    } else {
      expected = layer.c_in;
    }
    if (expected != layer.c_in) {
      throw StructuralError(label + ": declared c_in " + std::to_string(layer.c_in) +
                            " but inputs provide " + std::to_string(expected));
    }
  }
}

void check_complete_binding(const SupernetDescription& desc) {
  validate_structure(desc);
  std::set<std::size_t> ratio_sites, stride_sites, k_sites, sample_stages;
  for (const auto& layer : desc.layers) {
    if (layer.filter_ratio_site) ratio_sites.insert(*layer.filter_ratio_site);
    if (layer.stride_site) stride_sites.insert(*layer.stride_site);
    if (layer.k_site) k_sites.insert(*layer.k_site);
    if (layer.role == LayerRole::RandomSample) {
      if (!sample_stages.insert(layer.stage).second) {
        throw StructuralError("stage " + std::to_string(layer.stage) +
                              " has more than one RandomSample layer");
      }
    }
  }
  auto require = [](const std::set<std::size_t>& sites, std::size_t n, const char* what) {
    if (sites.size() != n) {
      throw StructuralError(std::string("expected ") + std::to_string(n) + " " + what +
                            " sites, found " + std::to_string(sites.size()));
    }
  };
  require(ratio_sites, kFilterRatioSites, "filter-ratio");
  require(stride_sites, kStrideSites, "stride");
  require(k_sites, kKSites, "K");
  require(sample_stages, desc.encoder_stage_count, "subsampling");
  if (desc.encoder_stage_count != kSubsamplingSites) {
    throw StructuralError("a complete description has 5 encoder stages");
  }
}

std::int64_t scaled_filters(std::int64_t filters, double ratio) noexcept {
  const auto scaled = static_cast<std::int64_t>(
      std::floor(ratio * static_cast<double>(filters) + 0.5 + 1e-9));
  return std::max<std::int64_t>(1, scaled);
}

std::vector<ResolvedChannels> resolve_channels(const Genome& g, const SupernetDescription& desc) {
  validate_structure(desc);
  std::vector<ResolvedChannels> out(desc.layers.size());
  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    const auto& layer = desc.layers[i];
    std::int64_t c_in = layer.extra_in;
    if (layer.inputs) {
      for (std::size_t src : *layer.inputs) c_in += out[src].c_out;
    } else if (i > 0) {
      c_in += out[i - 1].c_out;
    } else {
      c_in = layer.c_in;
    }
    std::int64_t c_out = layer.c_out;
    if (is_pass_through(layer.role)) {
      c_out = c_in;
    } else if (layer.filter_ratio_site) {
      c_out = scaled_filters(layer.c_out, g.filter_ratios[*layer.filter_ratio_site]);
    }
    out[i] = {c_in, c_out};
  }
  return out;
}

std::vector<std::int64_t> point_levels(const Genome& g, const SupernetDescription& desc) {
  std::vector<std::int64_t> levels(desc.encoder_stage_count + 1);
  levels[0] = desc.input_points;
  for (std::size_t s = 0; s < desc.encoder_stage_count; ++s) {
    levels[s + 1] = levels[s] / g.subsampling[s];
  }
  return levels;
}

std::uint64_t count_params(const Genome& g, const SupernetDescription& desc) {
  const auto channels = resolve_channels(g, desc);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    if (!is_parameterized(desc.layers[i].role)) continue;
    total += static_cast<std::uint64_t>((channels[i].c_in + 1) * channels[i].c_out);
  }
  return total;
}

std::uint64_t count_flops(const Genome& g, const SupernetDescription& desc) {
  const auto channels = resolve_channels(g, desc);
  const auto levels = point_levels(g, desc);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    const auto& layer = desc.layers[i];
    if (!is_parameterized(layer.role)) continue;
    std::int64_t positions = levels[point_level(layer, desc)];
    if (layer.stride_site) positions = ceil_div(positions, g.strides[*layer.stride_site]);
    if (layer.k_site) positions *= g.k_values[*layer.k_site];
    total += static_cast<std::uint64_t>(2 * channels[i].c_in * channels[i].c_out * positions);
  }
  return total;
}

CostReport compute_costs(const Genome& g, const SupernetDescription& desc) {
  return {count_params(g, desc), count_flops(g, desc)};
}

std::vector<std::size_t> l1_filter_selection(std::span<const double> filter_l1_norms,
                                             double ratio) {
  if (filter_l1_norms.empty()) throw Error("l1_filter_selection: empty norm list");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("l1_filter_selection: ratio must lie in (0, 1]");
  for (double v : filter_l1_norms) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error("l1_filter_selection: norms must be finite and non-negative");
    }
  }
  const auto n = static_cast<std::int64_t>(filter_l1_norms.size());
  const auto keep = static_cast<std::size_t>(std::min(n, scaled_filters(n, ratio)));

  std::vector<std::size_t> order(filter_l1_norms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return filter_l1_norms[a] > filter_l1_norms[b];
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

SupernetDescription reference_supernet() {
  constexpr std::array<std::int64_t, 5> kDOut = {16, 64, 128, 256, 512};
  constexpr std::int64_t kInputFeatures = 6;  // xyz + rgb
  constexpr std::int64_t kRelPosFeatures = 10;
  constexpr std::int64_t kClasses = 13;

  SupernetDescription desc;
  desc.input_points = 40960;
  auto& L = desc.layers;

  auto add = [&](LayerSpec spec) {
    L.push_back(std::move(spec));
    return L.size() - 1;
  };
  auto out_of = [&](std::size_t i) { return L[i].c_out; };

  std::size_t prev = add({.name = "fc0",
                          .role = LayerRole::FC,
                          .c_in = kInputFeatures,
                          .c_out = 8,
                          .inputs = std::vector<std::size_t>{},
                          .extra_in = kInputFeatures});

  std::array<std::size_t, 5> sampled{};
  std::size_t first_block_out = 0;
  for (std::size_t s = 0; s < kDOut.size(); ++s) {
    const std::int64_t d = kDOut[s];
    const std::size_t block_in = prev;
    // Block output widths (mlp2, shortcut) stay fixed so skip connections keep
    // their shape; the stage ratio prunes the hidden filters only.
    auto lfa = [&](std::string name, std::vector<std::size_t> inputs, std::int64_t extra,
                   std::int64_t c_out, bool strided, bool neighbours, bool pruned = true) {
      std::int64_t c_in = extra;
      for (auto i : inputs) c_in += out_of(i);
      LayerSpec spec{.name = std::move(name) + "_" + std::to_string(s),
                     .role = LayerRole::LfaMlp,
                     .c_in = c_in,
                     .c_out = c_out,
                     .stage = s,
                     .inputs = std::move(inputs),
                     .extra_in = extra};
      if (pruned) spec.filter_ratio_site = s;
      if (strided) spec.stride_site = s;
      if (neighbours) spec.k_site = s;
      return add(std::move(spec));
    };
    const auto mlp1 = lfa("enc_mlp1", {block_in}, 0, d / 2, true, false);
    const auto pos1 = lfa("enc_relpos1", {}, kRelPosFeatures, d / 2, false, true);
    const auto score1 = lfa("enc_att1_score", {pos1, mlp1}, 0, d, false, true);
    const auto pool1 = lfa("enc_att1_mlp", {score1}, 0, d / 2, false, false);
    const auto pos2 = lfa("enc_relpos2", {pos1}, 0, d / 2, false, true);
    const auto score2 = lfa("enc_att2_score", {pos2, pool1}, 0, d, false, true);
    const auto pool2 = lfa("enc_att2_mlp", {score2}, 0, d, false, false);
    const auto mlp2 = lfa("enc_mlp2", {pool2}, 0, 2 * d, true, false, false);
    lfa("enc_shortcut", {block_in}, 0, 2 * d, true, false, false);
    if (s == 0) first_block_out = mlp2;
    prev = add({.name = "enc_sample_" + std::to_string(s),
                .role = LayerRole::RandomSample,
                .c_in = 2 * d,
                .c_out = 2 * d,
                .stage = s,
                .inputs = std::vector<std::size_t>{mlp2}});
    sampled[s] = prev;
  }

  prev = add({.name = "bridge",
              .role = LayerRole::BridgeMlp,
              .c_in = out_of(prev),
              .c_out = out_of(prev),
              .filter_ratio_site = std::size_t{5},
              .stride_site = std::size_t{5},
              .inputs = std::vector<std::size_t>{prev}});

  for (std::size_t j = 0; j < kDOut.size(); ++j) {
    const std::size_t skip = j + 1 < kDOut.size() ? sampled[kDOut.size() - 2 - j] : first_block_out;
    const std::size_t up = add({.name = "dec_upsample_" + std::to_string(j),
                                .role = LayerRole::Upsample,
                                .c_in = out_of(prev),
                                .c_out = out_of(prev),
                                .stage = j,
                                .inputs = std::vector<std::size_t>{prev}});
    prev = add({.name = "dec_mlp_" + std::to_string(j),
                .role = LayerRole::DecoderMlp,
                .c_in = out_of(up) + out_of(skip),
                .c_out = out_of(skip),
                .filter_ratio_site = 6 + j,
                .stage = j,
                .inputs = std::vector<std::size_t>{up, skip}});
  }

  prev = add({.name = "fc1", .role = LayerRole::Head, .c_in = 32, .c_out = 64,
              .filter_ratio_site = std::size_t{11}, .inputs = std::vector<std::size_t>{prev}});
  prev = add({.name = "fc2", .role = LayerRole::Head, .c_in = 64, .c_out = 32,
              .filter_ratio_site = std::size_t{12}, .inputs = std::vector<std::size_t>{prev}});
  add({.name = "fc3", .role = LayerRole::Head, .c_in = 32, .c_out = kClasses,
       .inputs = std::vector<std::size_t>{prev}});
  return desc;
}

}  // namespace pcnas
