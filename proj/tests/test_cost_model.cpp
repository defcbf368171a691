#include <cmath>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "pcnas/cost_model.hpp"
#include "pcnas/errors.hpp"
#include "pcnas/json_io.hpp"
#include "pcnas/rng.hpp"

using namespace pcnas;

namespace {

SupernetDescription single_layer(LayerRole role, std::int64_t c_in, std::int64_t c_out,
                                 std::int64_t points) {
  LayerSpec l;
  l.name = "l0";
  l.role = role;
  l.c_in = c_in;
  l.c_out = c_out;
  return SupernetDescription{points, {l}, kSubsamplingSites};
}

// Oracle written directly from the cost definitions, independent of the
// library's channel resolution.
struct OracleCosts {
  unsigned long long params = 0;
  unsigned long long flops = 0;
};

OracleCosts oracle_costs(const Genome& g, const SupernetDescription& d) {
  std::vector<long long> points{d.input_points};
  for (std::size_t s = 0; s < d.encoder_stage_count; ++s) {
    points.push_back(points.back() / g.subsampling[s]);
  }
  std::vector<long long> out(d.layers.size());
  OracleCosts c;
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    const auto& l = d.layers[i];
    long long in = 0;
    if (l.inputs) {
      in = l.extra_in;
      for (auto s : *l.inputs) in += out[s];
    } else if (i == 0) {
      in = l.c_in;
    } else {
      in = l.extra_in + out[i - 1];
    }
    long long o = l.c_out;
    if (l.role == LayerRole::RandomSample || l.role == LayerRole::Upsample) o = in;
    if (l.filter_ratio_site) {
      o = static_cast<long long>(std::floor(l.c_out * g.filter_ratios[*l.filter_ratio_site] + 0.5 + 1e-9));
      if (o < 1) o = 1;
    }
    out[i] = o;
    if (l.role == LayerRole::RandomSample || l.role == LayerRole::Upsample) continue;
    c.params += static_cast<unsigned long long>((in + 1) * o);
    std::size_t level = 0;
    switch (l.role) {
      case LayerRole::LfaMlp: level = l.stage; break;
      case LayerRole::BridgeMlp: level = d.encoder_stage_count; break;
      case LayerRole::DecoderMlp: level = d.encoder_stage_count - 1 - l.stage; break;
      default: level = 0;
    }
    long long pos = points[level];
    if (l.stride_site) {
      const long long st = g.strides[*l.stride_site];
      pos = (pos + st - 1) / st;
    }
    if (l.k_site) pos *= g.k_values[*l.k_site];
    c.flops += static_cast<unsigned long long>(2 * in * o * pos);
  }
  return c;
}

Genome with_gene(Genome g, std::size_t index, double value) {
  g.set_gene(index, value);
  return g;
}

}  // namespace

TEST_CASE("filter rounding is round-half-up clamped to one") {
  CHECK(scaled_filters(16, 0.4) == 6);
  CHECK(scaled_filters(1, 0.4) == 1);
  CHECK(scaled_filters(16, 1.0) == 16);
  CHECK(scaled_filters(5, 0.5) == 3);
  CHECK(scaled_filters(15, 0.6) == 9);
  CHECK(scaled_filters(10, 0.6) == 6);
  CHECK(scaled_filters(25, 0.6) == 15);
}

TEST_CASE("single FC layer params") {
  auto d = single_layer(LayerRole::FC, 8, 16, 1000);
  CHECK(count_params(supernet_genome(), d) == 144);
  d.layers[0].filter_ratio_site = 0;
  Genome g = supernet_genome();
  g.filter_ratios[0] = 0.4;
  CHECK(resolve_channels(g, d)[0].c_out == 6);
  CHECK(count_params(g, d) == 54);
}

TEST_CASE("single layer FLOPs with stride and K") {
  auto fc = single_layer(LayerRole::FC, 8, 16, 1000);
  fc.layers[0].stride_site = 0;
  Genome g = supernet_genome();
  g.strides[0] = 2;
  CHECK(count_flops(g, fc) == 128'000);
  g.strides[0] = 3;
  CHECK(count_flops(g, fc) == 2ULL * 8 * 16 * 334);

  auto lfa = single_layer(LayerRole::LfaMlp, 8, 16, 1000);
  lfa.layers[0].k_site = 0;
  CHECK(count_flops(supernet_genome(), lfa) == 4'096'000);
}

TEST_CASE("ratio 1.0 resolves to the declared dimensions") {
  const auto d = reference_supernet();
  const auto r = resolve_channels(supernet_genome(), d);
  REQUIRE(r.size() == d.layers.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(r[i].c_in == d.layers[i].c_in);
    CHECK(r[i].c_out == d.layers[i].c_out);
  }
}

TEST_CASE("point levels follow the subsampling ratios") {
  const auto d = reference_supernet();
  const auto levels = point_levels(supernet_genome(), d);
  CHECK(levels == std::vector<std::int64_t>{40960, 10240, 2560, 640, 160, 80});
  Genome g = supernet_genome();
  g.subsampling = {6, 8, 2, 4, 8};
  CHECK(point_levels(g, d) == std::vector<std::int64_t>{40960, 6826, 853, 426, 106, 13});
}

TEST_CASE("reference description binds every site") {
  const auto d = reference_supernet();
  CHECK_NOTHROW(check_complete_binding(d));
}

TEST_CASE("costs match the independent oracle on random genomes") {
  const auto d = reference_supernet();
  const auto space = SearchSpace::standard();
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    const auto g = random_genome(space, StageMask::full(), rng);
    const auto expected = oracle_costs(g, d);
    const auto got = compute_costs(g, d);
    CHECK(got.params == expected.params);
    CHECK(got.flops == expected.flops);
  }
}

TEST_CASE("supernet costs land near the published totals") {
  const auto c = compute_costs(supernet_genome(), reference_supernet());
  CHECK(std::abs(static_cast<double>(c.params) / 5.008e6 - 1.0) <= 0.10);
  CHECK(std::abs(static_cast<double>(c.flops) / 17.03e9 - 1.0) <= 0.15);
}

TEST_CASE("cost monotonicity over single-gene changes") {
  const auto d = reference_supernet();
  const auto space = SearchSpace::standard();
  Rng rng(31);
  for (int trial = 0; trial < 400; ++trial) {
    const auto g = random_genome(space, StageMask::full(), rng);
    const auto base = compute_costs(g, d);
    for (std::size_t i = 0; i < kGeneCount; ++i) {
      const auto& values = space.gene(i).allowed_values;
      const int idx = space.value_index(i, g.gene(i));
      if (idx + 1 >= static_cast<int>(values.size())) continue;
      const auto up = compute_costs(with_gene(g, i, values[idx + 1]), d);
      const auto group = locate_gene(i).first;
      if (group == GeneGroup::FilterRatio) {
        CHECK(up.params >= base.params);
        CHECK(up.flops >= base.flops);
      } else {
        CHECK(up.params == base.params);
        if (group == GeneGroup::Stride || group == GeneGroup::Subsampling) {
          CHECK(up.flops <= base.flops);
        } else {
          CHECK(up.flops >= base.flops);
        }
      }
    }
  }
}

TEST_CASE("structural errors") {
  auto d = single_layer(LayerRole::FC, 8, 16, 100);
  d.layers[0].filter_ratio_site = 13;
  CHECK_THROWS_AS(validate_structure(d), StructuralError);

  d = single_layer(LayerRole::FC, 8, 16, 100);
  d.layers[0].k_site = 0;
  CHECK_THROWS_AS(validate_structure(d), StructuralError);

  d = single_layer(LayerRole::FC, 8, 16, 100);
  LayerSpec next;
  next.name = "l1";
  next.c_in = 15;
  next.c_out = 4;
  d.layers.push_back(next);
  CHECK_THROWS_AS(validate_structure(d), StructuralError);
  d.layers[1].c_in = 16;
  CHECK_NOTHROW(validate_structure(d));
  d.layers[1].inputs = std::vector<std::size_t>{1};
  CHECK_THROWS_AS(validate_structure(d), StructuralError);

  d = single_layer(LayerRole::RandomSample, 8, 8, 100);
  d.layers[0].stride_site = 0;
  CHECK_THROWS_AS(validate_structure(d), StructuralError);

  CHECK_THROWS_AS(check_complete_binding(single_layer(LayerRole::FC, 8, 16, 100)),
                  StructuralError);
  CHECK_THROWS_AS(count_params(supernet_genome(), SupernetDescription{}), StructuralError);
}

TEST_CASE("l1 filter selection") {
  CHECK(l1_filter_selection(std::vector<double>{3.0, 1.0, 2.0, 0.5}, 0.5) ==
        std::vector<std::size_t>{0, 2});
  CHECK(l1_filter_selection(std::vector<double>{3.0, 1.0, 2.0, 0.5}, 1.0) ==
        std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(l1_filter_selection(std::vector<double>{1.0, 1.0, 1.0}, 1.0 / 3.0) ==
        std::vector<std::size_t>{0});
  CHECK(l1_filter_selection(std::vector<double>{0.1, 0.9}, 0.1) == std::vector<std::size_t>{1});
  CHECK_THROWS(l1_filter_selection(std::vector<double>{}, 0.5));
  CHECK_THROWS(l1_filter_selection(std::vector<double>{1.0}, 0.0));
  CHECK_THROWS(l1_filter_selection(std::vector<double>{-1.0}, 0.5));
}

TEST_CASE("shipped description file equals the built-in reference") {
  const auto j = read_json_file(std::string(PCNAS_SOURCE_DIR) + "/data/randla_s3dis.json");
  CHECK(j == supernet_to_json(reference_supernet()));
  const auto d = supernet_from_json(j);
  CHECK(compute_costs(supernet_genome(), d) == compute_costs(supernet_genome(), reference_supernet()));
}

TEST_CASE("description JSON round trip") {
  const auto d = reference_supernet();
  const auto back = supernet_from_json(supernet_to_json(d));
  CHECK(supernet_to_json(back) == supernet_to_json(d));
  Json bad = supernet_to_json(d);
  bad["layers"][3]["filter_ratio_site"] = 40;
  CHECK_THROWS_AS(supernet_from_json(bad), StructuralError);
  bad = supernet_to_json(d);
  bad["layers"][3]["role"] = "Conv";
  CHECK_THROWS_AS(supernet_from_json(bad), StructuralError);
}
