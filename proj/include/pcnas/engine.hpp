#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcnas/cost_model.hpp"
#include "pcnas/evaluation.hpp"
#include "pcnas/nsga2.hpp"
#include "pcnas/search_space.hpp"

namespace pcnas {

struct EvaluatorSpec {
  enum class Kind { Builtin, External };
  Kind kind = Kind::Builtin;
  std::string command;
  std::chrono::milliseconds timeout{300'000};
};

struct SearchConfig {
  std::size_t population_size = 15;
  std::size_t max_generations = 60;
  std::vector<Objective> objectives{Objective::MiouError, Objective::Params};
  MaskMode mask_mode = MaskMode::Full;
  /// Values of the genes the mask freezes.
  Genome mask_base = supernet_genome();
  std::uint64_t run_seed = 0;
  double mutation_prob = kDefaultMutationProb;
  /// Stop once the hyperarea difference stays below hd_epsilon for hd_window
  /// consecutive generations; hd_window == 0 disables the rule.
  double hd_epsilon = 0.01;
  std::size_t hd_window = 5;
  EarlyStopPolicy early_stop;
  EvaluatorSpec evaluator;
  /// Evaluators run concurrently within a generation.
  std::size_t jobs = 1;

  /// Throws ConfigError.
  void validate() const;
  StageMask mask() const { return StageMask{mask_mode, mask_base}; }
};

/// One candidate on a recorded Pareto front, with all three metrics.
struct FrontEntry {
  Genome genome;
  double miou_error = 1.0;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  bool early_stopped = false;
  std::size_t rank = 0;
  double crowding = 0.0;
};

struct GenerationRecord {
  std::size_t generation = 1;
  std::vector<FrontEntry> front;
  /// Dominated hypervolume of the normalized front.
  double hypervolume = 0.0;
  std::optional<double> hd_vs_previous;
  std::size_t evaluations_performed = 0;
  std::size_t early_stops = 0;
};

struct SearchResult {
  SearchConfig config;
  std::vector<GenerationRecord> history;
  std::vector<FrontEntry> final_front;
  std::size_t total_evaluations = 0;
  std::size_t cache_hits = 0;
  std::size_t evaluator_faults = 0;
  std::size_t early_stops = 0;
  bool stopped_early_by_hd = false;

  std::vector<double> hd_series() const;
};

using EvaluatorFactory = std::function<std::unique_ptr<Evaluator>(const SearchConfig&)>;

/// Builtin surrogate or an ExternalEvaluator, following config.evaluator.
std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& config);

/// Scales objectives for hypervolume: error as is, params and flops divided by
/// the supernet's cost.
struct ObjectiveScales {
  double params = 1.0;
  double flops = 1.0;

  static ObjectiveScales from_supernet(const SupernetDescription& desc);
  std::vector<double> normalize(const FrontEntry& entry,
                                std::span<const Objective> objectives) const;
};

/// Reference point used for hyperarea tracking: 1.1 in every normalized
/// objective.
inline constexpr double kHypervolumeReference = 1.1;

/// Exact Lebesgue measure of the union of boxes [p, reference] for minimized
/// points in 2 or 3 dimensions. Throws Error if a point does not strictly
/// dominate the reference or dimensions disagree.
double hypervolume(std::span<const std::vector<double>> points,
                   std::span<const double> reference);

/// |HV(current) - HV(previous)| / max(HV(previous), 1e-12); +infinity when the
/// previous front is empty and the current one is not.
double hyperarea_difference(std::span<const std::vector<double>> current,
                            std::span<const std::vector<double>> previous,
                            std::span<const double> reference);

/// N-1 random genomes (respecting the mask) followed by the supernet genome
/// with the mask applied. Deterministic per run_seed.
Population seed_population(const SearchConfig& config, const SearchSpace& space);

/// Upper bound on evaluator calls: N + (G - 1) * floor(N / 2).
std::size_t max_evaluations(const SearchConfig& config);

/// Population-times-generations budget, the unit search cost is quoted in.
std::size_t nominal_evaluation_budget(const SearchConfig& config);

struct SearchContext {
  const SearchSpace& space;
  const SupernetDescription& supernet;
  EvaluatorFactory evaluator_factory = make_evaluator;
};

SearchResult run_single_stage(const SearchConfig& config, const SearchContext& context);

struct TwoStageResult {
  SearchResult stage1;
  std::vector<Genome> pivots;
  std::vector<SearchResult> stage2;
};

/// Up to `count` distinct genomes from a (miou_error, flops) front: lowest
/// error, lowest flops, then best range-normalized error + flops sum.
std::vector<Genome> select_pivots(std::span<const FrontEntry> front, std::size_t count);

/// Stage 1 searches sampling genes; each selected pivot then seeds an
/// architectural search with its sampling genes frozen.
TwoStageResult run_two_stage(const SearchConfig& stage1, const SearchConfig& stage2,
                             const SearchContext& context, std::size_t pivot_count = 3);

}  // namespace pcnas
