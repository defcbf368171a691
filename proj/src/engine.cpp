#include "pcnas/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include "pcnas/external_evaluator.hpp"

namespace pcnas {

void SearchConfig::validate() const {
  if (population_size < 2) throw ConfigError("population_size must be at least 2");
  if (max_generations < 1) throw ConfigError("max_generations must be at least 1");
  if (objectives.size() < 2 || objectives.size() > 3) {
    throw ConfigError("objectives must list 2 or 3 entries");
  }
  if (std::find(objectives.begin(), objectives.end(), Objective::MiouError) == objectives.end()) {
    throw ConfigError("objectives must include miou_error");
  }
  if (std::set<Objective>(objectives.begin(), objectives.end()).size() != objectives.size()) {
    throw ConfigError("objectives must not repeat");
  }
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) {
    throw ConfigError("mutation_prob must lie in [0, 1]");
  }
  if (!(hd_epsilon >= 0.0)) throw ConfigError("hd_epsilon must be non-negative");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  early_stop.validate();
  if (evaluator.kind == EvaluatorSpec::Kind::External && evaluator.command.empty()) {
    throw ConfigError("external evaluator needs a command");
  }
  if (evaluator.timeout.count() <= 0) throw ConfigError("evaluator timeout must be positive");
}

std::vector<double> SearchResult::hd_series() const {
  std::vector<double> out;
  for (const auto& rec : history) {
    if (rec.hd_vs_previous) out.push_back(*rec.hd_vs_previous);
  }
  return out;
}

std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& config) {
  if (config.evaluator.kind == EvaluatorSpec::Kind::External) {
    return std::make_unique<ExternalEvaluator>(ExternalEvaluatorOptions{
        config.evaluator.command, config.run_seed, config.early_stop.total_batches,
        config.evaluator.timeout});
  }
  return std::make_unique<SurrogateEvaluator>(config.run_seed, config.early_stop.total_batches);
}

ObjectiveScales ObjectiveScales::from_supernet(const SupernetDescription& desc) {
  const auto cost = compute_costs(supernet_genome(), desc);
  return {std::max(1.0, static_cast<double>(cost.params)),
          std::max(1.0, static_cast<double>(cost.flops))};
}

std::vector<double> ObjectiveScales::normalize(const FrontEntry& entry,
                                               std::span<const Objective> objectives) const {
  std::vector<double> out;
  out.reserve(objectives.size());
  for (auto obj : objectives) {
    switch (obj) {
      case Objective::MiouError: out.push_back(entry.miou_error); break;
      case Objective::Params: out.push_back(static_cast<double>(entry.params) / params); break;
      case Objective::Flops: out.push_back(static_cast<double>(entry.flops) / flops); break;
    }
  }
  return out;
}

namespace {

double hypervolume_2d(std::vector<std::pair<double, double>> pts, double ref_x, double ref_y) {
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double floor_y = ref_y;
  for (const auto& [x, y] : pts) {
    if (y < floor_y) {
      area += (ref_x - x) * (floor_y - y);
      floor_y = y;
    }
  }
  return area;
}

}  // namespace

double hypervolume(std::span<const std::vector<double>> points, std::span<const double> reference) {
  const std::size_t dim = reference.size();
  if (dim != 2 && dim != 3) throw Error("hypervolume supports 2 or 3 objectives");
  for (const auto& p : points) {
    if (p.size() != dim) throw Error("hypervolume: point dimension mismatch");
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(p[d] < reference[d])) {
        throw Error("hypervolume: point does not dominate the reference point");
      }
    }
  }
  if (points.empty()) return 0.0;
  if (dim == 2) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : points) pts.emplace_back(p[0], p[1]);
    return hypervolume_2d(std::move(pts), reference[0], reference[1]);
  }

  // Slice along the third objective: between consecutive z levels the
  // cross-section is the 2-D volume of every point at or below the slice.
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a][2] < points[b][2]; });
  double volume = 0.0;
  std::vector<std::pair<double, double>> active;
  for (std::size_t k = 0; k < order.size();) {
    const double z = points[order[k]][2];
    while (k < order.size() && points[order[k]][2] == z) {
      active.emplace_back(points[order[k]][0], points[order[k]][1]);
      ++k;
    }
    const double next_z = k < order.size() ? points[order[k]][2] : reference[2];
    volume += hypervolume_2d(active, reference[0], reference[1]) * (next_z - z);
  }
  return volume;
}

double hyperarea_difference(std::span<const std::vector<double>> current,
                            std::span<const std::vector<double>> previous,
                            std::span<const double> reference) {
  const double hv_now = hypervolume(current, reference);
  if (previous.empty()) {
    return current.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double hv_prev = hypervolume(previous, reference);
  return std::abs(hv_now - hv_prev) / std::max(hv_prev, 1e-12);
}

Population seed_population(const SearchConfig& config, const SearchSpace& space) {
  config.validate();
  const StageMask mask = config.mask();
  Rng rng(config.run_seed);
  Population pop;
  pop.generation = 1;
  for (std::size_t i = 0; i + 1 < config.population_size; ++i) {
    pop.individuals.push_back(Individual{random_genome(space, mask, rng), {}, {}, {}});
  }
  pop.individuals.push_back(Individual{mask.apply(supernet_genome()), {}, {}, {}});
  return pop;
}

std::size_t max_evaluations(const SearchConfig& config) {
  const std::size_t offspring = config.population_size - survivor_count(config.population_size);
  return config.population_size + (config.max_generations - 1) * offspring;
}

std::size_t nominal_evaluation_budget(const SearchConfig& config) {
  return config.population_size * config.max_generations;
}

namespace {

struct Metrics {
  double miou_error = 1.0;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  bool early_stopped = false;
};

class SearchRun {
 public:
  SearchRun(const SearchConfig& config, const SearchContext& context)
      : config_(config),
        context_(context),
        scales_(ObjectiveScales::from_supernet(context.supernet)),
        reference_(config.objectives.size(), kHypervolumeReference) {}

  SearchResult run() {
    SearchResult result;
    result.config = config_;
    const StageMask mask = config_.mask();
    context_.space.validate(mask.base);
    Rng ga_rng(splitmix64_mix(config_.run_seed ^ 0x6761ULL));

    Population pop = seed_population(config_, context_.space);
    std::vector<std::vector<double>> previous_points;
    std::size_t calm_generations = 0;

    for (std::size_t gen = 1;; ++gen) {
      if (gen > 1) pop = next_generation(pop, context_.space, mask, ga_rng, config_.mutation_prob);
      const auto [evaluated, early] = evaluate(pop, result);
      GenerationRecord record = make_record(pop);
      record.evaluations_performed = evaluated;
      record.early_stops = early;

      auto points = tracked_points(record.front);
      record.hypervolume = hypervolume(points, reference_);
      if (gen > 1) {
        const double hd = hyperarea_difference(points, previous_points, reference_);
        record.hd_vs_previous = hd;
        calm_generations = hd < config_.hd_epsilon ? calm_generations + 1 : 0;
      }
      previous_points = std::move(points);
      result.total_evaluations += evaluated;
      result.early_stops += early;
      result.history.push_back(std::move(record));

      if (gen >= config_.max_generations) break;
      if (config_.hd_window > 0 && calm_generations >= config_.hd_window) {
        result.stopped_early_by_hd = true;
        break;
      }
    }
    result.final_front = result.history.back().front;
    return result;
  }

 private:
  // Evaluates every individual without objectives; returns (evaluator calls,
  // early stops among them).
  std::pair<std::size_t, std::size_t> evaluate(Population& pop, SearchResult& result) {
    std::vector<std::string> keys;
    std::vector<Genome> pending;
    std::set<std::string> queued;
    for (auto& ind : pop.individuals) {
      if (ind.objectives) continue;
      auto key = encode(ind.genome);
      if (cache_.count(key) || queued.count(key)) {
        ++result.cache_hits;
        continue;
      }
      queued.insert(key);
      keys.push_back(std::move(key));
      pending.push_back(ind.genome);
    }

    std::vector<Metrics> metrics(pending.size());
    std::vector<std::string> faults(pending.size());
    ensure_evaluators(std::min(config_.jobs, std::max<std::size_t>(pending.size(), 1)));
    std::vector<std::exception_ptr> errors(evaluators_.size());
    auto work = [&](std::size_t worker) noexcept {
      try {
        work_on(worker, pending, metrics, faults);
      } catch (...) {
        errors[worker] = std::current_exception();
      }
    };
    if (evaluators_.size() == 1 || pending.size() <= 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < evaluators_.size(); ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    std::size_t early = 0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (!faults[i].empty()) {
        ++result.evaluator_faults;
        std::cerr << "pcnas: evaluator fault, scoring " << keys[i] << " as error 1.0 ("
                  << faults[i] << ")\n";
      }
      if (metrics[i].early_stopped) ++early;
      cache_.emplace(keys[i], metrics[i]);
    }
    for (auto& ind : pop.individuals) {
      if (!ind.objectives) ind.objectives = objectives_of(cache_.at(encode(ind.genome)));
    }
    return {pending.size(), early};
  }

  // Worker `worker` handles pending candidates worker, worker + W, ...
  void work_on(std::size_t worker, const std::vector<Genome>& pending, std::vector<Metrics>& metrics,
               std::vector<std::string>& faults) {
    for (std::size_t i = worker; i < pending.size(); i += evaluators_.size()) {
      const auto cost = compute_costs(pending[i], context_.supernet);
      metrics[i].params = cost.params;
      metrics[i].flops = cost.flops;
      try {
        if (!evaluators_[worker]) evaluators_[worker] = context_.evaluator_factory(config_);
        const auto outcome =
            evaluate_with_early_stopping(*evaluators_[worker], pending[i], config_.early_stop);
        metrics[i].miou_error = outcome.miou_error;
        metrics[i].early_stopped = outcome.early_stopped;
      } catch (const EvaluationError& e) {
        metrics[i].miou_error = 1.0;
        faults[i] = std::string(to_string(e.kind())) + ": " + e.what();
      }
    }
  }

  void ensure_evaluators(std::size_t count) {
    if (evaluators_.size() < count) evaluators_.resize(count);
  }

  ObjectiveVector objectives_of(const Metrics& m) const {
    ObjectiveVector v;
    v.labels = config_.objectives;
    for (auto obj : config_.objectives) {
      switch (obj) {
        case Objective::MiouError: v.values.push_back(m.miou_error); break;
        case Objective::Params: v.values.push_back(static_cast<double>(m.params)); break;
        case Objective::Flops: v.values.push_back(static_cast<double>(m.flops)); break;
      }
    }
    return v;
  }

  GenerationRecord make_record(Population& pop) {
    assign_rank_and_crowding(pop);
    GenerationRecord record;
    record.generation = pop.generation;
    std::set<std::string> seen;
    for (const auto& ind : pop.individuals) {
      if (*ind.rank != 0) continue;
      auto key = encode(ind.genome);
      if (!seen.insert(key).second) continue;
      const Metrics& m = cache_.at(key);
      record.front.push_back(FrontEntry{ind.genome, m.miou_error, m.params, m.flops,
                                        m.early_stopped, 0, *ind.crowding});
    }
    std::sort(record.front.begin(), record.front.end(),
              [&](const FrontEntry& a, const FrontEntry& b) {
                const auto va = scales_.normalize(a, config_.objectives);
                const auto vb = scales_.normalize(b, config_.objectives);
                if (va != vb) return va < vb;
                return encode(a.genome) < encode(b.genome);
              });
    return record;
  }

  // Normalized front points inside the reference box; points outside it add
  // nothing to the dominated volume.
  std::vector<std::vector<double>> tracked_points(const std::vector<FrontEntry>& front) const {
    std::vector<std::vector<double>> out;
    for (const auto& entry : front) {
      auto p = scales_.normalize(entry, config_.objectives);
      bool inside = true;
      for (std::size_t d = 0; d < p.size(); ++d) inside = inside && p[d] < reference_[d];
      if (inside) out.push_back(std::move(p));
    }
    return out;
  }

  const SearchConfig& config_;
  const SearchContext& context_;
  ObjectiveScales scales_;
  std::vector<double> reference_;
  std::unordered_map<std::string, Metrics> cache_;
  std::vector<std::unique_ptr<Evaluator>> evaluators_;
};

}  // namespace

SearchResult run_single_stage(const SearchConfig& config, const SearchContext& context) {
  config.validate();
  return SearchRun(config, context).run();
}

std::vector<Genome> select_pivots(std::span<const FrontEntry> front, std::size_t count) {
  std::vector<Genome> picks;
  if (front.empty() || count == 0) return picks;
  auto key = [](const FrontEntry& e) { return encode(e.genome); };
  auto take = [&](const FrontEntry& e) {
    if (picks.size() < count &&
        std::find(picks.begin(), picks.end(), e.genome) == picks.end()) {
      picks.push_back(e.genome);
    }
  };

  take(*std::min_element(front.begin(), front.end(), [&](const auto& a, const auto& b) {
    if (a.miou_error != b.miou_error) return a.miou_error < b.miou_error;
    if (a.flops != b.flops) return a.flops < b.flops;
    return key(a) < key(b);
  }));
  take(*std::min_element(front.begin(), front.end(), [&](const auto& a, const auto& b) {
    if (a.flops != b.flops) return a.flops < b.flops;
    if (a.miou_error != b.miou_error) return a.miou_error < b.miou_error;
    return key(a) < key(b);
  }));

  double err_lo = front[0].miou_error, err_hi = err_lo;
  double flops_lo = static_cast<double>(front[0].flops), flops_hi = flops_lo;
  for (const auto& e : front) {
    err_lo = std::min(err_lo, e.miou_error);
    err_hi = std::max(err_hi, e.miou_error);
    flops_lo = std::min(flops_lo, static_cast<double>(e.flops));
    flops_hi = std::max(flops_hi, static_cast<double>(e.flops));
  }
  auto scaled = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  std::vector<std::pair<double, std::string>> order;
  std::map<std::string, const FrontEntry*> by_key;
  for (const auto& e : front) {
    const double score = scaled(e.miou_error, err_lo, err_hi) +
                         scaled(static_cast<double>(e.flops), flops_lo, flops_hi);
    order.emplace_back(score, key(e));
    by_key.emplace(key(e), &e);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [score, k] : order) take(*by_key.at(k));
  return picks;
}

TwoStageResult run_two_stage(const SearchConfig& stage1, const SearchConfig& stage2,
                             const SearchContext& context, std::size_t pivot_count) {
  if (stage1.mask_mode != MaskMode::SamplingOnly) {
    throw ConfigError("stage 1 must search the sampling genes only");
  }
  if (stage2.mask_mode != MaskMode::ArchitecturalOnly) {
    throw ConfigError("stage 2 must search the architectural genes only");
  }
  if (pivot_count == 0) throw ConfigError("at least one pivot is required");
  stage1.validate();
  stage2.validate();

  TwoStageResult out;
  out.stage1 = run_single_stage(stage1, context);
  if (out.stage1.final_front.empty()) throw Error("stage 1 produced an empty front");
  out.pivots = select_pivots(out.stage1.final_front, pivot_count);
  for (const auto& pivot : out.pivots) {
    SearchConfig cfg = stage2;
    cfg.mask_base = pivot;
    out.stage2.push_back(run_single_stage(cfg, context));
  }
  return out;
}

}  // namespace pcnas
