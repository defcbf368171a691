#include "pcnas/nsga2.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "pcnas/errors.hpp"

namespace pcnas {

std::string_view to_string(Objective objective) noexcept {
  switch (objective) {
    case Objective::MiouError: return "miou_error";
    case Objective::Params: return "params";
    case Objective::Flops: return "flops";
  }
  return "?";
}

Objective objective_from_string(std::string_view text) {
  if (text == "miou_error") return Objective::MiouError;
  if (text == "params") return Objective::Params;
  if (text == "flops") return Objective::Flops;
  throw ConfigError("unknown objective '" + std::string(text) + "'");
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.labels != b.labels || a.values.size() != b.values.size() ||
      a.values.size() != a.labels.size()) {
    throw Error("dominates: objective vectors have different labels");
  }
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] > b.values[i]) return false;
    if (a.values[i] < b.values[i]) strictly_better = true;
  }
  return strictly_better;
}

std::vector<std::vector<std::size_t>> fast_non_dominated_sort(
    std::span<const ObjectiveVector> objectives) {
  const std::size_t n = objectives.size();
  std::vector<std::vector<std::size_t>> dominated_by(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;

  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dominates(objectives[p], objectives[q])) {
        dominated_by[p].push_back(q);
        ++domination_count[q];
      } else if (dominates(objectives[q], objectives[p])) {
        dominated_by[q].push_back(p);
        ++domination_count[p];
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (domination_count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      for (std::size_t q : dominated_by[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

namespace {

std::vector<ObjectiveVector> collect_objectives(const Population& pop) {
  std::vector<ObjectiveVector> out;
  out.reserve(pop.individuals.size());
  for (const auto& ind : pop.individuals) {
    if (!ind.objectives) throw Error("population contains an unevaluated individual");
    out.push_back(*ind.objectives);
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> fast_non_dominated_sort(Population& pop) {
  const auto objectives = collect_objectives(pop);
  auto fronts = fast_non_dominated_sort(objectives);
  for (std::size_t rank = 0; rank < fronts.size(); ++rank) {
    for (std::size_t i : fronts[rank]) pop.individuals[i].rank = rank;
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const ObjectiveVector> front) {
  const std::size_t n = front.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), kInf);
    return distance;
  }
  const std::size_t m = front[0].values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t obj = 0; obj < m; ++obj) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return front[a].values[obj] < front[b].values[obj];
    });
    distance[order.front()] = kInf;
    distance[order.back()] = kInf;
    const double lo = front[order.front()].values[obj];
    const double hi = front[order.back()].values[obj];
    if (!(hi > lo)) continue;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      distance[order[k]] +=
          (front[order[k + 1]].values[obj] - front[order[k - 1]].values[obj]) / (hi - lo);
    }
  }
  return distance;
}

void assign_rank_and_crowding(Population& pop) {
  const auto fronts = fast_non_dominated_sort(pop);
  for (const auto& front : fronts) {
    std::vector<ObjectiveVector> members;
    members.reserve(front.size());
    for (std::size_t i : front) members.push_back(*pop.individuals[i].objectives);
    const auto distance = crowding_distance(members);
    for (std::size_t k = 0; k < front.size(); ++k) {
      pop.individuals[front[k]].crowding = distance[k];
    }
  }
}

std::weak_ordering crowded_compare(const Individual& a, const Individual& b) {
  if (!a.rank || !b.rank || !a.crowding || !b.crowding) {
    throw Error("crowded_compare: rank and crowding must be assigned");
  }
  if (*a.rank != *b.rank) return *a.rank <=> *b.rank;
  if (*a.crowding > *b.crowding) return std::weak_ordering::less;
  if (*a.crowding < *b.crowding) return std::weak_ordering::greater;
  const auto ka = encode(a.genome);
  const auto kb = encode(b.genome);
  if (ka < kb) return std::weak_ordering::less;
  if (kb < ka) return std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

std::size_t survivor_count(std::size_t population_size) noexcept {
  return (population_size + 1) / 2;
}

Population next_generation(const Population& pop, const SearchSpace& space,
                           const StageMask& mask, Rng& rng, double mutation_prob) {
  const std::size_t n = pop.individuals.size();
  if (n < 2) throw ConfigError("population size must be at least 2");

  Population ranked = pop;
  assign_rank_and_crowding(ranked);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return crowded_compare(ranked.individuals[a], ranked.individuals[b]) < 0;
  });

  Population next;
  next.generation = pop.generation + 1;
  next.individuals.reserve(n);
  const std::size_t keep = survivor_count(n);
  for (std::size_t k = 0; k < keep; ++k) next.individuals.push_back(ranked.individuals[order[k]]);

  // Parents are drawn from the survivors only, which sit in crowded order.
  auto tournament = [&]() -> const Individual& {
    const std::size_t a = rng.uniform_index(keep);
    const std::size_t b = rng.uniform_index(keep);
    return next.individuals[std::min(a, b)];
  };
  std::vector<Individual> offspring;
  while (keep + offspring.size() < n) {
    const Genome p1 = tournament().genome;
    const Genome p2 = tournament().genome;
    auto [c1, c2] = crossover(p1, p2, mask, rng);
    for (const Genome* child : {&c1, &c2}) {
      if (keep + offspring.size() == n) break;
      offspring.push_back(Individual{mutate(*child, space, mask, rng, mutation_prob), {}, {}, {}});
    }
  }
  for (auto& ind : next.individuals) {
    ind.rank.reset();
    ind.crowding.reset();
  }
  for (auto& child : offspring) next.individuals.push_back(std::move(child));
  return next;
}

}  // namespace pcnas
