#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pcnas/rng.hpp"
#include "pcnas/search_space.hpp"

namespace pcnas {

enum class Objective { MiouError, Params, Flops };

std::string_view to_string(Objective objective) noexcept;
Objective objective_from_string(std::string_view text);

/// Minimization objectives sharing one label list per population.
struct ObjectiveVector {
  std::vector<Objective> labels;
  std::vector<double> values;

  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

/// Pareto dominance for minimization. Throws Error on mismatched labels.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

struct Individual {
  Genome genome;
  std::optional<ObjectiveVector> objectives;
  std::optional<std::size_t> rank;
  std::optional<double> crowding;
};

struct Population {
  std::vector<Individual> individuals;
  std::size_t generation = 1;
};

/// Fronts as index lists, front 0 first. Each front lists indices ascending.
std::vector<std::vector<std::size_t>> fast_non_dominated_sort(
    std::span<const ObjectiveVector> objectives);

/// Sorts a fully evaluated population and stores each individual's rank.
std::vector<std::vector<std::size_t>> fast_non_dominated_sort(Population& pop);

/// Crowding distance of each member of one front. Boundary members get
/// +infinity; objectives with zero range contribute nothing.
std::vector<double> crowding_distance(std::span<const ObjectiveVector> front);

/// Sets rank and crowding on every individual.
void assign_rank_and_crowding(Population& pop);

/// Lower rank first, then larger crowding, then smaller canonical genome
/// string. Throws Error if rank or crowding is missing.
std::weak_ordering crowded_compare(const Individual& a, const Individual& b);

/// Number of individuals carried over unchanged: ceil(N / 2).
std::size_t survivor_count(std::size_t population_size) noexcept;

/// Keeps the best ceil(N/2) individuals by crowded comparison and fills the
/// rest with offspring bred from them by binary tournament, uniform crossover
/// and mutation. Offspring carry no objectives.
Population next_generation(const Population& pop, const SearchSpace& space,
                           const StageMask& mask, Rng& rng,
                           double mutation_prob = kDefaultMutationProb);

}  // namespace pcnas
