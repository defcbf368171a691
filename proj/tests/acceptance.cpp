// Acceptance gate: one PASS/FAIL line per primary criterion. Tolerances and
// runtime limits are pinned below. Exit status is non-zero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pcnas/cost_model.hpp"
#include "pcnas/engine.hpp"
#include "pcnas/evaluation.hpp"
#include "pcnas/nsga2.hpp"
#include "pcnas/report.hpp"
#include "pcnas/search_space.hpp"

using namespace pcnas;

namespace {

constexpr double kC1Seconds = 1.0;
constexpr double kC2Seconds = 10.0;
constexpr double kC6Seconds = 30.0;
constexpr double kCrowdingTolerance = 1e-12;
constexpr double kJitterSdLow = 0.030;
constexpr double kJitterSdHigh = 0.038;
constexpr double kParamsCalibration = 0.10;
constexpr double kFlopsCalibration = 0.15;
constexpr double kTargetParams = 5.008e6;
constexpr double kTargetFlops = 17.03e9;
constexpr double kBudgetRatio = 0.87;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body,
            double limit_seconds = 0.0) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0.0 && secs >= limit_seconds) {
    o.pass = false;
    o.detail += "; exceeded " + std::to_string(limit_seconds) + " s";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s %s: %s [%.3f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(),
              secs);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ObjectiveVector ov(std::vector<double> v) {
  ObjectiveVector o;
  o.labels.assign(v.size(), Objective::MiouError);
  o.labels[1] = Objective::Params;
  if (v.size() == 3) o.labels[2] = Objective::Flops;
  o.values = std::move(v);
  return o;
}

bool oracle_dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    strict = strict || a[i] < b[i];
  }
  return strict;
}

// Rank of each point = length of the longest chain of dominators above it.
std::vector<std::vector<std::size_t>> oracle_fronts(const std::vector<ObjectiveVector>& p) {
  const std::size_t n = p.size();
  std::vector<std::size_t> rank(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (oracle_dominates(p[j].values, p[i].values) && rank[i] < rank[j] + 1) {
          rank[i] = rank[j] + 1;
          changed = true;
        }
      }
    }
  }
  std::vector<std::vector<std::size_t>> fronts;
  for (std::size_t i = 0; i < n; ++i) {
    if (fronts.size() <= rank[i]) fronts.resize(rank[i] + 1);
    fronts[rank[i]].push_back(i);
  }
  return fronts;
}

std::vector<double> oracle_crowding(const std::vector<ObjectiveVector>& f) {
  const std::size_t n = f.size();
  const double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) return std::vector<double>(n, inf);
  std::vector<double> d(n, 0.0);
  for (std::size_t m = 0; m < f[0].values.size(); ++m) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return f[a].values[m] != f[b].values[m] ? f[a].values[m] < f[b].values[m] : a < b;
    });
    const double lo = f[idx[0]].values[m];
    const double hi = f[idx[n - 1]].values[m];
    d[idx[0]] = d[idx[n - 1]] = inf;
    if (hi <= lo) continue;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      d[idx[k]] += (f[idx[k + 1]].values[m] - f[idx[k - 1]].values[m]) / (hi - lo);
    }
  }
  return d;
}

class StreamEvaluator final : public Evaluator {
 public:
  explicit StreamEvaluator(std::vector<double> s) : s_(std::move(s)) {}
  std::vector<double> evaluate_batches(const Genome&, std::size_t a, std::size_t b) override {
    consumed = std::max(consumed, b);
    return {s_.begin() + static_cast<long>(a), s_.begin() + static_cast<long>(b)};
  }
  std::string name() const override { return "stream"; }
  std::size_t consumed = 0;

 private:
  std::vector<double> s_;
};

Outcome c1_cardinality() {
  const auto space = SearchSpace::standard();
  const auto base = supernet_genome();
  const auto s = cardinality(space, StageMask{MaskMode::SamplingOnly, base});
  const auto a = cardinality(space, StageMask{MaskMode::ArchitecturalOnly, base});
  const auto f = cardinality(space, StageMask{MaskMode::Full, base});
  const bool ok = s == 4'294'967'296ULL && a == 67'108'864ULL && f == 288'230'376'151'711'744ULL;
  return {ok, "sampling " + std::to_string(s) + ", architectural " + std::to_string(a) +
                  ", full " + std::to_string(f)};
}

Outcome c2_nsga2() {
  Rng rng(2);
  std::size_t sort_mismatch = 0;
  std::size_t crowd_mismatch = 0;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.uniform_index(64);
    const std::size_t m = t % 2 == 0 ? 2 : 3;
    const bool ties = t % 4 == 1;
    std::vector<ObjectiveVector> pts;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v;
      for (std::size_t k = 0; k < m; ++k) {
        v.push_back(ties ? static_cast<double>(rng.uniform_index(5)) : rng.uniform01());
      }
      pts.push_back(ov(v));
    }
    const auto fronts = fast_non_dominated_sort(pts);
    if (fronts != oracle_fronts(pts)) ++sort_mismatch;
    for (const auto& front : fronts) {
      std::vector<ObjectiveVector> members;
      for (auto i : front) members.push_back(pts[i]);
      const auto got = crowding_distance(members);
      const auto want = oracle_crowding(members);
      for (std::size_t k = 0; k < got.size(); ++k) {
        if (std::isinf(want[k]) || std::isinf(got[k])) {
          if (std::isinf(want[k]) != std::isinf(got[k])) ++crowd_mismatch;
          continue;
        }
        const double diff = std::abs(got[k] - want[k]);
        worst = std::max(worst, diff);
        if (diff > kCrowdingTolerance) ++crowd_mismatch;
      }
    }
  }
  return {sort_mismatch == 0 && crowd_mismatch == 0,
          "200 populations; sort mismatches " + std::to_string(sort_mismatch) +
              ", crowding mismatches " + std::to_string(crowd_mismatch) +
              fmt(", max crowding error %.1e", worst)};
}

Outcome c3_early_stop() {
  Rng rng(3);
  std::size_t wrong = 0;
  std::size_t stopped = 0;
  std::size_t boundary = 0;
  for (int t = 0; t < 1000; ++t) {
    EarlyStopPolicy policy;
    policy.total_batches = 4 + rng.uniform_index(197);
    const std::size_t cp = static_cast<std::size_t>(std::ceil(0.25 * policy.total_batches));
    // Target checkpoint mean: below, exactly at, or above the threshold.
    const int kind = t % 3;
    const double target = kind == 0 ? 0.29 * rng.uniform01()
                        : kind == 1 ? 0.30
                                    : 0.31 + 0.69 * rng.uniform01();
    std::vector<double> s(policy.total_batches);
    // Symmetric pairs around the target keep the checkpoint mean exact.
    for (std::size_t i = 0; i + 1 < cp; i += 2) {
      const double d = std::min(target, 1.0 - target) * rng.uniform01();
      s[i] = target + d;
      s[i + 1] = target - d;
    }
    if (cp % 2 == 1) s[cp - 1] = target;
    for (std::size_t i = cp; i < s.size(); ++i) s[i] = rng.uniform01();
    StreamEvaluator ev(s);
    const auto out = evaluate_with_early_stopping(ev, supernet_genome(), policy);
    const bool expect_stop = target < 0.30;
    const std::size_t expect_used = expect_stop ? cp : policy.total_batches;
    if (out.early_stopped != expect_stop || out.batches_used != expect_used ||
        ev.consumed != expect_used) {
      ++wrong;
    }
    stopped += out.early_stopped;
    boundary += kind == 1;
  }
  return {wrong == 0, "1000 streams (" + std::to_string(stopped) + " stopped, " +
                          std::to_string(boundary) + " at exactly 0.30 continued); " +
                          std::to_string(wrong) + " wrong"};
}

Outcome c4_jitter() {
  const auto acc = surrogate_batch_accuracies(supernet_genome(), 0, 10000);
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / static_cast<double>(acc.size() - 1));
  return {sd >= kJitterSdLow && sd <= kJitterSdHigh,
          fmt("std %.5f over 10000 batches, band [%.3f, %.3f]", sd, kJitterSdLow, kJitterSdHigh)};
}

Outcome c5_costs() {
  const auto space = SearchSpace::standard();
  const auto desc = reference_supernet();
  Rng rng(5);
  std::size_t violations = 0;
  std::size_t pairs = 0;
  while (pairs < 1000) {
    const auto g = random_genome(space, StageMask::full(), rng);
    const std::size_t gene = rng.uniform_index(kGeneCount);
    const auto& values = space.gene(gene).allowed_values;
    const int idx = space.value_index(gene, g.gene(gene));
    if (idx + 1 >= static_cast<int>(values.size())) continue;
    Genome h = g;
    h.set_gene(gene, values[rng.uniform_index(values.size() - idx - 1) + idx + 1]);
    ++pairs;
    const auto lo = compute_costs(g, desc);
    const auto hi = compute_costs(h, desc);
    switch (locate_gene(gene).first) {
      case GeneGroup::FilterRatio: violations += hi.params < lo.params; break;
      case GeneGroup::Stride:
      case GeneGroup::Subsampling:
        violations += hi.params != lo.params;
        violations += hi.flops > lo.flops;
        break;
      case GeneGroup::K: violations += hi.params != lo.params; break;
    }
  }
  const auto full = compute_costs(supernet_genome(), desc);
  const double dp = static_cast<double>(full.params) / kTargetParams - 1.0;
  const double df = static_cast<double>(full.flops) / kTargetFlops - 1.0;
  const bool calibrated = std::abs(dp) <= kParamsCalibration && std::abs(df) <= kFlopsCalibration;
  std::string detail = std::to_string(pairs) + " single-gene pairs, " +
                       std::to_string(violations) + " violations; calibration (soft) ";
  detail += fmt("params %.3fM (%+.1f%%), flops %.2fG (%+.1f%%)", full.params / 1e6, 100 * dp,
                full.flops / 1e9, 100 * df);
  detail += calibrated ? " within tolerance" : " OUTSIDE tolerance (reported only)";
  return {violations == 0, detail};
}

Outcome c6_end_to_end() {
  const auto space = SearchSpace::standard();
  const auto desc = reference_supernet();
  SearchConfig c;
  c.population_size = 8;
  c.max_generations = 15;
  c.run_seed = 2024;
  c.hd_window = 0;  // run all 15 generations
  const auto a = run_single_stage(c, SearchContext{space, desc});
  const auto b = run_single_stage(c, SearchContext{space, desc});
  const bool same = result_to_json(a).dump() == result_to_json(b).dump();
  const double hv1 = a.history.front().hypervolume;
  const double hvn = a.history.back().hypervolume;
  bool nondominated = true;
  for (const auto& x : a.final_front) {
    for (const auto& y : a.final_front) {
      nondominated = nondominated && !(x.miou_error <= y.miou_error && x.params <= y.params &&
                                       (x.miou_error < y.miou_error || x.params < y.params));
    }
  }
  return {same && nondominated && hvn >= hv1 && a.history.size() == 15,
          fmt("HV gen1 %.4f -> gen15 %.4f", hv1, hvn) + ", front " +
              std::to_string(a.final_front.size()) + (nondominated ? " non-dominated" : " DOMINATED") +
              (same ? ", byte-identical reruns" : ", NON-DETERMINISTIC")};
}

Outcome c7_budget() {
  const auto space = SearchSpace::standard();
  const auto desc = reference_supernet();
  SearchConfig single;
  single.population_size = 15;
  single.max_generations = 60;
  SearchConfig s1;
  s1.population_size = 12;
  s1.max_generations = 20;
  s1.mask_mode = MaskMode::SamplingOnly;
  s1.objectives = {Objective::MiouError, Objective::Flops};
  SearchConfig s2 = s1;
  s2.max_generations = 15;
  s2.mask_mode = MaskMode::ArchitecturalOnly;
  s2.objectives = {Objective::MiouError, Objective::Params};
  for (auto* cfg : {&single, &s1, &s2}) cfg->hd_window = 0;

  const std::size_t single_budget = nominal_evaluation_budget(single);
  const std::size_t two_budget = nominal_evaluation_budget(s1) + 3 * nominal_evaluation_budget(s2);
  const double ratio = static_cast<double>(two_budget) / static_cast<double>(single_budget);

  const auto one = run_single_stage(single, SearchContext{space, desc});
  const auto two = run_two_stage(s1, s2, SearchContext{space, desc}, 3);
  std::size_t two_calls = two.stage1.total_evaluations;
  for (const auto& r : two.stage2) two_calls += r.total_evaluations;

  std::ostringstream d;
  d << "candidate evaluations two-stage " << two_budget << " vs single-stage " << single_budget
    << fmt(" (%.1f%%, limit %.0f%%)", 100 * ratio, 100 * kBudgetRatio)
    << "; evaluator calls after caching " << two_calls << " vs " << one.total_evaluations
    << fmt(" (%.1f%%, informational)", 100.0 * two_calls / one.total_evaluations);
  return {ratio <= kBudgetRatio && two.pivots.size() == 3, d.str()};
}

}  // namespace

int main() {
  report("C1", "search-space cardinalities", c1_cardinality, kC1Seconds);
  report("C2", "NSGA-II oracle equivalence", c2_nsga2, kC2Seconds);
  report("C3", "early-stopping policy", c3_early_stop);
  report("C4", "surrogate jitter statistics", c4_jitter);
  report("C5", "cost-model properties", c5_costs);
  report("C6", "end-to-end desk-scale search", c6_end_to_end, kC6Seconds);
  report("C7", "two-stage vs single-stage budget", c7_budget);
  std::printf("N/A  C8 trained mIoU and fine-tuning results: not reproducible without S3DIS "
              "training; out of scope, covered by the surrogate property suite\n");
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
