#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pcnas/evaluation.hpp"
#include "pcnas/rng.hpp"

using namespace pcnas;

namespace {

/// Replays a fixed accuracy list and records the requested ranges.
class ScriptedEvaluator final : public Evaluator {
 public:
  explicit ScriptedEvaluator(std::vector<double> acc) : acc_(std::move(acc)) {}

  std::vector<double> evaluate_batches(const Genome&, std::size_t begin,
                                       std::size_t end) override {
    calls.emplace_back(begin, end);
    return {acc_.begin() + static_cast<long>(begin), acc_.begin() + static_cast<long>(end)};
  }
  std::string name() const override { return "scripted"; }

  std::vector<std::pair<std::size_t, std::size_t>> calls;

 private:
  std::vector<double> acc_;
};

class FailingEvaluator final : public Evaluator {
 public:
  std::vector<double> evaluate_batches(const Genome&, std::size_t, std::size_t) override {
    throw EvaluationError(EvaluationError::Kind::Timeout, "no answer");
  }
  std::string name() const override { return "failing"; }
};

// Written from the surrogate definition.
double oracle_accuracy(const Genome& g, std::uint64_t seed, std::size_t b, double err) {
  const std::uint64_t s = fnv1a64(encode(g)) ^ seed;
  std::uint64_t z = s + (b + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  const double u = static_cast<double>(z >> 11) / 9007199254740992.0;
  const double a = (1.0 - err) + (2.0 * 0.059 * u - 0.059);
  return std::clamp(a, 0.0, 1.0);
}

}  // namespace

TEST_CASE("hash and stream primitives") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(splitmix64_at(0, 0) == 0xe220a8397b1dcdafULL);
  Rng rng(0);
  CHECK(rng.next_u64() == splitmix64_at(0, 0));
  CHECK(rng.next_u64() == splitmix64_at(0, 1));
}

TEST_CASE("surrogate error hand values") {
  CHECK(surrogate_error(supernet_genome()) == doctest::Approx(0.3722).epsilon(1e-15));
  Genome g = supernet_genome();
  g.filter_ratios.fill(0.4);
  CHECK(surrogate_error(g) == doctest::Approx(0.3722 + 0.015 * 13 * 0.6).epsilon(1e-12));
  CHECK(surrogate_error(g) == doctest::Approx(0.4892).epsilon(1e-12));
  Genome r = supernet_genome();
  r.subsampling[0] = 8;
  CHECK(surrogate_error(r) == doctest::Approx(0.3922).epsilon(1e-12));
  r.k_values[0] = 22;
  CHECK(surrogate_error(r) == doctest::Approx(0.3722 + 0.020 * 0.5).epsilon(1e-12));
  Genome s = supernet_genome();
  s.strides = {4, 4, 4, 4, 4, 4};
  CHECK(surrogate_error(s) == doctest::Approx(0.3722 + 0.004 * 18).epsilon(1e-12));
  Genome low = supernet_genome();
  low.subsampling = {2, 2, 2, 2, 2};
  CHECK(surrogate_error(low) == doctest::Approx(0.3722).epsilon(1e-15));
}

TEST_CASE("surrogate error is clamped") {
  SurrogateParams p;
  p.base_error = 0.01;
  CHECK(surrogate_error(supernet_genome(), p) == 0.05);
  p.base_error = 0.99;
  CHECK(surrogate_error(supernet_genome(), p) == 0.95);
}

TEST_CASE("batch accuracies match the oracle and slice consistently") {
  const auto space = SearchSpace::standard();
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto g = random_genome(space, StageMask::full(), rng);
    const std::uint64_t seed = rng.next_u64();
    const auto full = surrogate_batch_accuracies(g, seed, 100);
    REQUIRE(full.size() == 100);
    const double err = surrogate_error(g);
    for (std::size_t b = 0; b < 100; ++b) CHECK(full[b] == oracle_accuracy(g, seed, b, err));
    const auto part = surrogate_batch_accuracies(g, seed, 25, 60);
    CHECK(std::equal(part.begin(), part.end(), full.begin() + 25));
    CHECK(full == surrogate_batch_accuracies(g, seed, 100));
  }
}

TEST_CASE("jitter standard deviation brackets 0.034") {
  const auto acc = surrogate_batch_accuracies(supernet_genome(), 0, 10000);
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / (acc.size() - 1));
  CHECK(sd >= 0.030);
  CHECK(sd <= 0.038);
  CHECK(std::abs(mean - 0.6278) < 0.002);
}

TEST_CASE("early stopping arithmetic") {
  const EarlyStopPolicy policy;
  CHECK(policy.checkpoint_batches() == 25);
  const auto g = supernet_genome();

  ScriptedEvaluator low(std::vector<double>(100, 0.20));
  const auto a = evaluate_with_early_stopping(low, g, policy);
  CHECK(a.early_stopped);
  CHECK(a.batches_used == 25);
  CHECK(a.miou == doctest::Approx(0.20));
  CHECK(a.miou_error == doctest::Approx(0.80));
  CHECK(low.calls == std::vector<std::pair<std::size_t, std::size_t>>{{0, 25}});

  ScriptedEvaluator high(std::vector<double>(100, 0.62));
  const auto b = evaluate_with_early_stopping(high, g, policy);
  CHECK_FALSE(b.early_stopped);
  CHECK(b.batches_used == 100);
  CHECK(b.miou == doctest::Approx(0.62));
  CHECK(high.calls == std::vector<std::pair<std::size_t, std::size_t>>{{0, 25}, {25, 100}});

  ScriptedEvaluator boundary(std::vector<double>(100, 0.30));
  CHECK_FALSE(evaluate_with_early_stopping(boundary, g, policy).early_stopped);

  // Mean exactly 0.30 built from unequal values.
  std::vector<double> mixed(100, 0.9);
  for (std::size_t i = 0; i < 25; ++i) mixed[i] = i % 2 == 0 ? 0.1 : 0.5;
  mixed[24] = 0.3;
  ScriptedEvaluator mixed_eval(mixed);
  CHECK_FALSE(evaluate_with_early_stopping(mixed_eval, g, policy).early_stopped);
}

TEST_CASE("checkpoint rounding") {
  EarlyStopPolicy p;
  p.total_batches = 10;
  CHECK(p.checkpoint_batches() == 3);
  p.total_batches = 1;
  CHECK(p.checkpoint_batches() == 1);
  p.total_batches = 7;
  p.check_fraction = 1.0;
  CHECK(p.checkpoint_batches() == 7);
  p.check_fraction = 0.0;
  CHECK_THROWS(p.validate());
  p.check_fraction = 0.25;
  p.total_batches = 0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("transport failures carry the genome and phase") {
  FailingEvaluator ev;
  try {
    evaluate_with_early_stopping(ev, supernet_genome(), EarlyStopPolicy{});
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.kind() == EvaluationError::Kind::Timeout);
    const std::string what = e.what();
    CHECK(what.find("checkpoint") != std::string::npos);
    CHECK(what.find(encode(supernet_genome())) != std::string::npos);
  }
}

TEST_CASE("builtin surrogate evaluator") {
  SurrogateEvaluator ev(0, 100);
  const auto out = evaluate_with_early_stopping(ev, supernet_genome(), EarlyStopPolicy{});
  CHECK(std::abs(out.miou_error - 0.3722) < 0.01);
  CHECK(out.batches_used == 100);
  CHECK_THROWS_AS(ev.evaluate_batches(supernet_genome(), 90, 101), EvaluationError);

  Genome worst = supernet_genome();
  worst.filter_ratios.fill(0.4);
  worst.strides.fill(4);
  EarlyStopPolicy strict;
  strict.accuracy_threshold = 0.6;
  const auto stopped = evaluate_with_early_stopping(ev, worst, strict);
  CHECK(stopped.early_stopped);
  CHECK(stopped.batches_used == 25);
}

TEST_CASE("compensated mean") {
  CHECK(mean_accuracy({}) == 0.0);
  std::vector<double> v(1000, 0.1);
  CHECK(mean_accuracy(v) == doctest::Approx(0.1).epsilon(1e-15));
}
