#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pcnas/errors.hpp"
#include "pcnas/search_space.hpp"

namespace pcnas {

/// Accuracy is checked after `check_fraction` of the batches; candidates whose
/// mean accuracy is below `accuracy_threshold` stop there.
struct EarlyStopPolicy {
  double check_fraction = 0.25;
  double accuracy_threshold = 0.30;
  std::size_t total_batches = 100;

  void validate() const;
  /// ceil(check_fraction * total_batches), at least 1.
  std::size_t checkpoint_batches() const;
};

struct EvaluationOutcome {
  double miou = 0.0;
  double miou_error = 1.0;
  std::size_t batches_used = 0;
  bool early_stopped = false;

  friend bool operator==(const EvaluationOutcome&, const EvaluationOutcome&) = default;
};

/// Constants of the deterministic accuracy surrogate. The supernet genome maps
/// to `base_error`; every departure from it adds a penalty.
struct SurrogateParams {
  double base_error = 0.3722;
  double ratio_penalty = 0.015;
  double stride_penalty = 0.004;
  double subsample_penalty = 0.010;
  std::array<int, kSubsamplingSites> baseline_subsampling = {4, 4, 4, 4, 2};
  double k_mitigation_span = 12.0;
  double batch_jitter_halfwidth = 0.059;
  double min_error = 0.05;
  double max_error = 0.95;
};

/// Pseudo mIoU error of a genome. Terms are accumulated in a fixed order
/// (ratios, strides, then subsampling per stage) so other implementations can
/// match it bit for bit.
double surrogate_error(const Genome& g, const SurrogateParams& params = {});

/// Per-batch accuracies for batches [batch_begin, batch_end). Batch b draws
/// the b-th output of splitmix64 seeded with fnv1a64(encode(g)) ^ run_seed,
/// so any sub-range reproduces the matching slice of the full list.
std::vector<double> surrogate_batch_accuracies(const Genome& g, std::uint64_t run_seed,
                                               std::size_t batch_begin, std::size_t batch_end,
                                               const SurrogateParams& params = {});

inline std::vector<double> surrogate_batch_accuracies(const Genome& g, std::uint64_t run_seed,
                                                      std::size_t total_batches) {
  return surrogate_batch_accuracies(g, run_seed, 0, total_batches);
}

/// Compensated mean of a batch-accuracy list.
double mean_accuracy(const std::vector<double>& accuracies);

class EvaluationError : public Error {
 public:
  enum class Kind { Timeout, MalformedResponse, IdMismatch, ProcessExit, Remote, Spawn };

  EvaluationError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(EvaluationError::Kind kind) noexcept;

/// Produces per-batch test accuracies for a candidate. One evaluator serves a
/// single run seed and test-set size.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::vector<double> evaluate_batches(const Genome& g, std::size_t batch_begin,
                                               std::size_t batch_end) = 0;
  virtual std::string name() const = 0;
};

class SurrogateEvaluator final : public Evaluator {
 public:
  SurrogateEvaluator(std::uint64_t run_seed, std::size_t total_batches,
                     SurrogateParams params = {});

  std::vector<double> evaluate_batches(const Genome& g, std::size_t batch_begin,
                                       std::size_t batch_end) override;
  std::string name() const override { return "builtin-surrogate"; }

 private:
  std::uint64_t run_seed_;
  std::size_t total_batches_;
  SurrogateParams params_;
};

/// Evaluates the checkpoint prefix first and stops if its mean accuracy is
/// below the threshold. A mean equal to the threshold continues. Transport
/// failures propagate as EvaluationError with the genome and phase attached.
EvaluationOutcome evaluate_with_early_stopping(Evaluator& evaluator, const Genome& g,
                                               const EarlyStopPolicy& policy);

}  // namespace pcnas
