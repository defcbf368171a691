#include "pcnas/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "pcnas/rng.hpp"

namespace pcnas {

namespace {

// Means this close below the threshold are treated as equal to it, so decimal
// thresholds such as 0.30 compare as written.
constexpr double kThresholdSlack = 1e-12;
constexpr double kSmallestK = 16.0;

}  // namespace

void EarlyStopPolicy::validate() const {
  if (!(check_fraction > 0.0 && check_fraction < 1.0)) {
    throw ConfigError("early stop check_fraction must lie in (0, 1)");
  }
  if (!(accuracy_threshold >= 0.0 && accuracy_threshold <= 1.0)) {
    throw ConfigError("early stop accuracy_threshold must lie in [0, 1]");
  }
  if (total_batches == 0) throw ConfigError("early stop total_batches must be positive");
}

std::size_t EarlyStopPolicy::checkpoint_batches() const {
  const double exact = check_fraction * static_cast<double>(total_batches);
  const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(n, 1, total_batches);
}

double surrogate_error(const Genome& g, const SurrogateParams& p) {
  double error = p.base_error;

  double ratio_sum = 0.0;
  for (double r : g.filter_ratios) ratio_sum += 1.0 - r;
  error += p.ratio_penalty * ratio_sum;

  double stride_sum = 0.0;
  for (int s : g.strides) stride_sum += static_cast<double>(s - 1);
  error += p.stride_penalty * stride_sum;

  for (std::size_t k = 0; k < kSubsamplingSites; ++k) {
    const double excess =
        std::max(0.0, static_cast<double>(g.subsampling[k] - p.baseline_subsampling[k]));
    const double mitigation = 1.0 - (static_cast<double>(g.k_values[k]) - kSmallestK) /
                                        p.k_mitigation_span;
    error += p.subsample_penalty * (excess / 2.0) * mitigation;
  }
  return std::clamp(error, p.min_error, p.max_error);
}

std::vector<double> surrogate_batch_accuracies(const Genome& g, std::uint64_t run_seed,
                                               std::size_t batch_begin, std::size_t batch_end,
                                               const SurrogateParams& params) {
  const double centre = 1.0 - surrogate_error(g, params);
  const double h = params.batch_jitter_halfwidth;
  const std::uint64_t seed = fnv1a64(encode(g)) ^ run_seed;
  std::vector<double> out;
  out.reserve(batch_end > batch_begin ? batch_end - batch_begin : 0);
  for (std::size_t b = batch_begin; b < batch_end; ++b) {
    const double u = unit_interval(splitmix64_at(seed, b));
    const double jitter = 2.0 * h * u - h;
    out.push_back(std::clamp(centre + jitter, 0.0, 1.0));
  }
  return out;
}

double mean_accuracy(const std::vector<double>& accuracies) {
  if (accuracies.empty()) return 0.0;
  // Neumaier summation.
  double sum = 0.0;
  double carry = 0.0;
  for (double v : accuracies) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + carry) / static_cast<double>(accuracies.size());
}

const char* to_string(EvaluationError::Kind kind) noexcept {
  switch (kind) {
    case EvaluationError::Kind::Timeout: return "timeout";
    case EvaluationError::Kind::MalformedResponse: return "malformed-response";
    case EvaluationError::Kind::IdMismatch: return "id-mismatch";
    case EvaluationError::Kind::ProcessExit: return "process-exit";
    case EvaluationError::Kind::Remote: return "remote-error";
    case EvaluationError::Kind::Spawn: return "spawn-failure";
  }
  return "?";
}

SurrogateEvaluator::SurrogateEvaluator(std::uint64_t run_seed, std::size_t total_batches,
                                       SurrogateParams params)
    : run_seed_(run_seed), total_batches_(total_batches), params_(params) {}

std::vector<double> SurrogateEvaluator::evaluate_batches(const Genome& g, std::size_t batch_begin,
                                                         std::size_t batch_end) {
  if (!(batch_begin < batch_end && batch_end <= total_batches_)) {
    throw EvaluationError(EvaluationError::Kind::Remote,
                          "batch range [" + std::to_string(batch_begin) + ", " +
                              std::to_string(batch_end) + ") outside test set of " +
                              std::to_string(total_batches_));
  }
  return surrogate_batch_accuracies(g, run_seed_, batch_begin, batch_end, params_);
}

EvaluationOutcome evaluate_with_early_stopping(Evaluator& evaluator, const Genome& g,
                                               const EarlyStopPolicy& policy) {
  policy.validate();
  const std::size_t checkpoint = policy.checkpoint_batches();
  const std::size_t total = policy.total_batches;

  auto fetch = [&](std::size_t begin, std::size_t end, const char* phase) {
    std::vector<double> acc;
    try {
      acc = evaluator.evaluate_batches(g, begin, end);
    } catch (const EvaluationError& e) {
      throw EvaluationError(e.kind(), std::string(phase) + " evaluation of " + encode(g) +
                                          " failed: " + e.what());
    }
    if (acc.size() != end - begin) {
      throw EvaluationError(EvaluationError::Kind::MalformedResponse,
                            std::string(phase) + " evaluation of " + encode(g) + " returned " +
                                std::to_string(acc.size()) + " accuracies, expected " +
                                std::to_string(end - begin));
    }
    return acc;
  };

  auto accuracies = fetch(0, checkpoint, "checkpoint");
  const double early_mean = mean_accuracy(accuracies);
  EvaluationOutcome outcome;
  if (early_mean < policy.accuracy_threshold - kThresholdSlack) {
    outcome.miou = early_mean;
    outcome.batches_used = checkpoint;
    outcome.early_stopped = true;
  } else {
    if (checkpoint < total) {
      const auto rest = fetch(checkpoint, total, "remaining");
      accuracies.insert(accuracies.end(), rest.begin(), rest.end());
    }
    outcome.miou = mean_accuracy(accuracies);
    outcome.batches_used = total;
  }
  outcome.miou_error = 1.0 - outcome.miou;
  return outcome;
}

}  // namespace pcnas
