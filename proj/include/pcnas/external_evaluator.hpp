#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcnas/evaluation.hpp"

namespace pcnas {

inline constexpr int kWireProtocolVersion = 1;

struct ExternalEvaluatorOptions {
  /// Shell command line; run with /bin/sh -c.
  std::string command;
  std::uint64_t run_seed = 0;
  std::size_t total_batches = 100;
  std::chrono::milliseconds timeout{300'000};
};

/// Client side of the newline-delimited JSON protocol spoken over a child
/// process's stdin/stdout:
///
///   -> {"type":"hello","version":1,"total_batches":B,"run_seed":S}
///   <- {"type":"ready","name":...}
///   -> {"type":"evaluate","id":n,"genome":{...},"batch_start":a,"batch_end":b}
///   <- {"type":"result","id":n,"batch_accuracies":[...]}
///    | {"type":"error","id":n,"message":...}
///   -> {"type":"shutdown"}
///
/// Any failure leaves the process unusable; it is killed and respawned (with a
/// fresh handshake) on the next request.
class ExternalEvaluator final : public Evaluator {
 public:
  /// Spawns the process and completes the handshake.
  explicit ExternalEvaluator(ExternalEvaluatorOptions options);
  ~ExternalEvaluator() override;

  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  std::vector<double> evaluate_batches(const Genome& g, std::size_t batch_begin,
                                       std::size_t batch_end) override;
  std::string name() const override { return remote_name_; }

  /// Sends shutdown and waits for the child. Returns its exit code, or
  /// nullopt if it had to be killed or no process was running.
  std::optional<int> shutdown();

 private:
  class Process;

  void ensure_started();
  void discard_process();

  ExternalEvaluatorOptions options_;
  std::unique_ptr<Process> process_;
  std::string remote_name_;
  std::uint64_t next_id_ = 1;
};

}  // namespace pcnas
