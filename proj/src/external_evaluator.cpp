#include "pcnas/external_evaluator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "pcnas/json_io.hpp"

extern char** environ;

namespace pcnas {

using Clock = std::chrono::steady_clock;
using Kind = EvaluationError::Kind;

class ExternalEvaluator::Process {
 public:
  explicit Process(const std::string& command) {
    static std::once_flag ignore_sigpipe;
    std::call_once(ignore_sigpipe, [] { ::signal(SIGPIPE, SIG_IGN); });

    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) fail_spawn("pipe");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      fail_spawn("pipe");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    std::string shell_command = command;
    char* argv[] = {const_cast<char*>("sh"), const_cast<char*>("-c"), shell_command.data(),
                    nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      pid_ = -1;
      errno = rc;
      fail_spawn("posix_spawn");
    }
    stdin_fd_ = to_child[1];
    stdout_fd_ = from_child[0];
  }

  ~Process() { terminate(std::chrono::milliseconds(2000)); }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(stdin_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError(Kind::ProcessExit,
                              std::string("evaluator stdin closed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (remaining.count() <= 0) {
        throw EvaluationError(Kind::Timeout, "evaluator did not answer in time");
      }
      pollfd pfd{stdout_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(
                                            remaining.count(), 1'000'000'000LL)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError(Kind::ProcessExit, std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(stdout_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluationError(Kind::ProcessExit, std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) throw EvaluationError(Kind::ProcessExit, "evaluator process exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  /// Closes stdin, waits up to `grace`, then kills. Returns the exit code if
  /// the child exited on its own.
  std::optional<int> terminate(std::chrono::milliseconds grace) {
    if (pid_ <= 0) return std::nullopt;
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    stdin_fd_ = -1;
    const auto deadline = Clock::now() + grace;
    int status = 0;
    std::optional<int> code;
    for (;;) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        if (WIFEXITED(status)) code = WEXITSTATUS(status);
        break;
      }
      if (r < 0 && errno != EINTR) break;
      if (Clock::now() >= deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    stdout_fd_ = -1;
    pid_ = -1;
    return code;
  }

 private:
  [[noreturn]] static void fail_spawn(const char* what) {
    throw EvaluationError(Kind::Spawn, std::string(what) + ": " + std::strerror(errno));
  }

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
};

namespace {

Json parse_message(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error&) {
    throw EvaluationError(Kind::MalformedResponse, "evaluator sent non-JSON line: " + line);
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw EvaluationError(Kind::MalformedResponse, "evaluator message lacks a type: " + line);
  }
  return j;
}

}  // namespace

ExternalEvaluator::ExternalEvaluator(ExternalEvaluatorOptions options)
    : options_(std::move(options)) {
  ensure_started();
}

ExternalEvaluator::~ExternalEvaluator() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ExternalEvaluator::discard_process() {
  if (process_) process_->terminate(std::chrono::milliseconds(0));
  process_.reset();
}

void ExternalEvaluator::ensure_started() {
  if (process_) return;
  process_ = std::make_unique<Process>(options_.command);
  try {
    const Json hello{{"type", "hello"},
                     {"version", kWireProtocolVersion},
                     {"total_batches", options_.total_batches},
                     {"run_seed", options_.run_seed}};
    process_->write_line(hello.dump());
    const Json reply = parse_message(process_->read_line(Clock::now() + options_.timeout));
    if (reply.at("type") != "ready") {
      throw EvaluationError(Kind::MalformedResponse,
                            "expected ready, got " + reply.at("type").get<std::string>());
    }
    remote_name_ = reply.value("name", std::string("external"));
  } catch (...) {
    discard_process();
    throw;
  }
}

std::vector<double> ExternalEvaluator::evaluate_batches(const Genome& g, std::size_t batch_begin,
                                                        std::size_t batch_end) {
  ensure_started();
  const std::uint64_t id = next_id_++;
  try {
    const Json request{{"type", "evaluate"},
                       {"id", id},
                       {"genome", genome_to_json(g)},
                       {"batch_start", batch_begin},
                       {"batch_end", batch_end}};
    process_->write_line(request.dump());
    const Json reply = parse_message(process_->read_line(Clock::now() + options_.timeout));
    const auto& type = reply.at("type");
    if (!reply.contains("id") || !reply.at("id").is_number_unsigned() ||
        reply.at("id").get<std::uint64_t>() != id) {
      throw EvaluationError(Kind::IdMismatch,
                            "expected id " + std::to_string(id) + ", got " +
                                (reply.contains("id") ? reply.at("id").dump() : "none"));
    }
    if (type == "error") {
      // The process is still healthy; the handler below keeps it.
      throw EvaluationError(Kind::Remote, reply.value("message", std::string("unspecified")));
    }
    if (type != "result" || !reply.contains("batch_accuracies") ||
        !reply.at("batch_accuracies").is_array()) {
      throw EvaluationError(Kind::MalformedResponse, "unexpected response: " + reply.dump());
    }
    std::vector<double> acc;
    for (const auto& v : reply.at("batch_accuracies")) {
      if (!v.is_number()) {
        throw EvaluationError(Kind::MalformedResponse, "non-numeric accuracy in response");
      }
      const double a = v.get<double>();
      if (!(a >= 0.0 && a <= 1.0)) {
        throw EvaluationError(Kind::MalformedResponse, "accuracy outside [0, 1]: " + v.dump());
      }
      acc.push_back(a);
    }
    if (acc.size() != batch_end - batch_begin) {
      throw EvaluationError(Kind::MalformedResponse,
                            "expected " + std::to_string(batch_end - batch_begin) +
                                " accuracies, got " + std::to_string(acc.size()));
    }
    return acc;
  } catch (const EvaluationError& e) {
    if (e.kind() != Kind::Remote) discard_process();
    throw;
  }
}

std::optional<int> ExternalEvaluator::shutdown() {
  if (!process_) return std::nullopt;
  std::optional<int> code;
  try {
    process_->write_line(Json{{"type", "shutdown"}}.dump());
  } catch (const EvaluationError&) {
  }
  code = process_->terminate(std::chrono::milliseconds(5000));
  process_.reset();
  return code;
}

}  // namespace pcnas
