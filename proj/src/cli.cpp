#include "pcnas/cli.hpp"

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "pcnas/engine.hpp"
#include "pcnas/external_evaluator.hpp"
#include "pcnas/json_io.hpp"
#include "pcnas/report.hpp"
#include "pcnas/version.hpp"

namespace pcnas {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSeedEnv = "SSS3D_SEED";

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> population;
  std::optional<std::size_t> generations;
  std::optional<std::size_t> jobs;
  std::optional<std::string> evaluator_cmd;
  std::optional<long long> timeout_ms;
  std::optional<std::string> supernet_path;
  std::size_t pivots = 0;
};

struct EvalFlags {
  std::string genome;
  std::optional<std::string> supernet_path;
  std::optional<std::string> evaluator_cmd;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<double> check_fraction;
  std::optional<std::size_t> total_batches;
  std::optional<long long> timeout_ms;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv(kSeedEnv);
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (errno != 0 || *end != '\0' || text[0] == '-') {
    throw ConfigError(std::string(kSeedEnv) + " is not an unsigned integer: " + text);
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("failed writing " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string());
  }
}

/// A config's "supernet" entry is a path relative to the config file.
struct LoadedSupernet {
  SupernetDescription desc = reference_supernet();
  std::optional<Json> json;
};

LoadedSupernet load_supernet(const std::optional<std::string>& path) {
  LoadedSupernet s;
  if (!path) return s;
  Json j = read_json_file(*path);
  try {
    s.desc = supernet_from_json(j);
  } catch (const Error& e) {
    throw ConfigError("supernet description " + *path + ": " + e.what());
  }
  s.json = std::move(j);
  return s;
}

std::optional<std::string> supernet_path_from(const Json& config, const std::string& config_path) {
  if (!config.contains("supernet")) return std::nullopt;
  if (!config.at("supernet").is_string()) throw ConfigError("supernet must be a file path");
  fs::path p = config.at("supernet").get<std::string>();
  if (p.is_relative()) p = fs::path(config_path).parent_path() / p;
  return p.string();
}

Json without(Json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

void apply_flags(SearchConfig& c, const CommonFlags& f, bool sizes) {
  if (f.seed) {
    c.run_seed = *f.seed;
  } else if (auto s = env_seed()) {
    c.run_seed = *s;
  }
  if (sizes && f.population) c.population_size = *f.population;
  if (sizes && f.generations) c.max_generations = *f.generations;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.evaluator_cmd) {
    c.evaluator.kind = EvaluatorSpec::Kind::External;
    c.evaluator.command = *f.evaluator_cmd;
  }
  if (f.timeout_ms) c.evaluator.timeout = std::chrono::milliseconds(*f.timeout_ms);
  c.validate();
}

/// Spawns the external evaluator once so a broken command fails fast.
void preflight(const SearchConfig& c) {
  if (c.evaluator.kind != EvaluatorSpec::Kind::External) return;
  auto ev = make_evaluator(c);
  if (auto* ext = dynamic_cast<ExternalEvaluator*>(ev.get())) ext->shutdown();
}

void write_stage_dir(const fs::path& dir, const SearchResult& r) {
  prepare_dir(dir / "fronts");
  for (const auto& rec : r.history) {
    char name[32];
    std::snprintf(name, sizeof name, "gen_%03zu.csv", rec.generation);
    std::ostringstream csv;
    write_front_csv(csv, rec.front);
    write_text(dir / "fronts" / name, csv.str());
  }
  Json summary = result_to_json(r);
  summary["budget"] = Json{{"nominal_evaluations", nominal_evaluation_budget(r.config)},
                           {"max_evaluations", max_evaluations(r.config)}};
  write_json(dir / "summary.json", summary);
}

Json manifest(const std::string& command, const std::string& config_path, const fs::path& out,
              const std::string& started, std::uint64_t seed) {
  return Json{{"tool", "pcnas"},
              {"version", kVersion},
              {"command", command},
              {"config_path", config_path},
              {"output_dir", out.string()},
              {"started_at", started},
              {"finished_at", utc_timestamp()},
              {"run_seed", seed}};
}

bool all_faulted(const SearchResult& r) {
  return r.total_evaluations > 0 && r.evaluator_faults == r.total_evaluations;
}

int cmd_search(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const auto started = utc_timestamp();
  const Json file = read_json_file(f.config_path);
  if (!file.is_object()) throw ConfigError("configuration must be a JSON object");
  const auto supernet = load_supernet(
      f.supernet_path ? f.supernet_path : supernet_path_from(file, f.config_path));
  SearchConfig config = config_from_json(without(file, {"supernet"}));
  apply_flags(config, f, true);

  const fs::path dir = f.out_dir;
  prepare_dir(dir);
  Json stored = config_to_json(config);
  if (supernet.json) {
    write_json(dir / "supernet.json", *supernet.json);
    stored["supernet"] = "supernet.json";
  }
  write_json(dir / "config.json", stored);

  try {
    preflight(config);
  } catch (const EvaluationError& e) {
    err << "pcnas: evaluator failed to start: " << e.what() << "\n";
    return kExitEvaluator;
  }
  const auto space = SearchSpace::standard();
  const auto result = run_single_stage(config, SearchContext{space, supernet.desc});
  write_stage_dir(dir, result);
  write_json(dir / "manifest.json",
             manifest("search", f.config_path, dir, started, config.run_seed));
  out << "generations " << result.history.size() << ", evaluations "
      << result.total_evaluations << ", final front " << result.final_front.size() << "\n";
  if (all_faulted(result)) {
    err << "pcnas: every evaluation failed\n";
    return kExitEvaluator;
  }
  return kExitOk;
}

SearchConfig two_stage_default(bool first) {
  SearchConfig c;
  c.population_size = 12;
  if (first) {
    c.max_generations = 20;
    c.mask_mode = MaskMode::SamplingOnly;
    c.objectives = {Objective::MiouError, Objective::Flops};
  } else {
    c.max_generations = 15;
    c.mask_mode = MaskMode::ArchitecturalOnly;
    c.objectives = {Objective::MiouError, Objective::Params};
  }
  return c;
}

int cmd_two_stage(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const auto started = utc_timestamp();
  Json file = Json::object();
  if (!f.config_path.empty()) file = read_json_file(f.config_path);
  if (!file.is_object()) throw ConfigError("configuration must be a JSON object");
  const auto supernet = load_supernet(
      f.supernet_path ? f.supernet_path : supernet_path_from(file, f.config_path));

  const Json shared = without(file, {"stage1", "stage2", "pivots", "supernet"});
  SearchConfig s1 = config_from_json(shared, two_stage_default(true));
  SearchConfig s2 = config_from_json(shared, two_stage_default(false));
  if (file.contains("stage1")) s1 = config_from_json(file.at("stage1"), s1);
  if (file.contains("stage2")) s2 = config_from_json(file.at("stage2"), s2);
  std::size_t pivots = 3;
  if (file.contains("pivots")) {
    if (!file.at("pivots").is_number_unsigned()) throw ConfigError("pivots must be a count");
    pivots = file.at("pivots").get<std::size_t>();
  }
  if (f.pivots > 0) pivots = f.pivots;
  if (pivots == 0) throw ConfigError("pivots must be at least 1");
  apply_flags(s1, f, true);
  apply_flags(s2, f, true);

  const fs::path dir = f.out_dir;
  prepare_dir(dir);
  Json stored{{"stage1", config_to_json(s1)}, {"stage2", config_to_json(s2)}, {"pivots", pivots}};
  if (supernet.json) {
    write_json(dir / "supernet.json", *supernet.json);
    stored["supernet"] = "supernet.json";
  }
  write_json(dir / "config.json", stored);

  try {
    preflight(s1);
  } catch (const EvaluationError& e) {
    err << "pcnas: evaluator failed to start: " << e.what() << "\n";
    return kExitEvaluator;
  }
  const auto space = SearchSpace::standard();
  const auto result = run_two_stage(s1, s2, SearchContext{space, supernet.desc}, pivots);

  write_stage_dir(dir / "stage1", result.stage1);
  Json pivot_list = Json::array();
  Json stage2 = Json::array();
  std::size_t evaluations = result.stage1.total_evaluations;
  std::size_t nominal = nominal_evaluation_budget(result.stage1.config);
  bool faulted = all_faulted(result.stage1);
  for (std::size_t i = 0; i < result.stage2.size(); ++i) {
    const auto& r = result.stage2[i];
    const auto sub = "pivot_" + std::to_string(i + 1);
    write_stage_dir(dir / sub, r);
    pivot_list.push_back(encode(result.pivots[i]));
    stage2.push_back(Json{{"directory", sub},
                          {"pivot", encode(result.pivots[i])},
                          {"generations_run", r.history.size()},
                          {"total_evaluations", r.total_evaluations},
                          {"final_front_size", r.final_front.size()}});
    evaluations += r.total_evaluations;
    nominal += nominal_evaluation_budget(r.config);
    faulted = faulted && all_faulted(r);
  }
  const Json summary{
      {"stage1",
       {{"directory", "stage1"},
        {"population_size", s1.population_size},
        {"max_generations", s1.max_generations},
        {"generations_run", result.stage1.history.size()},
        {"total_evaluations", result.stage1.total_evaluations},
        {"final_front_size", result.stage1.final_front.size()}}},
      {"stage2_config",
       {{"population_size", s2.population_size}, {"max_generations", s2.max_generations}}},
      {"pivots", pivot_list},
      {"stage2", stage2},
      {"total_evaluations", evaluations},
      {"nominal_evaluations", nominal}};
  write_json(dir / "summary.json", summary);
  write_json(dir / "manifest.json",
             manifest("two-stage", f.config_path, dir, started, s1.run_seed));
  out << "pivots " << result.pivots.size() << ", evaluations " << evaluations << "\n";
  if (faulted) {
    err << "pcnas: every evaluation failed\n";
    return kExitEvaluator;
  }
  return kExitOk;
}

/// A genome argument is a file holding JSON (object or canonical string) or
/// bare canonical text; an argument that is not a file is decoded directly.
Genome load_genome(const std::string& arg) {
  std::string text;
  if (fs::is_regular_file(arg)) {
    std::ifstream f(arg);
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  } else if (arg.rfind("F:", 0) == 0) {
    text = arg;
  } else {
    throw ConfigError("cannot read genome file " + arg);
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  const auto last = text.find_last_not_of(" \t\r\n");
  if (first == std::string::npos) throw ConfigError("empty genome file " + arg);
  text = text.substr(first, last - first + 1);
  try {
    if (text.front() == '{' || text.front() == '"') return genome_from_json(Json::parse(text));
    return decode(text);
  } catch (const Json::exception& e) {
    throw ConfigError("genome " + arg + ": " + e.what());
  } catch (const ParseError& e) {
    throw ConfigError("genome " + arg + ": " + e.what());
  }
}

int cmd_cost(const EvalFlags& f, std::ostream& out) {
  const auto supernet = load_supernet(f.supernet_path);
  const Genome g = load_genome(f.genome);
  const auto cost = compute_costs(g, supernet.desc);
  const auto base = compute_costs(supernet_genome(), supernet.desc);
  Json j = cost_report_to_json(cost);
  j["genome"] = encode(g);
  j["params_m"] = static_cast<double>(cost.params) / 1e6;
  j["flops_g"] = static_cast<double>(cost.flops) / 1e9;
  j["params_pct"] = 100.0 * static_cast<double>(cost.params) / static_cast<double>(base.params);
  j["flops_pct"] = 100.0 * static_cast<double>(cost.flops) / static_cast<double>(base.flops);
  j["supernet_params"] = base.params;
  j["supernet_flops"] = base.flops;
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  const Genome g = load_genome(f.genome);
  EarlyStopPolicy policy;
  if (f.threshold) policy.accuracy_threshold = *f.threshold;
  if (f.check_fraction) policy.check_fraction = *f.check_fraction;
  if (f.total_batches) policy.total_batches = *f.total_batches;
  policy.validate();
  std::uint64_t seed = 0;
  if (f.seed) {
    seed = *f.seed;
  } else if (auto s = env_seed()) {
    seed = *s;
  }
  try {
    EvaluationOutcome outcome;
    if (f.evaluator_cmd) {
      ExternalEvaluatorOptions opts{*f.evaluator_cmd, seed, policy.total_batches};
      if (f.timeout_ms) {
        if (*f.timeout_ms <= 0) throw ConfigError("timeout must be positive");
        opts.timeout = std::chrono::milliseconds(*f.timeout_ms);
      }
      ExternalEvaluator ev(opts);
      outcome = evaluate_with_early_stopping(ev, g, policy);
      ev.shutdown();
    } else {
      SurrogateEvaluator ev(seed, policy.total_batches);
      outcome = evaluate_with_early_stopping(ev, g, policy);
    }
    out << outcome_to_json(outcome).dump(2) << "\n";
  } catch (const EvaluationError& e) {
    err << "pcnas: evaluation failed (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitEvaluator;
  }
  return kExitOk;
}

int cmd_export(const std::string& run_dir, const std::string& out_path, std::ostream& out) {
  const fs::path summary_path = fs::path(run_dir) / "summary.json";
  const Json summary = read_json_file(summary_path.string());
  if (!summary.contains("history")) {
    throw ConfigError(summary_path.string() +
                      " has no per-generation history; export a stage1/ or pivot_N/ directory");
  }
  if (out_path.empty()) {
    write_plot_csv(out, summary);
    return kExitOk;
  }
  std::ofstream f(out_path);
  if (!f) throw ConfigError("cannot write " + out_path);
  write_plot_csv(f, summary);
  return kExitOk;
}

void add_run_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--out", f.out_dir, "Output directory")->required();
  cmd->add_option("--seed", f.seed, "Run seed (overrides " + std::string(kSeedEnv) + ")");
  cmd->add_option("--population", f.population, "Population size");
  cmd->add_option("--jobs", f.jobs, "Concurrent evaluators");
  cmd->add_option("--evaluator-cmd", f.evaluator_cmd, "External evaluator command line");
  cmd->add_option("--timeout-ms", f.timeout_ms, "External evaluator response timeout");
  cmd->add_option("--supernet", f.supernet_path, "Supernet description JSON");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-objective point-cloud architecture search", "pcnas"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags search_flags;
  auto* search = app.add_subcommand("search", "Run a single-stage search");
  search->add_option("--config", search_flags.config_path, "Search configuration JSON")
      ->required();
  search->add_option("--generations", search_flags.generations, "Generation limit");
  add_run_flags(search, search_flags);

  CommonFlags two_flags;
  auto* two = app.add_subcommand("two-stage", "Run sampling then architectural search");
  two->add_option("--config", two_flags.config_path, "Two-stage configuration JSON");
  two->add_option("--pivots", two_flags.pivots, "Number of stage-1 pivots");
  add_run_flags(two, two_flags);

  EvalFlags cost_flags;
  auto* cost = app.add_subcommand("cost", "Print parameter and FLOP counts of a genome");
  cost->add_option("--genome", cost_flags.genome, "Genome JSON file or canonical string")
      ->required();
  cost->add_option("--supernet", cost_flags.supernet_path, "Supernet description JSON");

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate one genome with early stopping");
  eval->add_option("--genome", eval_flags.genome, "Genome JSON file or canonical string")
      ->required();
  eval->add_option("--evaluator-cmd", eval_flags.evaluator_cmd, "External evaluator command");
  eval->add_option("--seed", eval_flags.seed, "Run seed");
  eval->add_option("--threshold", eval_flags.threshold, "Early-stop accuracy threshold");
  eval->add_option("--check-fraction", eval_flags.check_fraction, "Checkpoint fraction");
  eval->add_option("--total-batches", eval_flags.total_batches, "Test batches");
  eval->add_option("--timeout-ms", eval_flags.timeout_ms, "External evaluator timeout");

  std::string export_run;
  std::string export_out;
  auto* exp = app.add_subcommand("export", "Write a plotting CSV from a run directory");
  exp->add_option("--run", export_run, "Run directory holding summary.json")->required();
  exp->add_option("--out", export_out, "CSV path (default: standard output)");

  std::vector<const char*> argv{"pcnas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*search) return cmd_search(search_flags, out, err);
    if (*two) return cmd_two_stage(two_flags, out, err);
    if (*cost) return cmd_cost(cost_flags, out);
    if (*eval) return cmd_eval(eval_flags, out, err);
    if (*exp) return cmd_export(export_run, export_out, out);
  } catch (const ConfigError& e) {
    err << "pcnas: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "pcnas: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StructuralError& e) {
    err << "pcnas: " << e.what() << "\n";
    return kExitConfig;
  } catch (const EvaluationError& e) {
    err << "pcnas: evaluator failure: " << e.what() << "\n";
    return kExitEvaluator;
  } catch (const std::exception& e) {
    err << "pcnas: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace pcnas
