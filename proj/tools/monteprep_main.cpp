#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "monteprep/bench.h"
#include "monteprep/csv.h"
#include "monteprep/executor.h"
#include "monteprep/llm.h"
#include "monteprep/metrics.h"
#include "monteprep/plan_io.h"
#include "monteprep/search.h"

namespace {

using namespace monteprep;

struct SearchFlags {
  SearchConfig config;
  std::string reward = "exec";
  std::string uct = "cumulative";
  bool no_cache = false;
  bool no_early_stop = false;
  std::string oracle = "heuristic";
  std::string templates;
  std::size_t sample_rows = kDefaultSampleRows;
  double max_in_flight = 4;
};

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
  cmd->add_option("--oracle", f.oracle, "Proposal oracle")->check(CLI::IsMember({"heuristic", "http"}));
  cmd->add_option("--templates", f.templates, "Prompt template overrides (object notation)");
  cmd->add_option("--rollouts", f.config.rollouts, "Rollout budget N")->check(CLI::PositiveNumber);
  cmd->add_option("--max-depth", f.config.max_depth, "Maximum search depth")->check(CLI::PositiveNumber);
  cmd->add_option("--exploration-c", f.config.exploration_c, "UCT exploration constant")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--early-stop-k", f.config.early_stop_k, "Stop after K exact pipelines")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--no-early-stop", f.no_early_stop, "Always run the full rollout budget");
  cmd->add_option("--reward", f.reward, "Reward mode")->check(CLI::IsMember({"self", "exec", "hybrid"}));
  cmd->add_option("--uct", f.uct, "Value term of UCT")->check(CLI::IsMember({"cumulative", "mean"}));
  cmd->add_flag("--no-cache", f.no_cache, "Disable the simulation cache");
  cmd->add_option("--seed", f.config.seed, "Random seed");
  cmd->add_option("--sample-rows", f.sample_rows, "Rows per source shown to the oracle")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-in-flight", f.max_in_flight, "Concurrent requests to the chat endpoint")
      ->check(CLI::PositiveNumber);
}

SearchConfig finish(SearchFlags& f) {
  f.config.reward = *parse_reward_mode(f.reward);
  f.config.uct = *parse_uct_value(f.uct);
  f.config.cache_enabled = !f.no_cache;
  f.config.early_stop = !f.no_early_stop;
  f.config.validate();
  return f.config;
}

std::shared_ptr<Oracle> make_oracle(const SearchFlags& f) {
  PromptTemplates templates =
      f.templates.empty() ? PromptTemplates::defaults() : load_prompt_templates(f.templates);
  if (f.oracle == "http") {
    auto cfg = HttpChatConfig::from_env();
    cfg.max_in_flight = static_cast<std::size_t>(f.max_in_flight);
    return std::make_shared<LlmOracle>(std::make_shared<HttpChatBackend>(cfg),
                                       LlmOracleOptions{2, std::move(templates)});
  }
  return std::make_shared<HeuristicOracle>();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

int cmd_synth(const std::string& task_path, SearchFlags& flags, const std::string& out_path) {
  SearchConfig config = finish(flags);
  TaskSpec task = load_task(task_path);
  auto oracle = make_oracle(flags);
  SuiteOptions opts;
  opts.search = config;
  opts.sample_rows = flags.sample_rows;
  TaskResult r = run_task(task, opts, *oracle);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!r.best) {
    std::cerr << "no plan found after " << r.rollouts << " rollouts\n";
    return 3;
  }
  const std::string plan = serialize_plan(*r.best) + "\n";
  if (out_path.empty()) std::cout << plan;
  else write_text(out_path, plan);
  std::fprintf(stderr, "task %s: reward %.3f, CS %.3f", r.id.c_str(), r.reward, r.cs);
  if (r.ex) std::fprintf(stderr, ", EX %d", *r.ex);
  std::fprintf(stderr, ", %zu rollouts, %zu oracle calls, %zu cache hits, %.1f ms\n", r.rollouts,
               r.oracle_calls, r.cache_hits, r.duration_ms);
  return 0;
}

int cmd_exec(const std::string& plan_path, const std::string& task_path, const std::string& out_path) {
  TaskSpec task = load_task(task_path);
  TableSet sources = load_sources(task);
  std::vector<std::string> names;
  for (const auto& [n, _] : sources) names.push_back(n);
  PipelinePlan plan = parse_plan(slurp(plan_path), names);
  auto result = execute_plan(plan, sources);
  if (!result.ok()) {
    const auto& d = result.diagnostics();
    std::cerr << "execution failed";
    if (d.failed_step) std::cerr << " at step " << (*d.failed_step + 1);
    std::cerr << " [" << to_string(d.error_kind) << "]: " << d.message << "\n";
    return 2;
  }
  if (out_path.empty() || out_path == "-") std::cout << to_csv(result.table());
  else write_csv(result.table(), out_path);
  std::fprintf(stderr, "CS %.3f\n", metric_cs(result.table(), task.target));
  return 0;
}

int cmd_bench(const std::string& suite, SearchFlags& flags, const std::string& report_path, std::size_t jobs,
              bool no_timing, bool no_trace, double float_tol) {
  SuiteOptions opts;
  opts.search = finish(flags);
  opts.jobs = jobs;
  opts.sample_rows = flags.sample_rows;
  opts.float_tolerance = float_tol;
  auto oracle = make_oracle(flags);
  SuiteReport report = run_suite(suite, opts, *oracle);
  if (!report_path.empty()) write_text(report_path, report_to_json(report, !no_timing, !no_trace));
  std::cout << report_table(report, !no_timing);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search-based synthesis of table transformation pipelines"};
  app.require_subcommand(1);

  std::string task_path;
  std::string out_path;
  SearchFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Search for a pipeline for one task");
  synth->add_option("--task", task_path, "Task file or directory")->required();
  synth->add_option("--out", out_path, "Write the plan here instead of standard output");
  add_search_flags(synth, synth_flags);

  std::string plan_path;
  std::string exec_task;
  std::string exec_out;
  auto* exec = app.add_subcommand("exec", "Run a plan against a task's sources");
  exec->add_option("--plan", plan_path, "Plan file")->required();
  exec->add_option("--task", exec_task, "Task file or directory")->required();
  exec->add_option("--out", exec_out, "Output CSV (default: standard output)");

  std::string suite;
  std::string report_path;
  std::size_t jobs = 1;
  bool no_timing = false;
  bool no_trace = false;
  double float_tol = 0.0;
  SearchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Run every task in a suite directory");
  bench->add_option("--suite", suite, "Suite directory")->required();
  bench->add_option("--report", report_path, "Write the report here");
  bench->add_option("--jobs", jobs, "Tasks run in parallel")->check(CLI::PositiveNumber);
  bench->add_flag("--no-timing", no_timing, "Leave wall-clock figures out of the report");
  bench->add_flag("--no-trace", no_trace, "Leave per-rollout traces out of the report");
  bench->add_option("--float-tol", float_tol, "Absolute tolerance for float cells in EX")
      ->check(CLI::NonNegativeNumber);
  add_search_flags(bench, bench_flags);

  app.add_subcommand("plan-schema", "Print the schema of the plan format");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(task_path, synth_flags, out_path);
    if (exec->parsed()) return cmd_exec(plan_path, exec_task, exec_out);
    if (bench->parsed()) {
      return cmd_bench(suite, bench_flags, report_path, jobs, no_timing, no_trace, float_tol);
    }
    std::cout << plan_json_schema() << "\n";
    return 0;
  } catch (const PlanError& e) {
    std::cerr << "plan error";
    if (!e.path().empty()) std::cerr << " at " << e.path();
    std::cerr << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
