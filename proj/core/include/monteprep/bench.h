#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "monteprep/csv.h"
#include "monteprep/oracle.h"
#include "monteprep/search.h"

namespace monteprep {

/// A task file that does not describe a valid task; `field` locates the
/// problem, e.g. `target_schema[2].name`.
class TaskError : public std::runtime_error {
 public:
  TaskError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct SourceFile {
  std::string name;
  std::filesystem::path path;
};

struct TaskSpec {
  std::string id;
  std::vector<SourceFile> sources;
  TargetSchema target;
  /// Evaluation only; never shown to an oracle.
  std::optional<std::filesystem::path> reference;
  CsvOptions csv;
  /// Pipeline-length group from the originating benchmark, if tagged.
  std::optional<int> length;
};

/// Reads a task. `path` may be a task file, a directory holding task.json,
/// or a directory of CSV files where target.csv is the reference and every
/// other CSV a source. Throws TaskError.
TaskSpec load_task(const std::filesystem::path& path);

/// Parses task-file text; relative paths resolve against `base_dir`.
TaskSpec parse_task(std::string_view text, const std::filesystem::path& base_dir,
                    const std::string& default_id);

/// Task locations under `dir` in name order: *.json files, directories
/// with task.json, and directories with target.csv.
std::vector<std::filesystem::path> discover_tasks(const std::filesystem::path& dir);

TableSet load_sources(const TaskSpec& task);
std::optional<Table> load_reference(const TaskSpec& task);

struct TaskResult {
  std::string id;
  std::optional<int> length;
  std::uint64_t seed = 0;
  std::optional<PipelinePlan> best;
  double reward = 0.0;
  /// Present when the task has a reference target.
  std::optional<int> ex;
  double cs = 0.0;
  std::size_t rollouts = 0;
  std::size_t oracle_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t judge_calls = 0;
  std::size_t found = 0;
  bool stopped_early = false;
  double duration_ms = 0.0;
  std::vector<std::string> warnings;

  struct Rollout {
    std::size_t index;
    std::vector<TraceStep> steps;
    double reward;
    RolloutEnd terminated_by;
    bool has_plan;
  };
  std::vector<Rollout> trace;
};

struct SuiteOptions {
  SearchConfig search;
  std::size_t jobs = 1;
  std::size_t sample_rows = kDefaultSampleRows;
  double float_tolerance = 0.0;
};

struct SuiteReport {
  std::vector<TaskResult> results;
  /// Means over tasks, in percent. EX counts tasks with a reference only.
  double ex_percent = 0.0;
  double cs_percent = 0.0;
  double mean_time_ms = 0.0;
  double total_time_ms = 0.0;
  std::size_t tasks_with_reference = 0;
  SuiteOptions options;
  std::vector<std::string> warnings;
};

/// Seed of one task: a mix of the base seed and the task id, so results do
/// not depend on scheduling.
std::uint64_t task_seed(std::uint64_t base, std::string_view task_id);

/// Searches one task, then runs the best plan on the full sources for
/// EX and CS.
TaskResult run_task(const TaskSpec& task, const SuiteOptions& options, Oracle& oracle);

/// Runs every discoverable task with up to options.jobs in parallel.
/// Unreadable tasks are skipped with a warning. Throws only when `dir` is
/// not a readable directory.
SuiteReport run_suite(const std::filesystem::path& dir, const SuiteOptions& options, Oracle& oracle);

/// Fills the aggregate fields from `results`.
void aggregate(SuiteReport& report);

/// Object-notation report. Wall-clock figures live in a separate "timing"
/// section that can be left out for byte-for-byte comparisons.
std::string report_to_json(const SuiteReport& report, bool include_timing = true,
                           bool include_trace = true);

/// Fixed-width per-task table with a summary line.
std::string report_table(const SuiteReport& report, bool include_timing = true);

}  // namespace monteprep
