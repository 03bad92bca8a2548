#include "monteprep/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "internal/plan_json.h"
#include "monteprep/executor.h"
#include "monteprep/metrics.h"

namespace monteprep {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw TaskError("", "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string string_field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw TaskError(path + key, "missing required field");
  if (!it->is_string()) throw TaskError(path + key, "expected a string");
  return it->get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_reference(const TaskSpec& t) {
  if (!t.reference) return;
  Table ref;
  try {
    ref = read_csv(*t.reference, t.csv);
  } catch (const std::exception& e) {
    throw TaskError("reference_target", e.what());
  }
  const auto have = schema_names(ref);
  const auto names = t.target.names();
  const std::set<std::string> want(names.begin(), names.end());
  if (have != want) {
    std::string msg = "columns differ from the target schema:";
    for (const auto& n : have) {
      if (!want.count(n)) msg += " extra '" + n + "'";
    }
    for (const auto& n : want) {
      if (!have.count(n)) msg += " missing '" + n + "'";
    }
    throw TaskError("reference_target", msg);
  }
}

TaskSpec load_folder_task(const fs::path& dir) {
  TaskSpec t;
  t.id = dir.filename().string();
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "target.csv") {
      csvs.push_back(e.path());
    }
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw TaskError("sources", "directory has no source CSV files");
  for (const auto& p : csvs) t.sources.push_back({p.stem().string(), p});
  t.reference = dir / "target.csv";
  Table ref;
  try {
    ref = read_csv(*t.reference, t.csv);
  } catch (const std::exception& e) {
    throw TaskError("target.csv", e.what());
  }
  std::vector<TargetColumn> cols;
  for (const auto& n : ref.schema().names()) cols.push_back({n, "", DType::Any});
  t.target = TargetSchema(std::move(cols));
  return t;
}

ordered_json result_to_json(const TaskResult& r, bool include_trace) {
  ordered_json j;
  j["id"] = r.id;
  if (r.length) j["length"] = *r.length;
  j["seed"] = r.seed;
  j["ex"] = r.ex ? ordered_json(*r.ex) : ordered_json();
  j["cs"] = r.cs;
  j["reward"] = r.reward;
  j["rollouts"] = r.rollouts;
  j["oracle_calls"] = r.oracle_calls;
  j["cache_hits"] = r.cache_hits;
  j["cache_misses"] = r.cache_misses;
  j["judge_calls"] = r.judge_calls;
  j["found"] = r.found;
  j["stopped_early"] = r.stopped_early;
  j["plan"] = r.best ? detail::plan_to_json(*r.best) : ordered_json();
  j["warnings"] = r.warnings;
  if (include_trace) {
    ordered_json trace = ordered_json::array();
    for (const auto& ro : r.trace) {
      ordered_json t;
      t["rollout"] = ro.index;
      t["path"] = ordered_json::array();
      for (const auto& s : ro.steps) {
        t["path"].push_back({{"node", s.node},
                             {"child", s.child},
                             {"action", std::string(to_string(s.type))},
                             {"params", ordered_json::parse(s.params)}});
      }
      t["reward"] = ro.reward;
      t["terminated_by"] = std::string(to_string(ro.terminated_by));
      t["has_plan"] = ro.has_plan;
      trace.push_back(std::move(t));
    }
    j["trace"] = std::move(trace);
  }
  return j;
}

}  // namespace

TaskSpec parse_task(std::string_view text, const fs::path& base_dir, const std::string& default_id) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw TaskError("", "task file is not valid JSON");
  if (!doc.is_object()) throw TaskError("", "task file must hold an object");

  if (auto it = doc.find("format_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != 1) {
      throw TaskError("format_version", "only version 1 is supported");
    }
  }
  TaskSpec t;
  t.id = doc.contains("id") ? string_field(doc, "id", "") : default_id;
  if (t.id.empty()) throw TaskError("id", "must not be empty");

  if (auto it = doc.find("csv"); it != doc.end()) {
    if (!it->is_object()) throw TaskError("csv", "expected an object");
    if (it->contains("delimiter")) {
      auto d = string_field(*it, "delimiter", "csv.");
      if (d.size() != 1) throw TaskError("csv.delimiter", "must be a single character");
      t.csv.delimiter = d[0];
    }
  }

  auto src = doc.find("sources");
  if (src == doc.end()) throw TaskError("sources", "missing required field");
  if (!src->is_array() || src->empty()) throw TaskError("sources", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < src->size(); ++i) {
    const std::string path = "sources[" + std::to_string(i) + "]";
    const json& s = (*src)[i];
    SourceFile f;
    if (s.is_string()) {
      f.path = resolve(base_dir, s.get<std::string>());
      f.name = f.path.stem().string();
    } else if (s.is_object()) {
      f.path = resolve(base_dir, string_field(s, "path", path + "."));
      f.name = s.contains("name") ? string_field(s, "name", path + ".") : f.path.stem().string();
    } else {
      throw TaskError(path, "expected a path or an object");
    }
    if (f.name.empty()) throw TaskError(path + ".name", "must not be empty");
    if (!names.insert(f.name).second) throw TaskError(path + ".name", "duplicate table name '" + f.name + "'");
    t.sources.push_back(std::move(f));
  }

  auto tgt = doc.find("target_schema");
  if (tgt == doc.end()) throw TaskError("target_schema", "missing required field");
  if (!tgt->is_array() || tgt->empty()) throw TaskError("target_schema", "expected a non-empty array");
  std::vector<TargetColumn> cols;
  for (std::size_t i = 0; i < tgt->size(); ++i) {
    const std::string path = "target_schema[" + std::to_string(i) + "]";
    const json& c = (*tgt)[i];
    TargetColumn col;
    if (c.is_string()) {
      col.name = c.get<std::string>();
    } else if (c.is_object()) {
      col.name = string_field(c, "name", path + ".");
      if (c.contains("description")) col.description = string_field(c, "description", path + ".");
      if (c.contains("dtype")) {
        auto d = parse_dtype(string_field(c, "dtype", path + "."));
        if (!d) throw TaskError(path + ".dtype", "unknown dtype");
        col.dtype = *d;
      }
    } else {
      throw TaskError(path, "expected a name or an object");
    }
    if (trim(col.name).empty()) throw TaskError(path + ".name", "must not be empty");
    cols.push_back(std::move(col));
  }
  try {
    t.target = TargetSchema(std::move(cols));
  } catch (const TableError& e) {
    throw TaskError("target_schema", e.what());
  }

  if (auto it = doc.find("length"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) {
      throw TaskError("length", "expected a positive integer");
    }
    t.length = it->get<int>();
  }

  if (doc.contains("reference_target")) {
    t.reference = resolve(base_dir, string_field(doc, "reference_target", ""));
  }
  check_reference(t);
  return t;
}

TaskSpec load_task(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    if (fs::is_regular_file(path / "task.json")) {
      return parse_task(read_file(path / "task.json"), path, path.filename().string());
    }
    if (fs::is_regular_file(path / "target.csv")) return load_folder_task(path);
    throw TaskError("", "'" + path.string() + "' holds neither task.json nor target.csv");
  }
  return parse_task(read_file(path), path.parent_path(), path.stem().string());
}

std::vector<fs::path> discover_tasks(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") {
      out.push_back(e.path());
    } else if (e.is_directory() &&
               (fs::is_regular_file(e.path() / "task.json") || fs::is_regular_file(e.path() / "target.csv"))) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TableSet load_sources(const TaskSpec& task) {
  TableSet out;
  for (const auto& s : task.sources) out.emplace(s.name, read_csv(s.path, task.csv, s.name));
  return out;
}

std::optional<Table> load_reference(const TaskSpec& task) {
  if (!task.reference) return std::nullopt;
  return read_csv(*task.reference, task.csv, "reference");
}

std::uint64_t task_seed(std::uint64_t base, std::string_view task_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : task_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser
  std::uint64_t z = base + h + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TaskResult run_task(const TaskSpec& task, const SuiteOptions& options, Oracle& oracle) {
  const auto start = std::chrono::steady_clock::now();
  TaskResult r;
  r.id = task.id;
  r.length = task.length;
  auto ctx = make_task_context(load_sources(task), task.target, options.sample_rows);
  SearchConfig cfg = options.search;
  cfg.seed = task_seed(options.search.seed, task.id);
  r.seed = cfg.seed;

  SearchResult sr = run_search(ctx, cfg, oracle);
  r.best = sr.best;
  r.reward = sr.best_reward;
  r.rollouts = sr.trace.size();
  r.oracle_calls = sr.oracle_calls;
  r.cache_hits = sr.cache_hits;
  r.cache_misses = sr.cache_misses;
  r.judge_calls = sr.judge_calls;
  r.found = sr.found.size();
  r.stopped_early = sr.stopped_early;
  r.warnings = sr.warnings;
  for (const auto& rec : sr.trace) {
    r.trace.push_back({rec.index, describe_path(sr.tree, rec.path), rec.reward, rec.terminated_by,
                       rec.plan.has_value()});
  }

  auto reference = load_reference(task);
  std::optional<Table> output;
  if (r.best) {
    auto exec = execute_plan(*r.best, ctx->sources, ctx->executor);
    if (exec.ok()) output = exec.table();
  }
  r.cs = output ? metric_cs(*output, task.target) : 0.0;
  if (reference) r.ex = output ? metric_ex(*output, *reference, options.float_tolerance) : 0;

  r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void aggregate(SuiteReport& report) {
  report.ex_percent = report.cs_percent = report.mean_time_ms = 0.0;
  report.tasks_with_reference = 0;
  if (report.results.empty()) return;
  double ex = 0;
  double cs = 0;
  double time = 0;
  for (const auto& r : report.results) {
    if (r.ex) {
      ex += *r.ex;
      ++report.tasks_with_reference;
    }
    cs += r.cs;
    time += r.duration_ms;
  }
  const auto n = static_cast<double>(report.results.size());
  if (report.tasks_with_reference) ex = 100.0 * ex / static_cast<double>(report.tasks_with_reference);
  report.ex_percent = ex;
  report.cs_percent = 100.0 * cs / n;
  report.mean_time_ms = time / n;
}

SuiteReport run_suite(const fs::path& dir, const SuiteOptions& options, Oracle& oracle) {
  options.search.validate();
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not a directory");
  const auto start = std::chrono::steady_clock::now();
  SuiteReport report;
  report.options = options;

  std::vector<TaskSpec> tasks;
  for (const auto& p : discover_tasks(dir)) {
    try {
      tasks.push_back(load_task(p));
    } catch (const std::exception& e) {
      report.warnings.push_back("skipped " + p.filename().string() + ": " + e.what());
    }
  }

  std::vector<std::optional<TaskResult>> slots(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        slots[i] = run_task(tasks[i], options, oracle);
      } catch (const std::exception& e) {
        errors[i] = "task " + tasks[i].id + " failed: " + e.what();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) report.results.push_back(std::move(*slots[i]));
    if (!errors[i].empty()) report.warnings.push_back(errors[i]);
  }
  aggregate(report);
  report.total_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_to_json(const SuiteReport& report, bool include_timing, bool include_trace) {
  ordered_json j;
  j["format_version"] = 1;
  const auto& c = report.options.search;
  j["config"] = {{"rollouts", c.rollouts},
                 {"max_depth", c.max_depth},
                 {"exploration_c", c.exploration_c},
                 {"early_stop", c.early_stop},
                 {"early_stop_k", c.early_stop_k},
                 {"reward", std::string(to_string(c.reward))},
                 {"uct", std::string(to_string(c.uct))},
                 {"cache", c.cache_enabled},
                 {"seed", c.seed},
                 {"sample_rows", report.options.sample_rows},
                 {"float_tolerance", report.options.float_tolerance}};
  j["summary"] = {{"tasks", report.results.size()},
                  {"tasks_with_reference", report.tasks_with_reference},
                  {"ex_percent", report.ex_percent},
                  {"cs_percent", report.cs_percent}};
  // Per-length groups, only for suites whose tasks carry the tag.
  std::map<int, std::vector<const TaskResult*>> groups;
  for (const auto& r : report.results) {
    if (r.length) groups[*r.length].push_back(&r);
  }
  if (!groups.empty()) {
    ordered_json by = ordered_json::object();
    for (const auto& [len, rs] : groups) {
      double ex = 0, cs = 0;
      std::size_t with_ref = 0;
      for (const auto* r : rs) {
        cs += r->cs;
        if (r->ex) {
          ex += *r->ex;
          ++with_ref;
        }
      }
      by[std::to_string(len)] = {{"tasks", rs.size()},
                                 {"ex_percent", with_ref ? 100.0 * ex / static_cast<double>(with_ref) : 0.0},
                                 {"cs_percent", 100.0 * cs / static_cast<double>(rs.size())}};
    }
    j["summary"]["by_length"] = std::move(by);
  }
  j["tasks"] = ordered_json::array();
  for (const auto& r : report.results) j["tasks"].push_back(result_to_json(r, include_trace));
  j["warnings"] = report.warnings;
  if (include_timing) {
    ordered_json t;
    t["jobs"] = report.options.jobs;
    t["total_ms"] = report.total_time_ms;
    t["mean_task_ms"] = report.mean_time_ms;
    t["tasks"] = ordered_json::object();
    for (const auto& r : report.results) t["tasks"][r.id] = r.duration_ms;
    j["timing"] = std::move(t);
  }
  return j.dump(2) + "\n";
}

std::string report_table(const SuiteReport& report, bool include_timing) {
  std::size_t width = 4;
  for (const auto& r : report.results) width = std::max(width, r.id.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %3s  %6s  %6s  %8s  %5s  %4s", static_cast<int>(width), "task", "EX",
                "CS", "reward", "rollouts", "calls", "hits");
  out << buf;
  if (include_timing) out << "  time_ms";
  out << "\n";
  for (const auto& r : report.results) {
    std::snprintf(buf, sizeof buf, "%-*s  %3s  %6.3f  %6.3f  %8zu  %5zu  %4zu", static_cast<int>(width),
                  r.id.c_str(), r.ex ? std::to_string(*r.ex).c_str() : "-", r.cs, r.reward, r.rollouts,
                  r.oracle_calls, r.cache_hits);
    out << buf;
    if (include_timing) {
      std::snprintf(buf, sizeof buf, "  %7.1f", r.duration_ms);
      out << buf;
    }
    out << "\n";
  }
  std::snprintf(buf, sizeof buf, "EX %.1f%% (%zu with reference)  CS %.1f%%  tasks %zu", report.ex_percent,
                report.tasks_with_reference, report.cs_percent, report.results.size());
  out << buf;
  if (include_timing) {
    std::snprintf(buf, sizeof buf, "  mean %.1f ms", report.mean_time_ms);
    out << buf;
  }
  out << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return out.str();
}

}  // namespace monteprep
