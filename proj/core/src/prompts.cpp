#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "internal/action_json.h"
#include "monteprep/csv.h"
#include "monteprep/oracle.h"

namespace monteprep {

namespace {

constexpr const char* kPlanGrammar = R"(A plan is an object {"steps": [...], "final_output": "<name>"}.
Each step is {"op": <operator>, "input": <table, optional>, "params": {...}, "output_name": <name>}.
"input" defaults to the previous step's output (or the only source table) and is not allowed for Join and Union.
Operators and params:
  Join              {"left": t, "right": t, "on": [{"left": col, "right": col}] or [col], "how": "inner"|"left"}
  GroupBy           {"keys": [col], "aggs": [{"column": col, "fn": "sum"|"mean"|"count"|"min"|"max", "out_name": col}]}
  Pivot             {"index": [col], "pivot_col": col, "value_col": col, "agg_fn": fn}
  Unpivot           {"id_cols": [col], "var_name": col, "value_name": col}
  Union             {"tables": [t, t, ...]}
  AddColumn         {"name": col, "constant": value}
  DropColumns       {"names": [col]}
  Rename            {"mapping": [{"from": col, "to": col}]}
  ColumnArithmetic  {"out_name": col, "expression": "a * b + 1"}
  DateFormatting    {"column": col, "in_format": "auto"|pattern, "out_format": "yyyy-mm-dd"}
Date patterns use yyyy, mm, dd and a separator, e.g. "yyyy.mm.dd" or "dd/mm/yyyy".)";

PromptTemplates make_defaults() {
  PromptTemplates t;
  t.system =
      "You build data preparation pipelines. Reply with exactly one fenced ```json block in the "
      "requested format.";
  t.actions[static_cast<std::size_t>(ActionType::SchemaMapping)] = {
      "Match columns of the source tables to columns of the target schema.",
      "- Map a target column only when a source column carries the same information.\n"
      "- Names may differ in spelling or wording, e.g. Store_id and Shop_id.\n"
      "- Leave out target columns that must be computed or aggregated.\n"
      "- Each target column appears at most once.",
      "```json\n{\"mapping\": [{\"table\": \"<source table>\", \"column\": \"<source column>\", "
      "\"target\": \"<target column>\", \"note\": \"<short reason>\"}]}\n```"};
  t.actions[static_cast<std::size_t>(ActionType::OperatorDiscovery)] = {
      "List the transformation operators needed to turn the source tables into the target table.",
      "- Available operators: Join, GroupBy, Pivot, Unpivot, Union, AddColumn, DropColumns, Rename, "
      "ColumnArithmetic, DateFormatting.\n"
      "- Aggregate-like target names (total, avg, count) usually need GroupBy.\n"
      "- Dates that are not yyyy-mm-dd need DateFormatting.\n"
      "- Source columns with no counterpart in the target need DropColumns.",
      "```json\n{\"operators\": [{\"op\": \"<operator>\", \"note\": \"<short reason>\"}]}\n```"};
  t.actions[static_cast<std::size_t>(ActionType::CodeSynthesis)] = {
      "Write a pipeline plan that produces a table with exactly the target columns.",
      "- Use the schema mapping and operators found so far when present.\n"
      "- Normalise dates before grouping on them.\n"
      "- Rename columns to their target names before aggregating.\n"
      "- Finish by dropping every column that is not in the target schema.",
      std::string("```json\n{\"plan\": <plan>}\n```\n") + kPlanGrammar};
  t.actions[static_cast<std::size_t>(ActionType::CodeRefinement)] = {
      "Repair the current plan so that it runs and produces exactly the target columns.",
      "- When execution failed, fix the failing step named in the diagnostics.\n"
      "- When it ran, compare its output columns with the target schema.\n"
      "- Return the complete corrected plan, not a patch.",
      std::string("```json\n{\"plan\": <plan>}\n```\n") + kPlanGrammar};
  t.actions[static_cast<std::size_t>(ActionType::Termination)] = {
      "Confirm that the current plan is final.", "- No changes are made at this step.",
      "```json\n{}\n```"};
  t.judge_instruction =
      "Judge whether the plan is likely to transform the source tables into a table matching the "
      "target schema.";
  t.judge_rules =
      "- 1.0: fully correct and complete; every target column is produced with the right content.\n"
      "- 0.5: partially correct but incomplete; some target columns are missing or wrong.\n"
      "- 0: malformed or incorrect.";
  t.judge_output_format =
      "```json\n{\"score\": <0 | 0.5 | 1>, \"rationale\": \"<one or two sentences>\"}\n```";
  return t;
}

void render_sources(std::ostringstream& out, const TaskContext& ctx) {
  out << "### Source tables\n";
  for (const auto& [name, sample] : ctx.samples) {
    out << "Table `" << name << "` columns:";
    bool first = true;
    for (const auto& c : sample.schema().columns()) {
      out << (first ? " " : ", ") << c.name << " (" << to_string(c.dtype) << ")";
      first = false;
    }
    out << "\nFirst " << sample.row_count() << " rows:\n" << to_csv(sample);
    out << "\n";
  }
  out << "### Target schema\n";
  for (const auto& c : ctx.target.columns()) {
    out << "- " << c.name;
    if (c.dtype != DType::Any) out << " (" << to_string(c.dtype) << ")";
    if (!c.description.empty()) out << ": " << c.description;
    out << "\n";
  }
}

void render_plan(std::ostringstream& out, const PipelinePlan& plan) {
  out << "```json\n" << serialize_plan(plan) << "\n```\n";
}

std::string section(const char* title, const std::string& body) {
  std::string s = "## ";
  s += title;
  s += "\n";
  s += body;
  if (!body.empty() && body.back() != '\n') s += "\n";
  s += "\n";
  return s;
}

}  // namespace

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = make_defaults();
  return t;
}

PromptTemplates load_prompt_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt templates '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("prompt templates '" + path.string() + "': " + e.what());
  }
  PromptTemplates t = PromptTemplates::defaults();
  auto take = [](const nlohmann::json& obj, const char* key, std::string& dst) {
    if (auto it = obj.find(key); it != obj.end()) {
      if (!it->is_string()) throw std::runtime_error(std::string("prompt template field '") + key + "' must be a string");
      dst = it->get<std::string>();
    }
  };
  take(doc, "system", t.system);
  if (auto it = doc.find("actions"); it != doc.end() && it->is_object()) {
    for (const auto& [name, body] : it->items()) {
      auto type = parse_action_type(name);
      if (!type) throw std::runtime_error("prompt templates: unknown action '" + name + "'");
      auto& a = t.actions[static_cast<std::size_t>(*type)];
      take(body, "instruction", a.instruction);
      take(body, "tips", a.tips);
      take(body, "response_format", a.response_format);
    }
  }
  if (auto it = doc.find("judge"); it != doc.end() && it->is_object()) {
    take(*it, "instruction", t.judge_instruction);
    take(*it, "rules", t.judge_rules);
    take(*it, "output_format", t.judge_output_format);
  }
  return t;
}

std::string render_table_information(const ReasoningState& state) {
  std::ostringstream out;
  render_sources(out, *state.context);
  if (state.mapping || state.discovered_ops || state.plan) out << "### Progress\n";
  if (state.mapping) {
    out << "Schema mapping:\n";
    for (const auto& e : state.mapping->entries) {
      out << "- " << e.source_table << "." << e.source_column << " -> " << e.target_column << "\n";
    }
  }
  if (state.discovered_ops) {
    out << "Operators:";
    for (const auto& o : state.discovered_ops->operators) out << " " << to_string(o.kind);
    out << "\n";
  }
  if (state.plan) {
    out << "Current plan:\n";
    render_plan(out, *state.plan);
    if (state.diagnostics) {
      out << "Execution failed";
      if (state.diagnostics->failed_step) out << " at step " << (*state.diagnostics->failed_step + 1);
      out << " (" << to_string(state.diagnostics->error_kind) << "): " << state.diagnostics->message << "\n";
    } else if (state.output) {
      out << "Execution succeeded; output columns:";
      for (const auto& n : state.output->schema().names()) out << " " << n;
      out << "\n";
    }
  }
  return out.str();
}

std::string render_prompt(const ReasoningState& state, ActionType type, const PromptTemplates& templates) {
  const ActionPrompt& p = templates.for_action(type);
  return section("Instruction", p.instruction) + section("Tips", p.tips) +
         section("Table Information", render_table_information(state)) +
         section("Response Format", p.response_format);
}

std::string render_judge_prompt(const JudgeRequest& request, const PromptTemplates& templates) {
  std::ostringstream info;
  render_sources(info, *request.context);
  info << "### Plan\n";
  render_plan(info, *request.plan);
  if (request.diagnostics) {
    info << "### Execution\nFailed (" << to_string(request.diagnostics->error_kind)
         << "): " << request.diagnostics->message << "\n";
  } else if (request.preview) {
    info << "### Execution preview\n" << to_csv(*request.preview);
  }
  return section("Instruction", templates.judge_instruction) +
         section("Evaluation Rules", templates.judge_rules) + section("Table Information", info.str()) +
         section("Output Format", templates.judge_output_format);
}

}  // namespace monteprep
