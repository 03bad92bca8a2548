#include "monteprep/plan_io.h"

#include <set>

#include "internal/plan_json.h"
#include "monteprep/table.h"

namespace monteprep {
namespace detail {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& path, const std::string& what,
                          std::optional<std::size_t> step) {
  throw PlanError(PlanError::Kind::InvalidParams, path + ": " + what, path, step);
}

struct Fields {
  const json& obj;
  std::string path;
  std::optional<std::size_t> step;

  const json* find(const char* key) const {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  std::string string(const char* key) const {
    const json* v = find(key);
    if (!v) invalid(path + "." + key, "missing required field", step);
    if (!v->is_string()) invalid(path + "." + key, "expected a string", step);
    return v->get<std::string>();
  }

  std::string string_or(const char* key, std::string fallback) const {
    return find(key) ? string(key) : std::move(fallback);
  }

  std::vector<std::string> strings(const char* key, bool required = true) const {
    const json* v = find(key);
    if (!v) {
      if (required) invalid(path + "." + key, "missing required field", step);
      return {};
    }
    if (!v->is_array()) invalid(path + "." + key, "expected an array of strings", step);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) {
        invalid(path + "." + key + "[" + std::to_string(i) + "]", "expected a string", step);
      }
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  const json& array(const char* key) const {
    const json* v = find(key);
    if (!v) invalid(path + "." + key, "missing required field", step);
    if (!v->is_array()) invalid(path + "." + key, "expected an array", step);
    return *v;
  }

  AggFn agg(const char* key, std::optional<AggFn> fallback = std::nullopt) const {
    if (!find(key)) {
      if (fallback) return *fallback;
      invalid(path + "." + key, "missing required field", step);
    }
    auto name = string(key);
    auto fn = parse_agg_fn(name);
    if (!fn) invalid(path + "." + key, "unknown aggregate '" + name + "'", step);
    return *fn;
  }
};

OperatorParams params_from_json(OperatorKind kind, const json& p, const std::string& path,
                                std::size_t step) {
  if (!p.is_object()) invalid(path, "expected an object", step);
  Fields f{p, path, step};
  switch (kind) {
    case OperatorKind::Join: {
      JoinParams out{f.string("left"), f.string("right"), {}, JoinHow::Inner};
      const json& on = f.array("on");
      for (std::size_t i = 0; i < on.size(); ++i) {
        const std::string at = path + ".on[" + std::to_string(i) + "]";
        if (on[i].is_string()) {
          out.on.emplace_back(on[i].get<std::string>(), on[i].get<std::string>());
        } else if (on[i].is_object()) {
          Fields k{on[i], at, step};
          out.on.emplace_back(k.string("left"), k.string("right"));
        } else {
          invalid(at, "expected a column name or {left, right}", step);
        }
      }
      if (out.on.empty()) invalid(path + ".on", "at least one key is required", step);
      auto how = f.string_or("how", "inner");
      if (how == "inner") out.how = JoinHow::Inner;
      else if (how == "left") out.how = JoinHow::Left;
      else invalid(path + ".how", "expected 'inner' or 'left'", step);
      return out;
    }
    case OperatorKind::GroupBy: {
      GroupByParams out{f.strings("keys"), {}};
      const json& aggs = f.array("aggs");
      for (std::size_t i = 0; i < aggs.size(); ++i) {
        const std::string at = path + ".aggs[" + std::to_string(i) + "]";
        if (!aggs[i].is_object()) invalid(at, "expected an object", step);
        Fields a{aggs[i], at, step};
        Aggregation agg{a.string("column"), a.agg("fn"), {}};
        agg.out_name = a.string_or("out_name", agg.column);
        out.aggs.push_back(std::move(agg));
      }
      if (out.aggs.empty() && out.keys.empty()) invalid(path, "needs keys or aggregates", step);
      return out;
    }
    case OperatorKind::Pivot:
      return PivotParams{f.strings("index"), f.string("pivot_col"), f.string("value_col"),
                         f.agg("agg_fn", AggFn::Sum)};
    case OperatorKind::Unpivot:
      return UnpivotParams{f.strings("id_cols"), f.string_or("var_name", "variable"),
                           f.string_or("value_name", "value")};
    case OperatorKind::Union: {
      UnionParams out{f.strings("tables")};
      if (out.tables.size() < 2) invalid(path + ".tables", "union needs at least two tables", step);
      return out;
    }
    case OperatorKind::AddColumn: {
      const json* c = f.find("constant");
      if (!c) invalid(path + ".constant", "missing required field", step);
      return AddColumnParams{f.string("name"), cell_from_json(*c, path + ".constant")};
    }
    case OperatorKind::DropColumns:
      return DropColumnsParams{f.strings("names")};
    case OperatorKind::Rename: {
      RenameParams out;
      const json* m = f.find("mapping");
      if (!m) invalid(path + ".mapping", "missing required field", step);
      if (m->is_object()) {
        for (const auto& [from, to] : m->items()) {
          if (!to.is_string()) invalid(path + ".mapping." + from, "expected a string", step);
          out.mapping.emplace_back(from, to.get<std::string>());
        }
      } else if (m->is_array()) {
        for (std::size_t i = 0; i < m->size(); ++i) {
          const std::string at = path + ".mapping[" + std::to_string(i) + "]";
          if (!(*m)[i].is_object()) invalid(at, "expected {from, to}", step);
          Fields e{(*m)[i], at, step};
          out.mapping.emplace_back(e.string("from"), e.string("to"));
        }
      } else {
        invalid(path + ".mapping", "expected an array of {from, to}", step);
      }
      std::set<std::string> olds, news;
      for (const auto& [from, to] : out.mapping) {
        if (!olds.insert(trim(from)).second) {
          invalid(path + ".mapping", "column '" + from + "' renamed twice", step);
        }
        if (!news.insert(trim(to)).second) {
          invalid(path + ".mapping", "two columns renamed to '" + to + "'", step);
        }
      }
      return out;
    }
    case OperatorKind::ColumnArithmetic: {
      auto text = f.string("expression");
      try {
        return ColumnArithmeticParams{f.string("out_name"), parse_expression(text)};
      } catch (const ExpressionSyntaxError& e) {
        invalid(path + ".expression", e.what(), step);
      }
    }
    case OperatorKind::DateFormatting:
      return DateFormattingParams{f.string("column"), f.string_or("in_format", "auto"),
                                  f.string_or("out_format", "yyyy-mm-dd")};
  }
  invalid(path, "unsupported operator", step);
}

ordered_json params_to_json(const OperatorParams& params) {
  return std::visit(
      [](const auto& p) -> ordered_json {
        using P = std::decay_t<decltype(p)>;
        ordered_json j = ordered_json::object();
        if constexpr (std::is_same_v<P, JoinParams>) {
          j["left"] = p.left;
          j["right"] = p.right;
          j["on"] = ordered_json::array();
          for (const auto& [l, r] : p.on) j["on"].push_back({{"left", l}, {"right", r}});
          j["how"] = p.how == JoinHow::Inner ? "inner" : "left";
        } else if constexpr (std::is_same_v<P, GroupByParams>) {
          j["keys"] = p.keys;
          j["aggs"] = ordered_json::array();
          for (const auto& a : p.aggs) {
            j["aggs"].push_back(
                {{"column", a.column}, {"fn", std::string(to_string(a.fn))}, {"out_name", a.out_name}});
          }
        } else if constexpr (std::is_same_v<P, PivotParams>) {
          j["index"] = p.index;
          j["pivot_col"] = p.pivot_col;
          j["value_col"] = p.value_col;
          j["agg_fn"] = std::string(to_string(p.agg));
        } else if constexpr (std::is_same_v<P, UnpivotParams>) {
          j["id_cols"] = p.id_cols;
          j["var_name"] = p.var_name;
          j["value_name"] = p.value_name;
        } else if constexpr (std::is_same_v<P, UnionParams>) {
          j["tables"] = p.tables;
        } else if constexpr (std::is_same_v<P, AddColumnParams>) {
          j["name"] = p.name;
          j["constant"] = cell_to_json(p.constant);
        } else if constexpr (std::is_same_v<P, DropColumnsParams>) {
          j["names"] = p.names;
        } else if constexpr (std::is_same_v<P, RenameParams>) {
          j["mapping"] = ordered_json::array();
          for (const auto& [from, to] : p.mapping) j["mapping"].push_back({{"from", from}, {"to", to}});
        } else if constexpr (std::is_same_v<P, ColumnArithmeticParams>) {
          j["out_name"] = p.out_name;
          j["expression"] = p.expression.to_string();
        } else if constexpr (std::is_same_v<P, DateFormattingParams>) {
          j["column"] = p.column;
          j["in_format"] = p.in_format;
          j["out_format"] = p.out_format;
        }
        return j;
      },
      params);
}

}  // namespace

ordered_json cell_to_json(const CellValue& v) {
  switch (v.kind()) {
    case CellKind::Null: return nullptr;
    case CellKind::Boolean: return v.as_bool();
    case CellKind::Integer: return v.as_int();
    case CellKind::Float: return v.as_float();
    case CellKind::Text: return v.as_text();
    case CellKind::Date: return {{"date", format_iso_date(v.as_date())}};
  }
  return nullptr;
}

CellValue cell_from_json(const json& j, const std::string& path) {
  if (j.is_null()) return CellValue::null();
  if (j.is_boolean()) return CellValue::boolean(j.get<bool>());
  if (j.is_number_integer()) return CellValue::integer(j.get<std::int64_t>());
  if (j.is_number()) return CellValue::floating(j.get<double>());
  if (j.is_string()) return CellValue::text(j.get<std::string>());
  if (j.is_object() && j.size() == 1 && j.contains("date") && j["date"].is_string()) {
    if (auto d = parse_iso_date(j["date"].get<std::string>())) return CellValue::date(*d);
  }
  throw PlanError(PlanError::Kind::InvalidParams, path + ": expected a scalar value", path);
}

PipelinePlan plan_from_json(const json& doc, const std::vector<std::string>& source_names,
                            const PlanLimits& limits, const std::string& path_prefix) {
  const std::string root = path_prefix.empty() ? "" : path_prefix + ".";
  if (!doc.is_object()) {
    throw PlanError(PlanError::Kind::InvalidParams, "plan must be an object",
                    path_prefix.empty() ? "$" : path_prefix);
  }
  auto steps_it = doc.find("steps");
  if (steps_it == doc.end() || !steps_it->is_array()) {
    throw PlanError(PlanError::Kind::InvalidParams, "plan needs a 'steps' array", root + "steps");
  }
  if (steps_it->empty() || steps_it->size() > limits.max_steps) {
    throw PlanError(PlanError::Kind::StepCount,
                    "plan has " + std::to_string(steps_it->size()) + " steps, allowed 1.." +
                        std::to_string(limits.max_steps),
                    root + "steps");
  }
  std::vector<PipelineStep> steps;
  for (std::size_t i = 0; i < steps_it->size(); ++i) {
    const json& s = (*steps_it)[i];
    const std::string at = root + "steps[" + std::to_string(i) + "]";
    if (!s.is_object()) invalid(at, "expected an object", i);
    Fields f{s, at, i};
    auto op_name = f.string("op");
    auto kind = parse_operator_kind(op_name);
    if (!kind) {
      throw PlanError(PlanError::Kind::UnknownOperator,
                      at + ".op: unknown operator '" + op_name + "'", at + ".op", i);
    }
    const json* p = f.find("params");
    if (!p) invalid(at + ".params", "missing required field", i);
    PipelineStep step{params_from_json(*kind, *p, at + ".params", i), std::nullopt,
                      f.string_or("output_name", "step" + std::to_string(i + 1))};
    if (f.find("input")) {
      if (reads_named_tables(*kind)) {
        invalid(at + ".input", std::string(to_string(*kind)) + " names its tables in params", i);
      }
      step.input = f.string("input");
    }
    steps.push_back(std::move(step));
  }
  std::string final_output;
  if (auto it = doc.find("final_output"); it != doc.end()) {
    if (!it->is_string()) invalid(root + "final_output", "expected a string", std::nullopt);
    final_output = it->get<std::string>();
  }
  PipelinePlan plan(std::move(steps), std::move(final_output), limits.max_steps);
  if (!source_names.empty()) validate_refs(plan, source_names);
  return plan;
}

ordered_json plan_to_json(const PipelinePlan& plan) {
  ordered_json doc = ordered_json::object();
  doc["steps"] = ordered_json::array();
  for (const auto& s : plan.steps()) {
    ordered_json j = ordered_json::object();
    j["op"] = std::string(to_string(s.op()));
    if (s.input) j["input"] = *s.input;
    j["params"] = params_to_json(s.params);
    j["output_name"] = s.output_name;
    doc["steps"].push_back(std::move(j));
  }
  doc["final_output"] = plan.final_output();
  return doc;
}

}  // namespace detail

PipelinePlan parse_plan(std::string_view text, const std::vector<std::string>& source_names,
                        const PlanLimits& limits) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanError(PlanError::Kind::Syntax, e.what(), "byte " + std::to_string(e.byte));
  }
  return detail::plan_from_json(doc, source_names, limits);
}

std::string serialize_plan(const PipelinePlan& plan, bool pretty) {
  return detail::plan_to_json(plan).dump(pretty ? 2 : -1);
}

bool operator==(const PipelinePlan& a, const PipelinePlan& b) {
  return serialize_plan(a, false) == serialize_plan(b, false);
}

std::string plan_json_schema() {
  using nlohmann::ordered_json;
  auto str = ordered_json{{"type", "string"}};
  auto strs = ordered_json{{"type", "array"}, {"items", str}};
  auto agg_enum = ordered_json{{"enum", {"sum", "mean", "count", "min", "max"}}};
  auto obj = [](ordered_json props, std::vector<std::string> required) {
    return ordered_json{{"type", "object"}, {"properties", std::move(props)}, {"required", required}};
  };

  ordered_json variants = ordered_json::array();
  auto add = [&](const char* op, ordered_json params) {
    variants.push_back(obj({{"op", {{"const", op}}}, {"params", std::move(params)}}, {"op", "params"}));
  };
  add("Join", obj({{"left", str},
                   {"right", str},
                   {"on", {{"type", "array"},
                           {"items", {{"oneOf", {str, obj({{"left", str}, {"right", str}},
                                                          {"left", "right"})}}}},
                           {"minItems", 1}}},
                   {"how", {{"enum", {"inner", "left"}}}}},
                  {"left", "right", "on"}));
  add("GroupBy", obj({{"keys", strs},
                      {"aggs", {{"type", "array"},
                                {"items", obj({{"column", str}, {"fn", agg_enum}, {"out_name", str}},
                                              {"column", "fn"})}}}},
                     {"keys", "aggs"}));
  add("Pivot", obj({{"index", strs}, {"pivot_col", str}, {"value_col", str}, {"agg_fn", agg_enum}},
                   {"index", "pivot_col", "value_col"}));
  add("Unpivot", obj({{"id_cols", strs}, {"var_name", str}, {"value_name", str}}, {"id_cols"}));
  add("Union", obj({{"tables", {{"type", "array"}, {"items", str}, {"minItems", 2}}}}, {"tables"}));
  add("AddColumn",
      obj({{"name", str},
           {"constant", {{"oneOf", {{{"type", {"null", "boolean", "number", "string"}}},
                                    obj({{"date", str}}, {"date"})}}}}},
          {"name", "constant"}));
  add("DropColumns", obj({{"names", strs}}, {"names"}));
  add("Rename", obj({{"mapping", {{"type", "array"},
                                  {"items", obj({{"from", str}, {"to", str}}, {"from", "to"})}}}},
                    {"mapping"}));
  add("ColumnArithmetic", obj({{"out_name", str},
                               {"expression", {{"type", "string"},
                                               {"description",
                                                "arithmetic over column names and numbers with + - * / "
                                                "and parentheses; quote odd names with backticks"}}}},
                              {"out_name", "expression"}));
  add("DateFormatting", obj({{"column", str},
                             {"in_format", {{"type", "string"},
                                            {"description",
                                             "'auto' or a pattern of yyyy, mm, dd and separators"}}},
                             {"out_format", str}},
                            {"column"}));

  ordered_json step = {{"type", "object"},
                       {"properties",
                        {{"op", {{"enum", {"Join", "GroupBy", "Pivot", "Unpivot", "Union", "AddColumn",
                                           "DropColumns", "Rename", "ColumnArithmetic",
                                           "DateFormatting"}}}},
                         {"input", {{"type", "string"},
                                    {"description",
                                     "input table for single-input operators; defaults to the "
                                     "previous step's output or the only source table"}}},
                         {"params", {{"type", "object"}}},
                         {"output_name", str}}},
                       {"required", {"op", "params", "output_name"}},
                       {"oneOf", variants}};
  ordered_json schema = {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "Pipeline plan"},
      {"type", "object"},
      {"properties",
       {{"steps", {{"type", "array"}, {"minItems", 1}, {"maxItems", kDefaultMaxSteps}, {"items", step}}},
        {"final_output", str}}},
      {"required", {"steps"}}};
  return schema.dump(2);
}

}  // namespace monteprep
