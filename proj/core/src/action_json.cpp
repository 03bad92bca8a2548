#include "internal/action_json.h"

namespace monteprep::detail {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ParamsFormatError(path + ": " + what);
}

std::string text_field(const json& obj, const char* key, const std::string& path, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) bad(path + "." + key, "missing required field");
    return {};
  }
  if (!it->is_string()) bad(path + "." + key, "expected a string");
  return it->get<std::string>();
}

const json& array_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(key, "missing required field");
  if (!it->is_array()) bad(key, "expected an array");
  return *it;
}

SchemaMappingParams mapping_from_json(const json& body) {
  SchemaMappingParams out;
  const json& arr = array_field(body, "mapping");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "mapping[" + std::to_string(i) + "]";
    if (!arr[i].is_object()) bad(path, "expected an object");
    out.entries.push_back({text_field(arr[i], "table", path, true),
                           text_field(arr[i], "column", path, true),
                           text_field(arr[i], "target", path, true),
                           text_field(arr[i], "note", path, false)});
  }
  return out;
}

OperatorDiscoveryParams operators_from_json(const json& body) {
  OperatorDiscoveryParams out;
  const json& arr = array_field(body, "operators");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "operators[" + std::to_string(i) + "]";
    std::string name;
    std::string note;
    if (arr[i].is_string()) {
      name = arr[i].get<std::string>();
    } else if (arr[i].is_object()) {
      name = text_field(arr[i], "op", path, true);
      note = text_field(arr[i], "note", path, false);
    } else {
      bad(path, "expected an operator name or object");
    }
    auto kind = parse_operator_kind(name);
    if (!kind) bad(path, "unknown operator '" + name + "'");
    out.operators.push_back({*kind, std::move(note)});
  }
  return out;
}

PipelinePlan plan_field(const json& body, const std::vector<std::string>& source_names,
                        const PlanLimits& limits) {
  auto it = body.find("plan");
  if (it == body.end()) bad("plan", "missing required field");
  try {
    return plan_from_json(*it, source_names, limits, "plan.");
  } catch (const PlanError& e) {
    throw ParamsFormatError(e.what());
  }
}

}  // namespace

ordered_json diagnostics_to_json(const ExecutionDiagnostics& d) {
  ordered_json j;
  j["failed_step"] = d.failed_step ? ordered_json(*d.failed_step) : ordered_json();
  j["error_kind"] = std::string(to_string(d.error_kind));
  j["message"] = d.message;
  return j;
}

ordered_json target_to_json(const TargetSchema& target) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : target.columns()) {
    ordered_json col;
    col["name"] = c.name;
    if (!c.description.empty()) col["description"] = c.description;
    if (c.dtype != DType::Any) col["dtype"] = std::string(to_string(c.dtype));
    arr.push_back(std::move(col));
  }
  return arr;
}

ordered_json params_to_json(const ActionParams& params) {
  ordered_json j = ordered_json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SchemaMappingParams>) {
          j["mapping"] = ordered_json::array();
          for (const auto& e : p.entries) {
            j["mapping"].push_back({{"table", e.source_table},
                                    {"column", e.source_column},
                                    {"target", e.target_column},
                                    {"note", e.note}});
          }
        } else if constexpr (std::is_same_v<T, OperatorDiscoveryParams>) {
          j["operators"] = ordered_json::array();
          for (const auto& o : p.operators) {
            j["operators"].push_back({{"op", std::string(to_string(o.kind))}, {"note", o.note}});
          }
        } else if constexpr (std::is_same_v<T, CodeSynthesisParams>) {
          j["plan"] = plan_to_json(p.plan);
        } else if constexpr (std::is_same_v<T, CodeRefinementParams>) {
          j["plan"] = plan_to_json(p.plan);
          if (p.addressed) j["addressed"] = diagnostics_to_json(*p.addressed);
        }
      },
      params);
  return j;
}

ActionParams params_from_json(ActionType type, const json& body,
                              const std::vector<std::string>& source_names,
                              const PlanLimits& limits) {
  if (!body.is_object()) bad("reply", "expected an object");
  switch (type) {
    case ActionType::SchemaMapping:
      return mapping_from_json(body);
    case ActionType::OperatorDiscovery:
      return operators_from_json(body);
    case ActionType::CodeSynthesis:
      return CodeSynthesisParams{plan_field(body, source_names, limits)};
    case ActionType::CodeRefinement:
      return CodeRefinementParams{plan_field(body, source_names, limits), std::nullopt};
    case ActionType::Termination:
      return TerminationParams{};
  }
  bad("reply", "unknown action type");
}

}  // namespace monteprep::detail
