#include "monteprep/sandbox.h"

#include <algorithm>
#include <cstdint>
#include <set>

#include "internal/action_json.h"
#include "monteprep/csv.h"

namespace monteprep {

namespace {

constexpr std::array<std::string_view, 5> kActionNames = {
    "SchemaMapping", "OperatorDiscovery", "CodeSynthesis", "CodeRefinement", "Termination"};

[[noreturn]] void invalid_params(const std::string& msg) {
  throw SandboxError(SandboxError::Kind::InvalidParams, msg);
}

void check_mapping(const TaskContext& ctx, const SchemaMappingParams& m) {
  std::set<std::string> targets;
  for (const auto& e : m.entries) {
    const std::string target = trim(e.target_column);
    if (!ctx.target.contains(target)) {
      invalid_params("mapping names unknown target column '" + target + "'");
    }
    if (!targets.insert(target).second) {
      invalid_params("target column '" + target + "' is mapped more than once");
    }
    auto it = ctx.sources.find(e.source_table);
    if (it == ctx.sources.end()) {
      invalid_params("mapping names unknown source table '" + e.source_table + "'");
    }
    if (!it->second.schema().contains(e.source_column)) {
      invalid_params("source table '" + e.source_table + "' has no column '" + e.source_column + "'");
    }
  }
}

// Runs a freshly proposed plan so later actions and the reward see its
// outcome.
void validate_plan(const TaskContext& ctx, ReasoningState& s) {
  s.output.reset();
  s.diagnostics.reset();
  try {
    validate_refs(*s.plan, ctx.source_names());
  } catch (const PlanError& e) {
    s.diagnostics = ExecutionDiagnostics{e.step(), ErrorKind::MissingTable, e.what()};
    return;
  }
  auto result = execute_plan(*s.plan, ctx.sources, ctx.executor);
  if (result.ok()) {
    s.output = std::make_shared<const Table>(result.table());
  } else {
    s.diagnostics = result.diagnostics();
  }
}

}  // namespace

std::string_view to_string(ActionType type) { return kActionNames[static_cast<std::size_t>(type)]; }

std::optional<ActionType> parse_action_type(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == name) return static_cast<ActionType>(i);
  }
  return std::nullopt;
}

bool OperatorDiscoveryParams::contains(OperatorKind kind) const {
  return std::any_of(operators.begin(), operators.end(),
                     [kind](const DiscoveredOperator& d) { return d.kind == kind; });
}

std::string serialize_action_params(const ActionParams& params) {
  return detail::params_to_json(params).dump();
}

Action::Action(ActionParams params) : params_(std::move(params)) {
  key_ = std::string(to_string(type())) + ":" + serialize_action_params(params_);
}

TargetSchema::TargetSchema(std::vector<TargetColumn> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) throw TableError("target schema has no columns");
  std::set<std::string> seen;
  for (auto& c : columns_) {
    c.name = trim(c.name);
    if (c.name.empty()) throw TableError("target column with empty name");
    if (!seen.insert(c.name).second) throw TableError("duplicate target column '" + c.name + "'");
  }
}

std::vector<std::string> TargetSchema::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

bool TargetSchema::contains(std::string_view name) const {
  const std::string key = trim(name);
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const TargetColumn& c) { return c.name == key; });
}

std::vector<std::string> TaskContext::source_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sources) out.push_back(name);
  return out;
}

std::shared_ptr<const TaskContext> make_task_context(TableSet sources, TargetSchema target,
                                                     std::size_t sample_size, PlanLimits limits) {
  if (sources.empty()) throw TableError("task has no source tables");
  auto ctx = std::make_shared<TaskContext>();
  ctx->sample_rows = sample_size;
  ctx->limits = limits;
  for (const auto& [name, table] : sources) {
    ctx->samples.emplace(name, sample_rows(table, sample_size).table);
  }
  ctx->sources = std::move(sources);
  ctx->target = std::move(target);

  detail::ordered_json doc;
  doc["sample_rows"] = sample_size;
  for (const auto& [name, sample] : ctx->samples) {
    detail::ordered_json t;
    t["name"] = name;
    for (const auto& c : sample.schema().columns()) {
      t["columns"].push_back({{"name", c.name}, {"dtype", std::string(to_string(c.dtype))}});
    }
    t["sample"] = to_csv(sample);
    doc["sources"].push_back(std::move(t));
  }
  doc["target"] = detail::target_to_json(ctx->target);
  ctx->digest = fnv1a128_hex(doc.dump());
  return ctx;
}

ReasoningState initial_state(std::shared_ptr<const TaskContext> context) {
  if (!context) throw std::invalid_argument("initial_state needs a task context");
  ReasoningState s;
  s.context = std::move(context);
  return s;
}

const std::vector<ActionType>& transition_row(std::optional<ActionType> last) {
  using A = ActionType;
  static const std::vector<ActionType> root = {A::SchemaMapping, A::OperatorDiscovery,
                                               A::CodeSynthesis};
  static const std::array<std::vector<ActionType>, 5> rows = {
      std::vector<ActionType>{A::OperatorDiscovery, A::CodeSynthesis},
      std::vector<ActionType>{A::SchemaMapping, A::CodeSynthesis},
      std::vector<ActionType>{A::CodeRefinement, A::Termination},
      std::vector<ActionType>{A::Termination},
      std::vector<ActionType>{},
  };
  if (!last) return root;
  return rows[static_cast<std::size_t>(*last)];
}

std::vector<ActionType> valid_next(const ReasoningState& state) {
  if (state.terminal) return {};
  std::optional<ActionType> last;
  if (!state.history.empty()) last = state.history.back();
  std::vector<ActionType> out;
  for (ActionType t : transition_row(last)) {
    if (t == ActionType::SchemaMapping && state.mapping) continue;
    if (t == ActionType::OperatorDiscovery && state.discovered_ops) continue;
    out.push_back(t);
  }
  return out;
}

ReasoningState apply_action(const ReasoningState& state, const Action& action) {
  const auto allowed = valid_next(state);
  if (std::find(allowed.begin(), allowed.end(), action.type()) == allowed.end()) {
    std::string from = state.history.empty() ? "root" : std::string(to_string(state.history.back()));
    throw SandboxError(SandboxError::Kind::InvalidTransition,
                       std::string(to_string(action.type())) + " is not admissible after " + from);
  }
  const TaskContext& ctx = *state.context;
  ReasoningState next = state;
  next.history.push_back(action.type());

  switch (action.type()) {
    case ActionType::SchemaMapping: {
      const auto& m = std::get<SchemaMappingParams>(action.params());
      check_mapping(ctx, m);
      next.mapping = m;
      break;
    }
    case ActionType::OperatorDiscovery:
      next.discovered_ops = std::get<OperatorDiscoveryParams>(action.params());
      break;
    case ActionType::CodeSynthesis:
      next.plan = std::get<CodeSynthesisParams>(action.params()).plan;
      validate_plan(ctx, next);
      break;
    case ActionType::CodeRefinement:
      next.plan = std::get<CodeRefinementParams>(action.params()).plan;
      validate_plan(ctx, next);
      break;
    case ActionType::Termination:
      next.terminal = true;
      break;
  }
  return next;
}

std::string state_fingerprint(const ReasoningState& state, ActionType next_type) {
  detail::ordered_json doc;
  doc["context"] = state.context->digest;
  doc["mapping"] = state.mapping ? detail::params_to_json(*state.mapping) : detail::ordered_json();
  doc["operators"] =
      state.discovered_ops ? detail::params_to_json(*state.discovered_ops) : detail::ordered_json();
  doc["plan"] = state.plan ? detail::plan_to_json(*state.plan) : detail::ordered_json();
  doc["diagnostics"] =
      state.diagnostics ? detail::diagnostics_to_json(*state.diagnostics) : detail::ordered_json();
  doc["next"] = std::string(to_string(next_type));
  return fnv1a128_hex(doc.dump());
}

std::string fnv1a128_hex(std::string_view data) {
  __extension__ typedef unsigned __int128 u128;
  const u128 prime = (static_cast<u128>(0x0000000001000000ULL) << 64) | 0x000000000000013BULL;
  u128 h = (static_cast<u128>(0x6C62272E07BB0142ULL) << 64) | 0x62B821756295C58DULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= prime;
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(32, '0');
  for (int i = 31; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[static_cast<unsigned>(h & 0xF)];
    h >>= 4;
  }
  return out;
}

}  // namespace monteprep
