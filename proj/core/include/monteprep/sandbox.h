#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "monteprep/executor.h"
#include "monteprep/plan.h"
#include "monteprep/plan_io.h"
#include "monteprep/table.h"

namespace monteprep {

/// The five sandbox actions, in tie-break order.
enum class ActionType {
  SchemaMapping,
  OperatorDiscovery,
  CodeSynthesis,
  CodeRefinement,
  Termination,
};

inline constexpr std::array<ActionType, 5> kAllActionTypes = {
    ActionType::SchemaMapping, ActionType::OperatorDiscovery, ActionType::CodeSynthesis,
    ActionType::CodeRefinement, ActionType::Termination};

std::string_view to_string(ActionType type);
std::optional<ActionType> parse_action_type(std::string_view name);

struct MappingEntry {
  std::string source_table;
  std::string source_column;
  std::string target_column;
  std::string note;

  bool operator==(const MappingEntry&) const = default;
};

struct SchemaMappingParams {
  std::vector<MappingEntry> entries;
  bool operator==(const SchemaMappingParams&) const = default;
};

struct DiscoveredOperator {
  OperatorKind kind = OperatorKind::Rename;
  std::string note;
  bool operator==(const DiscoveredOperator&) const = default;
};

struct OperatorDiscoveryParams {
  std::vector<DiscoveredOperator> operators;
  bool operator==(const OperatorDiscoveryParams&) const = default;
  bool contains(OperatorKind kind) const;
};

struct CodeSynthesisParams {
  PipelinePlan plan;
};

struct CodeRefinementParams {
  PipelinePlan plan;
  /// The failure this repair addresses, when the state carried one.
  std::optional<ExecutionDiagnostics> addressed;
};

struct TerminationParams {};

/// Alternative index equals the ActionType value.
using ActionParams = std::variant<SchemaMappingParams, OperatorDiscoveryParams, CodeSynthesisParams,
                                  CodeRefinementParams, TerminationParams>;

/// An action type with its parameter object. The type is the params variant.
class Action {
 public:
  explicit Action(ActionParams params);

  ActionType type() const { return static_cast<ActionType>(params_.index()); }
  const ActionParams& params() const { return params_; }

  /// Canonical serialization; equal keys mean equal actions.
  const std::string& key() const { return key_; }

  friend bool operator==(const Action& a, const Action& b) { return a.key_ == b.key_; }

 private:
  ActionParams params_;
  std::string key_;
};

/// Canonical object-notation form of action parameters.
std::string serialize_action_params(const ActionParams& params);

struct TargetColumn {
  std::string name;
  std::string description;
  DType dtype = DType::Any;

  bool operator==(const TargetColumn&) const = default;
};

/// Instance-free target: names, optional descriptions and types only.
class TargetSchema {
 public:
  TargetSchema() = default;
  /// Throws TableError on empty or duplicate (trimmed) names.
  explicit TargetSchema(std::vector<TargetColumn> columns);

  const std::vector<TargetColumn>& columns() const { return columns_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return columns_.size(); }
  bool contains(std::string_view name) const;

 private:
  std::vector<TargetColumn> columns_;
};

inline constexpr std::size_t kDefaultSampleRows = 5;

/// Immutable per-task inputs shared by every reasoning state.
struct TaskContext {
  TableSet sources;
  /// Head samples of each source; the only rows oracles may see.
  TableSet samples;
  TargetSchema target;
  std::size_t sample_rows = kDefaultSampleRows;
  PlanLimits limits;
  ExecutorOptions executor;
  /// Digest of sources' schemas and samples plus the target; set by
  /// make_task_context.
  std::string digest;

  std::vector<std::string> source_names() const;
};

std::shared_ptr<const TaskContext> make_task_context(TableSet sources, TargetSchema target,
                                                     std::size_t sample_rows = kDefaultSampleRows,
                                                     PlanLimits limits = {});

/// Accumulated sandbox facts at a search node. Values are never mutated;
/// apply_action returns a new state.
struct ReasoningState {
  std::shared_ptr<const TaskContext> context;
  std::optional<SchemaMappingParams> mapping;
  std::optional<OperatorDiscoveryParams> discovered_ops;
  std::optional<PipelinePlan> plan;
  std::optional<ExecutionDiagnostics> diagnostics;
  /// Output of the last validation run of `plan`, when it succeeded.
  std::shared_ptr<const Table> output;
  std::vector<ActionType> history;
  bool terminal = false;

  std::size_t depth() const { return history.size(); }
};

ReasoningState initial_state(std::shared_ptr<const TaskContext> context);

class SandboxError : public std::runtime_error {
 public:
  enum class Kind { InvalidTransition, InvalidParams };
  SandboxError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Allowed successors of each action; the root row is keyed by nullopt.
const std::vector<ActionType>& transition_row(std::optional<ActionType> last);

/// Action types admissible at `state`, in declaration order. Terminal
/// states have none; mapping and discovery are not offered twice.
std::vector<ActionType> valid_next(const ReasoningState& state);

/// The state transition. CodeSynthesis and CodeRefinement run the plan
/// against the sources and record diagnostics on failure. Throws
/// SandboxError for inadmissible actions or malformed params.
ReasoningState apply_action(const ReasoningState& state, const Action& action);

/// Stable digest of everything a proposal may depend on: source schemas
/// and samples, target, mapping, discovered operators, plan, diagnostics
/// and the requested action type.
std::string state_fingerprint(const ReasoningState& state, ActionType next_type);

/// Order-stable 128-bit FNV-1a digest, hex encoded.
std::string fnv1a128_hex(std::string_view data);

}  // namespace monteprep
