#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "monteprep/sandbox.h"

// Rule-based proposal functions. They read only the sampled sources and the
// target schema held by the task context, plus execution feedback carried
// by the state.
namespace monteprep::heuristics {

/// Lower-cased name parts split on non-alphanumerics and camelCase humps.
std::vector<std::string> name_tokens(std::string_view name);

/// Dice coefficient over the token sets of two column names.
double name_similarity(std::string_view a, std::string_view b);

inline constexpr double kSimilarityThreshold = 0.5;

/// Aggregate implied by words such as total, avg or count in the name.
std::optional<AggFn> aggregate_hint(const TargetColumn& column);

/// Value named by a description of the form "constant <value>".
std::optional<CellValue> constant_hint(const TargetColumn& column);

/// Arithmetic expression spelled out by the description, when every column
/// it uses is in `available`.
std::optional<Expression> expression_hint(const TargetColumn& column,
                                          const std::set<std::string>& available);

/// Non-canonical date format shared by every sampled value of a column.
std::optional<std::string> date_format_of(const Table& sample, std::string_view column);

/// Exact name matches first; with `use_similarity`, remaining targets that
/// are not derived (aggregate, constant, expression) are paired greedily by
/// name similarity.
SchemaMappingParams propose_mapping(const TaskContext& ctx, bool use_similarity = true);

/// Operators suggested by the difference between the sources and the
/// target. Without a mapping one is computed first.
OperatorDiscoveryParams discover_operators(const TaskContext& ctx,
                                           const SchemaMappingParams* mapping);

/// Composes a plan from whatever mapping and operator list are available.
/// Returns nullopt when no plan fits the step limit.
std::optional<PipelinePlan> synthesize_plan(const TaskContext& ctx,
                                            const SchemaMappingParams* mapping,
                                            const OperatorDiscoveryParams* ops);

/// Repairs the state's plan: patches or neutralises the failing step when
/// diagnostics are present, otherwise renames near-miss columns and drops
/// extras in the executed output.
std::optional<PipelinePlan> refine_plan(const ReasoningState& state);

/// Judge score in {0, 0.5, 1} from target-name coverage of the plan output
/// (the preview when given, else the plan run on the samples).
double judge_score(const TaskContext& ctx, const PipelinePlan& plan, const Table* preview);

}  // namespace monteprep::heuristics
