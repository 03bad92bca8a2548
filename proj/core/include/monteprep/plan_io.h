#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "monteprep/plan.h"

namespace monteprep {

struct PlanLimits {
  std::size_t max_steps = kDefaultMaxSteps;
};

/// Parses and validates a plan document. With a non-empty `source_names`
/// every table reference is checked (see validate_refs). Errors carry the
/// failing location: a byte offset for syntax errors, a field path otherwise.
PipelinePlan parse_plan(std::string_view text, const std::vector<std::string>& source_names = {},
                        const PlanLimits& limits = {});

/// Object-notation rendering of a plan; `parse_plan` reads it back.
std::string serialize_plan(const PipelinePlan& plan, bool pretty = true);

/// JSON Schema describing the plan document format.
std::string plan_json_schema();

}  // namespace monteprep
