#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "internal/plan_json.h"
#include "monteprep/sandbox.h"

namespace monteprep::detail {

/// Reply body could not be turned into params; the message names the field.
class ParamsFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ordered_json params_to_json(const ActionParams& params);
ordered_json diagnostics_to_json(const ExecutionDiagnostics& d);
ordered_json target_to_json(const TargetSchema& target);

/// Reads the reply object of `type`. Plans are checked against
/// `source_names` and `limits`.
ActionParams params_from_json(ActionType type, const nlohmann::json& body,
                              const std::vector<std::string>& source_names,
                              const PlanLimits& limits);

}  // namespace monteprep::detail
