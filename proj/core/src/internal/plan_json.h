#pragma once

#include <nlohmann/json.hpp>

#include "monteprep/plan.h"
#include "monteprep/plan_io.h"

namespace monteprep::detail {

using ordered_json = nlohmann::ordered_json;

PipelinePlan plan_from_json(const nlohmann::json& doc, const std::vector<std::string>& source_names,
                            const PlanLimits& limits, const std::string& path_prefix = {});
ordered_json plan_to_json(const PipelinePlan& plan);

ordered_json cell_to_json(const CellValue& v);
CellValue cell_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace monteprep::detail
