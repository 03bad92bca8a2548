#pragma once

#include <string>
#include <vector>

#include "monteprep/sandbox.h"
#include "monteprep/table.h"

namespace monteprep {

/// Fraction of target names present (after trimming) among `names`.
/// This is both the execution-aware reward and the CS metric.
double metric_cs(const std::vector<std::string>& names, const TargetSchema& target);
double metric_cs(const Table& output, const TargetSchema& target);

/// 1 iff the column name sets match and, with columns aligned by name, the
/// row multisets are equal. Integer and Float cells compare numerically,
/// within `float_tolerance` (absolute) when it is positive.
int metric_ex(const Table& output, const Table& reference, double float_tolerance = 0.0);

}  // namespace monteprep
