#pragma once

#include <optional>
#include <string>
#include <variant>

#include "monteprep/operators.h"
#include "monteprep/plan.h"
#include "monteprep/table.h"

namespace monteprep {

/// Why a plan failed. Present only for failed executions.
struct ExecutionDiagnostics {
  std::optional<std::size_t> failed_step;
  ErrorKind error_kind = ErrorKind::MissingColumn;
  std::string message;

  bool operator==(const ExecutionDiagnostics&) const = default;
};

struct ExecutorOptions {
  std::size_t max_pivot_values = kDefaultPivotCap;
};

/// Either the final table or the diagnostics of the first failing step.
class ExecutionResult {
 public:
  ExecutionResult(Table table) : value_(std::move(table)) {}
  ExecutionResult(ExecutionDiagnostics diagnostics) : value_(std::move(diagnostics)) {}

  bool ok() const { return value_.index() == 0; }
  explicit operator bool() const { return ok(); }
  const Table& table() const { return std::get<Table>(value_); }
  const ExecutionDiagnostics& diagnostics() const { return std::get<ExecutionDiagnostics>(value_); }

 private:
  std::variant<Table, ExecutionDiagnostics> value_;
};

/// Runs the steps in order over an environment seeded with `sources`.
/// Later bindings shadow earlier ones with the same name.
ExecutionResult execute_plan(const PipelinePlan& plan, const TableSet& sources,
                             const ExecutorOptions& options = {});

}  // namespace monteprep
