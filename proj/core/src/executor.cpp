#include "monteprep/executor.h"

#include <deque>
#include <map>

namespace monteprep {

ExecutionResult execute_plan(const PipelinePlan& plan, const TableSet& sources,
                             const ExecutorOptions& options) {
  std::vector<std::string> source_names;
  std::map<std::string, const Table*, std::less<>> env;
  for (const auto& [name, table] : sources) {
    source_names.push_back(name);
    env[name] = &table;
  }
  std::deque<Table> produced;

  auto lookup = [&](const std::string& ref, std::size_t step) -> const Table& {
    auto it = env.find(ref);
    if (it == env.end()) {
      throw ExecutionDiagnostics{step, ErrorKind::MissingTable,
                                 "step " + std::to_string(step + 1) + ": table '" + ref +
                                     "' is not defined"};
    }
    return *it->second;
  };

  try {
    for (std::size_t i = 0; i < plan.steps().size(); ++i) {
      const PipelineStep& step = plan.steps()[i];
      std::optional<Table> out;
      try {
        if (const auto* j = std::get_if<JoinParams>(&step.params)) {
          out = op_join(lookup(j->left, i), lookup(j->right, i), *j);
        } else if (const auto* u = std::get_if<UnionParams>(&step.params)) {
          std::vector<Table> inputs;
          for (const auto& t : u->tables) inputs.push_back(lookup(t, i));
          out = op_union(inputs);
        } else {
          auto ref = resolve_input(plan, i, source_names);
          if (!ref) {
            throw ExecutionDiagnostics{i, ErrorKind::MissingTable,
                                       "step 1 has no input and there are several source tables"};
          }
          const Table& in = lookup(*ref, i);
          out = std::visit(
              [&](const auto& p) -> Table {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, GroupByParams>) return op_groupby(in, p);
                else if constexpr (std::is_same_v<P, PivotParams>)
                  return op_pivot(in, p, options.max_pivot_values);
                else if constexpr (std::is_same_v<P, UnpivotParams>) return op_unpivot(in, p);
                else if constexpr (std::is_same_v<P, AddColumnParams>) return op_add_column(in, p);
                else if constexpr (std::is_same_v<P, DropColumnsParams>) return op_drop_columns(in, p);
                else if constexpr (std::is_same_v<P, RenameParams>) return op_rename(in, p);
                else if constexpr (std::is_same_v<P, ColumnArithmeticParams>)
                  return op_column_arithmetic(in, p);
                else if constexpr (std::is_same_v<P, DateFormattingParams>) return op_date_format(in, p);
                else throw OpError(ErrorKind::MissingTable, "operator reads named tables");
              },
              step.params);
        }
      } catch (const OpError& e) {
        return ExecutionDiagnostics{i, e.kind(), "step " + std::to_string(i + 1) + " (" +
                                                     std::string(to_string(step.op())) + "): " + e.what()};
      } catch (const TableError& e) {
        return ExecutionDiagnostics{i, ErrorKind::TypeMismatch, "step " + std::to_string(i + 1) + " (" +
                                                                    std::string(to_string(step.op())) +
                                                                    "): " + e.what()};
      }
      produced.push_back(out->renamed(step.output_name));
      env[step.output_name] = &produced.back();
    }
    auto it = env.find(plan.final_output());
    if (it == env.end()) {
      return ExecutionDiagnostics{std::nullopt, ErrorKind::MissingTable,
                                  "final_output '" + plan.final_output() + "' is not defined"};
    }
    return *it->second;
  } catch (ExecutionDiagnostics& d) {
    return std::move(d);
  }
}

}  // namespace monteprep
