#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "monteprep/value.h"

namespace monteprep {

/// The closed operator set. Declaration order matches OperatorParams.
enum class OperatorKind {
  Join,
  GroupBy,
  Pivot,
  Unpivot,
  Union,
  AddColumn,
  DropColumns,
  Rename,
  ColumnArithmetic,
  DateFormatting,
};

inline constexpr std::size_t kOperatorKindCount = 10;

std::string_view to_string(OperatorKind kind);
std::optional<OperatorKind> parse_operator_kind(std::string_view name);
const std::vector<OperatorKind>& all_operator_kinds();

enum class AggFn { Sum, Mean, Count, Min, Max };
std::string_view to_string(AggFn fn);
std::optional<AggFn> parse_agg_fn(std::string_view name);

enum class JoinHow { Inner, Left };

/// Arithmetic over column references and numeric literals with + - * /.
class Expression {
 public:
  enum class Kind { Column, Literal, Negate, Binary };

  static Expression column(std::string name);
  static Expression literal(CellValue number);
  static Expression negate(Expression operand);
  static Expression binary(char op, Expression lhs, Expression rhs);

  Kind kind() const { return kind_; }
  const std::string& column_name() const { return column_; }
  const CellValue& literal_value() const { return literal_; }
  char op() const { return op_; }
  const Expression& lhs() const { return *lhs_; }
  const Expression& rhs() const { return *rhs_; }
  const Expression& operand() const { return *lhs_; }

  /// Column names in first-reference order, without duplicates.
  std::vector<std::string> columns() const;

  /// Canonical, fully parenthesised-where-needed text that parses back to
  /// an equal expression.
  std::string to_string() const;

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  Kind kind_ = Kind::Literal;
  std::string column_;
  CellValue literal_;
  char op_ = 0;
  std::shared_ptr<const Expression> lhs_;
  std::shared_ptr<const Expression> rhs_;
};

class ExpressionSyntaxError : public std::runtime_error {
 public:
  ExpressionSyntaxError(const std::string& message, std::size_t position)
      : std::runtime_error(message), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Identifiers are `[A-Za-z_][A-Za-z0-9_.]*` or backtick-quoted names.
Expression parse_expression(std::string_view text);

struct JoinParams {
  std::string left;
  std::string right;
  std::vector<std::pair<std::string, std::string>> on;
  JoinHow how = JoinHow::Inner;
};

struct Aggregation {
  std::string column;
  AggFn fn = AggFn::Sum;
  std::string out_name;
};

struct GroupByParams {
  std::vector<std::string> keys;
  std::vector<Aggregation> aggs;
};

struct PivotParams {
  std::vector<std::string> index;
  std::string pivot_col;
  std::string value_col;
  AggFn agg = AggFn::Sum;
};

struct UnpivotParams {
  std::vector<std::string> id_cols;
  std::string var_name = "variable";
  std::string value_name = "value";
};

struct UnionParams {
  std::vector<std::string> tables;
};

struct AddColumnParams {
  std::string name;
  CellValue constant;
};

struct DropColumnsParams {
  std::vector<std::string> names;
};

struct RenameParams {
  std::vector<std::pair<std::string, std::string>> mapping;
};

struct ColumnArithmeticParams {
  std::string out_name;
  Expression expression;
};

struct DateFormattingParams {
  std::string column;
  std::string in_format = "auto";
  std::string out_format = "yyyy-mm-dd";
};

/// Alternative index equals the OperatorKind value.
using OperatorParams =
    std::variant<JoinParams, GroupByParams, PivotParams, UnpivotParams, UnionParams,
                 AddColumnParams, DropColumnsParams, RenameParams, ColumnArithmeticParams,
                 DateFormattingParams>;

inline OperatorKind kind_of(const OperatorParams& params) {
  return static_cast<OperatorKind>(params.index());
}

/// True for operators that read their input tables from their own params
/// (Join, Union) rather than from the step input.
bool reads_named_tables(OperatorKind kind);

struct PipelineStep {
  OperatorParams params;
  /// Input table for single-input operators. Defaults to the previous
  /// step's output, or to the only source table for the first step.
  std::optional<std::string> input;
  std::string output_name;

  OperatorKind op() const { return kind_of(params); }
};

class PlanError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownOperator, InvalidParams, DanglingRef, StepCount };

  PlanError(Kind kind, std::string message, std::string path = {},
            std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(std::move(message)), kind_(kind), path_(std::move(path)), step_(step) {}

  Kind kind() const { return kind_; }
  /// Location inside the plan document, e.g. `steps[1].params.right`, or a
  /// byte offset for syntax errors.
  const std::string& path() const { return path_; }
  std::optional<std::size_t> step() const { return step_; }

 private:
  Kind kind_;
  std::string path_;
  std::optional<std::size_t> step_;
};

std::string_view to_string(PlanError::Kind kind);

inline constexpr std::size_t kDefaultMaxSteps = 10;

/// Ordered operator applications plus the name of the result table.
class PipelinePlan {
 public:
  /// Throws PlanError(StepCount) unless 1 <= steps <= max_steps. An empty
  /// final_output defaults to the last step's output name.
  PipelinePlan(std::vector<PipelineStep> steps, std::string final_output = {},
               std::size_t max_steps = kDefaultMaxSteps);

  const std::vector<PipelineStep>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  const std::string& final_output() const { return final_output_; }

  friend bool operator==(const PipelinePlan& a, const PipelinePlan& b);

 private:
  std::vector<PipelineStep> steps_;
  std::string final_output_;
};

/// Checks that every table reference resolves to a source or an earlier
/// step's output, that single-input steps can resolve a default input, and
/// that final_output is bound. Throws PlanError(DanglingRef).
void validate_refs(const PipelinePlan& plan, const std::vector<std::string>& source_names);

/// Resolved input table name of a single-input step.
std::optional<std::string> resolve_input(const PipelinePlan& plan, std::size_t step,
                                         const std::vector<std::string>& source_names);

}  // namespace monteprep
