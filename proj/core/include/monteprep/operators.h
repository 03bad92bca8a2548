#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "monteprep/plan.h"
#include "monteprep/table.h"

namespace monteprep {

enum class ErrorKind {
  MissingColumn,
  MissingTable,
  TypeMismatch,
  DuplicateColumn,
  EmptyPivot,
  BadDateFormat,
  ExpressionError,
};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> parse_error_kind(std::string_view name);

/// Failure of a single operator application.
class OpError : public std::runtime_error {
 public:
  OpError(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr std::size_t kDefaultPivotCap = 100;

// Each operator is a pure function of its inputs. On failure it throws
// OpError and produces nothing.

Table op_join(const Table& left, const Table& right, const JoinParams& params);
Table op_groupby(const Table& input, const GroupByParams& params);
Table op_pivot(const Table& input, const PivotParams& params,
               std::size_t max_pivot_values = kDefaultPivotCap);
Table op_unpivot(const Table& input, const UnpivotParams& params);
Table op_union(std::span<const Table> tables);
Table op_add_column(const Table& input, const AddColumnParams& params);
Table op_drop_columns(const Table& input, const DropColumnsParams& params);
Table op_rename(const Table& input, const RenameParams& params);
Table op_column_arithmetic(const Table& input, const ColumnArithmeticParams& params);
Table op_date_format(const Table& input, const DateFormattingParams& params);

/// Date patterns tried, in order, when the input format is `auto`.
const std::vector<std::string>& auto_date_formats();

/// Parses `text` under a pattern of `yyyy`, `mm`, `dd` tokens and literal
/// separators. `mm` and `dd` accept one or two digits.
std::optional<Date> parse_date_with_format(std::string_view text, std::string_view format);
std::string format_date_with_format(const Date& date, std::string_view format);

/// Returns the first auto format that parses `text`, if any.
std::optional<std::string> detect_date_format(std::string_view text);

}  // namespace monteprep
