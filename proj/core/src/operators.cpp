#include "monteprep/operators.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

namespace monteprep {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::MissingTable: return "MissingTable";
    case ErrorKind::TypeMismatch: return "TypeMismatch";
    case ErrorKind::DuplicateColumn: return "DuplicateColumn";
    case ErrorKind::EmptyPivot: return "EmptyPivot";
    case ErrorKind::BadDateFormat: return "BadDateFormat";
    case ErrorKind::ExpressionError: return "ExpressionError";
  }
  return "?";
}

std::optional<ErrorKind> parse_error_kind(std::string_view name) {
  for (ErrorKind k : {ErrorKind::MissingColumn, ErrorKind::MissingTable, ErrorKind::TypeMismatch,
                      ErrorKind::DuplicateColumn, ErrorKind::EmptyPivot, ErrorKind::BadDateFormat,
                      ErrorKind::ExpressionError}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

std::size_t require_column(const Table& t, std::string_view name) {
  auto idx = t.schema().index_of(name);
  if (!idx) {
    throw OpError(ErrorKind::MissingColumn,
                  "column '" + std::string(name) + "' not found in table '" + t.name() + "'");
  }
  return *idx;
}

std::vector<std::size_t> require_columns(const Table& t, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(require_column(t, n));
  return out;
}

Schema make_schema(std::vector<ColumnSpec> cols) {
  std::set<std::string> seen;
  for (const auto& c : cols) {
    if (!seen.insert(trim(c.name)).second) {
      throw OpError(ErrorKind::DuplicateColumn, "duplicate output column '" + trim(c.name) + "'");
    }
  }
  return Schema(std::move(cols));
}

std::vector<CellValue> key_of(const Row& row, const std::vector<std::size_t>& idx) {
  std::vector<CellValue> key;
  key.reserve(idx.size());
  for (auto i : idx) key.push_back(row[i]);
  return key;
}

DType dtype_of_kind(CellKind k) {
  switch (k) {
    case CellKind::Boolean: return DType::Boolean;
    case CellKind::Integer: return DType::Integer;
    case CellKind::Float: return DType::Float;
    case CellKind::Date: return DType::Date;
    case CellKind::Text: return DType::Text;
    case CellKind::Null: return DType::Any;
  }
  return DType::Any;
}

// A column counts as numeric when its dtype is, or when it is untyped and
// every non-Null cell is a number.
bool column_is_numeric(const Table& t, std::size_t col) {
  DType d = t.schema()[col].dtype;
  if (is_numeric(d)) return true;
  if (d != DType::Any) return false;
  return std::all_of(t.rows().begin(), t.rows().end(),
                     [&](const Row& r) { return r[col].is_null() || r[col].is_numeric(); });
}

bool column_all_integer(const Table& t, std::size_t col) {
  DType d = t.schema()[col].dtype;
  if (d == DType::Integer) return true;
  if (d != DType::Any) return false;
  return std::all_of(t.rows().begin(), t.rows().end(), [&](const Row& r) {
    return r[col].is_null() || r[col].kind() == CellKind::Integer;
  });
}

bool needs_numeric(AggFn fn, bool numeric_min_max) {
  if (fn == AggFn::Sum || fn == AggFn::Mean) return true;
  if (fn == AggFn::Min || fn == AggFn::Max) return numeric_min_max;
  return false;
}

DType agg_dtype(AggFn fn, DType input, bool integer_input) {
  switch (fn) {
    case AggFn::Count: return DType::Integer;
    case AggFn::Mean: return DType::Float;
    case AggFn::Sum: return integer_input ? DType::Integer : DType::Float;
    case AggFn::Min:
    case AggFn::Max: return input;
  }
  return DType::Any;
}

// Reduces the non-Null values of one group.
CellValue aggregate(AggFn fn, const std::vector<CellValue>& values, bool integer_input) {
  std::vector<const CellValue*> present;
  for (const auto& v : values) {
    if (!v.is_null()) present.push_back(&v);
  }
  switch (fn) {
    case AggFn::Count: return CellValue::integer(static_cast<std::int64_t>(present.size()));
    case AggFn::Sum: {
      if (integer_input) {
        std::int64_t acc = 0;
        for (const auto* v : present) {
          if (__builtin_add_overflow(acc, v->as_int(), &acc)) {
            throw OpError(ErrorKind::TypeMismatch, "integer overflow in sum");
          }
        }
        return CellValue::integer(acc);
      }
      double acc = 0.0;
      for (const auto* v : present) acc += v->numeric();
      return CellValue::floating(acc);
    }
    case AggFn::Mean: {
      if (present.empty()) return CellValue::null();
      double acc = 0.0;
      for (const auto* v : present) acc += v->numeric();
      return CellValue::floating(acc / static_cast<double>(present.size()));
    }
    case AggFn::Min:
    case AggFn::Max: {
      if (present.empty()) return CellValue::null();
      const bool all_num = std::all_of(present.begin(), present.end(),
                                       [](const CellValue* v) { return v->is_numeric(); });
      const CellValue* best = present.front();
      for (const auto* v : present) {
        bool less = all_num ? v->numeric() < best->numeric() : *v < *best;
        bool greater = all_num ? v->numeric() > best->numeric() : *best < *v;
        if ((fn == AggFn::Min && less) || (fn == AggFn::Max && greater)) best = v;
      }
      return *best;
    }
  }
  return CellValue::null();
}

}  // namespace

// ---------------------------------------------------------------------------

Table op_join(const Table& left, const Table& right, const JoinParams& params) {
  if (params.on.empty()) {
    throw OpError(ErrorKind::MissingColumn, "join requires at least one key pair");
  }
  std::vector<std::size_t> lkeys, rkeys;
  for (const auto& [l, r] : params.on) {
    lkeys.push_back(require_column(left, l));
    rkeys.push_back(require_column(right, r));
  }
  std::vector<ColumnSpec> cols = left.schema().columns();
  std::set<std::string> taken;
  for (const auto& c : cols) taken.insert(trim(c.name));
  std::vector<std::size_t> rcarry;
  for (std::size_t c = 0; c < right.column_count(); ++c) {
    if (std::find(rkeys.begin(), rkeys.end(), c) != rkeys.end()) continue;
    std::string name = trim(right.schema()[c].name);
    while (taken.contains(name)) name += "_r";
    taken.insert(name);
    cols.push_back({name, right.schema()[c].dtype});
    rcarry.push_back(c);
  }

  std::map<std::vector<CellValue>, std::vector<std::size_t>> index;
  for (std::size_t r = 0; r < right.row_count(); ++r) {
    index[key_of(right.rows()[r], rkeys)].push_back(r);
  }

  std::vector<Row> rows;
  for (const auto& lrow : left.rows()) {
    auto it = index.find(key_of(lrow, lkeys));
    if (it != index.end()) {
      for (auto r : it->second) {
        Row out = lrow;
        for (auto c : rcarry) out.push_back(right.rows()[r][c]);
        rows.push_back(std::move(out));
      }
    } else if (params.how == JoinHow::Left) {
      Row out = lrow;
      out.resize(cols.size());
      rows.push_back(std::move(out));
    }
  }
  return Table(left.name(), make_schema(std::move(cols)), std::move(rows));
}

Table op_groupby(const Table& input, const GroupByParams& params) {
  auto keys = require_columns(input, params.keys);
  std::vector<std::size_t> agg_cols;
  std::vector<bool> integer_input;
  std::vector<ColumnSpec> cols;
  for (auto k : keys) cols.push_back(input.schema()[k]);
  for (const auto& a : params.aggs) {
    auto c = require_column(input, a.column);
    if (needs_numeric(a.fn, true) && !column_is_numeric(input, c)) {
      throw OpError(ErrorKind::TypeMismatch, std::string(to_string(a.fn)) + " over non-numeric column '" +
                                                 a.column + "'");
    }
    agg_cols.push_back(c);
    integer_input.push_back(column_all_integer(input, c));
    cols.push_back({a.out_name, agg_dtype(a.fn, input.schema()[c].dtype, integer_input.back())});
  }
  Schema schema = make_schema(std::move(cols));

  std::map<std::vector<CellValue>, std::size_t> group_of;
  std::vector<std::vector<CellValue>> group_keys;
  std::vector<std::vector<std::vector<CellValue>>> values;  // group -> agg -> cells
  for (const auto& row : input.rows()) {
    auto key = key_of(row, keys);
    auto [it, inserted] = group_of.try_emplace(key, group_keys.size());
    if (inserted) {
      group_keys.push_back(std::move(key));
      values.emplace_back(params.aggs.size());
    }
    for (std::size_t a = 0; a < agg_cols.size(); ++a) {
      values[it->second][a].push_back(row[agg_cols[a]]);
    }
  }

  std::vector<Row> rows;
  rows.reserve(group_keys.size());
  for (std::size_t g = 0; g < group_keys.size(); ++g) {
    Row out = group_keys[g];
    for (std::size_t a = 0; a < params.aggs.size(); ++a) {
      out.push_back(aggregate(params.aggs[a].fn, values[g][a], integer_input[a]));
    }
    rows.push_back(std::move(out));
  }
  return Table(input.name(), std::move(schema), std::move(rows));
}

Table op_pivot(const Table& input, const PivotParams& params, std::size_t max_pivot_values) {
  auto index = require_columns(input, params.index);
  auto pcol = require_column(input, params.pivot_col);
  auto vcol = require_column(input, params.value_col);
  if (needs_numeric(params.agg, false) && !column_is_numeric(input, vcol)) {
    throw OpError(ErrorKind::TypeMismatch, std::string(to_string(params.agg)) +
                                               " over non-numeric column '" + params.value_col + "'");
  }

  std::vector<ColumnSpec> cols;
  for (auto i : index) cols.push_back(input.schema()[i]);
  if (input.row_count() == 0) return Table(input.name(), make_schema(std::move(cols)), {});

  std::set<std::string> labels;
  for (const auto& row : input.rows()) {
    if (!row[pcol].is_null()) labels.insert(row[pcol].render());
  }
  if (labels.empty()) {
    throw OpError(ErrorKind::EmptyPivot, "pivot column '" + params.pivot_col + "' has no values");
  }
  if (labels.size() > max_pivot_values) {
    throw OpError(ErrorKind::EmptyPivot, "pivot column '" + params.pivot_col + "' has " +
                                             std::to_string(labels.size()) +
                                             " distinct values, limit is " +
                                             std::to_string(max_pivot_values));
  }
  const bool integer_input = column_all_integer(input, vcol);
  std::map<std::string, std::size_t> label_pos;
  for (const auto& l : labels) {
    label_pos.emplace(l, label_pos.size());
    cols.push_back({l, agg_dtype(params.agg, input.schema()[vcol].dtype, integer_input)});
  }
  Schema schema = make_schema(std::move(cols));

  std::map<std::vector<CellValue>, std::size_t> row_of;
  std::vector<std::vector<CellValue>> row_keys;
  std::vector<std::vector<std::vector<CellValue>>> cells;
  for (const auto& row : input.rows()) {
    auto key = key_of(row, index);
    auto [it, inserted] = row_of.try_emplace(key, row_keys.size());
    if (inserted) {
      row_keys.push_back(std::move(key));
      cells.emplace_back(labels.size());
    }
    if (row[pcol].is_null()) continue;
    cells[it->second][label_pos.at(row[pcol].render())].push_back(row[vcol]);
  }

  std::vector<Row> rows;
  for (std::size_t r = 0; r < row_keys.size(); ++r) {
    Row out = row_keys[r];
    for (const auto& hits : cells[r]) {
      out.push_back(hits.empty() ? CellValue::null() : aggregate(params.agg, hits, integer_input));
    }
    rows.push_back(std::move(out));
  }
  return Table(input.name(), std::move(schema), std::move(rows));
}

Table op_unpivot(const Table& input, const UnpivotParams& params) {
  auto ids = require_columns(input, params.id_cols);
  std::vector<std::size_t> melt;
  for (std::size_t c = 0; c < input.column_count(); ++c) {
    if (std::find(ids.begin(), ids.end(), c) == ids.end()) melt.push_back(c);
  }
  if (melt.empty()) throw OpError(ErrorKind::MissingColumn, "no columns left to unpivot");

  std::set<DType> dtypes;
  for (auto c : melt) dtypes.insert(input.schema()[c].dtype);
  DType value_dtype = DType::Any;
  bool widen_ints = false;
  if (dtypes.size() == 1) {
    value_dtype = *dtypes.begin();
  } else if (std::all_of(dtypes.begin(), dtypes.end(), [](DType d) { return is_numeric(d); })) {
    value_dtype = DType::Float;
    widen_ints = true;
  }

  std::vector<ColumnSpec> cols;
  for (auto i : ids) cols.push_back(input.schema()[i]);
  cols.push_back({params.var_name, DType::Text});
  cols.push_back({params.value_name, value_dtype});
  Schema schema = make_schema(std::move(cols));

  std::vector<Row> rows;
  rows.reserve(input.row_count() * melt.size());
  for (const auto& row : input.rows()) {
    for (auto c : melt) {
      Row out = key_of(row, ids);
      out.push_back(CellValue::text(trim(input.schema()[c].name)));
      const CellValue& v = row[c];
      out.push_back(widen_ints && v.kind() == CellKind::Integer
                        ? CellValue::floating(static_cast<double>(v.as_int()))
                        : v);
      rows.push_back(std::move(out));
    }
  }
  return Table(input.name(), std::move(schema), std::move(rows));
}

Table op_union(std::span<const Table> tables) {
  if (tables.size() < 2) throw OpError(ErrorKind::TypeMismatch, "union needs at least two tables");
  const Table& first = tables.front();
  const auto names = schema_names(first);
  std::vector<std::vector<std::size_t>> order;  // per table: position of each first-table column
  for (const auto& t : tables) {
    if (schema_names(t) != names) {
      throw OpError(ErrorKind::TypeMismatch, "union of tables '" + first.name() + "' and '" +
                                                 t.name() + "' with different column names");
    }
    std::vector<std::size_t> pos;
    for (const auto& n : first.schema().names()) pos.push_back(*t.schema().index_of(n));
    order.push_back(std::move(pos));
  }

  std::vector<ColumnSpec> cols;
  std::vector<bool> widen(first.column_count(), false);
  for (std::size_t c = 0; c < first.column_count(); ++c) {
    std::set<DType> ds;
    for (std::size_t t = 0; t < tables.size(); ++t) {
      DType d = tables[t].schema()[order[t][c]].dtype;
      // All-Null untyped columns do not constrain the result.
      bool all_null = d == DType::Any &&
                      std::all_of(tables[t].rows().begin(), tables[t].rows().end(),
                                  [&](const Row& r) { return r[order[t][c]].is_null(); });
      if (!all_null) ds.insert(d);
    }
    DType d = DType::Any;
    if (ds.size() == 1) {
      d = *ds.begin();
    } else if (ds.size() == 2 && ds.contains(DType::Integer) && ds.contains(DType::Float)) {
      d = DType::Float;
      widen[c] = true;
    }
    cols.push_back({first.schema()[c].name, d});
  }

  std::vector<Row> rows;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    for (const auto& row : tables[t].rows()) {
      Row out;
      out.reserve(cols.size());
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const CellValue& v = row[order[t][c]];
        out.push_back(widen[c] && v.kind() == CellKind::Integer
                          ? CellValue::floating(static_cast<double>(v.as_int()))
                          : v);
      }
      rows.push_back(std::move(out));
    }
  }
  return Table(first.name(), Schema(std::move(cols)), std::move(rows));
}

Table op_add_column(const Table& input, const AddColumnParams& params) {
  if (trim(params.name).empty()) throw OpError(ErrorKind::DuplicateColumn, "empty column name");
  if (input.schema().contains(params.name)) {
    throw OpError(ErrorKind::DuplicateColumn, "column '" + params.name + "' already exists");
  }
  auto cols = input.schema().columns();
  cols.push_back({params.name, dtype_of_kind(params.constant.kind())});
  std::vector<Row> rows = input.rows();
  for (auto& r : rows) r.push_back(params.constant);
  return Table(input.name(), Schema(std::move(cols)), std::move(rows));
}

Table op_drop_columns(const Table& input, const DropColumnsParams& params) {
  std::set<std::size_t> drop;
  for (const auto& n : params.names) drop.insert(require_column(input, n));
  std::vector<ColumnSpec> cols;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < input.column_count(); ++c) {
    if (!drop.contains(c)) {
      keep.push_back(c);
      cols.push_back(input.schema()[c]);
    }
  }
  std::vector<Row> rows;
  rows.reserve(input.row_count());
  for (const auto& r : input.rows()) rows.push_back(key_of(r, keep));
  return Table(input.name(), Schema(std::move(cols)), std::move(rows));
}

Table op_rename(const Table& input, const RenameParams& params) {
  auto cols = input.schema().columns();
  std::set<std::size_t> touched;
  for (const auto& [from, to] : params.mapping) {
    auto c = require_column(input, from);
    if (!touched.insert(c).second) {
      throw OpError(ErrorKind::DuplicateColumn, "column '" + from + "' renamed twice");
    }
    cols[c].name = trim(to);
  }
  return Table(input.name(), make_schema(std::move(cols)), input.rows());
}

namespace {

struct ArithmeticPlan {
  bool integer_mode = true;
  std::map<std::string, std::size_t> columns;
};

void check_expression(const Expression& e, const Table& t, ArithmeticPlan& plan) {
  switch (e.kind()) {
    case Expression::Kind::Column: {
      auto c = require_column(t, e.column_name());
      if (!column_is_numeric(t, c)) {
        throw OpError(ErrorKind::TypeMismatch, "column '" + e.column_name() + "' is not numeric");
      }
      if (!column_all_integer(t, c)) plan.integer_mode = false;
      plan.columns.emplace(e.column_name(), c);
      break;
    }
    case Expression::Kind::Literal:
      if (!e.literal_value().is_numeric()) {
        throw OpError(ErrorKind::ExpressionError, "non-numeric literal in expression");
      }
      if (e.literal_value().kind() == CellKind::Float) plan.integer_mode = false;
      break;
    case Expression::Kind::Negate: check_expression(e.operand(), t, plan); break;
    case Expression::Kind::Binary:
      if (std::string_view("+-*/").find(e.op()) == std::string_view::npos) {
        throw OpError(ErrorKind::ExpressionError, std::string("unknown operator '") + e.op() + "'");
      }
      if (e.op() == '/') plan.integer_mode = false;
      check_expression(e.lhs(), t, plan);
      check_expression(e.rhs(), t, plan);
      break;
  }
}

std::optional<std::int64_t> eval_int(const Expression& e, const Row& row, const ArithmeticPlan& p) {
  switch (e.kind()) {
    case Expression::Kind::Column: {
      const auto& v = row[p.columns.at(e.column_name())];
      if (v.is_null()) return std::nullopt;
      return v.as_int();
    }
    case Expression::Kind::Literal: return e.literal_value().as_int();
    case Expression::Kind::Negate: {
      auto v = eval_int(e.operand(), row, p);
      if (!v || *v == std::numeric_limits<std::int64_t>::min()) return std::nullopt;
      return -*v;
    }
    case Expression::Kind::Binary: {
      auto a = eval_int(e.lhs(), row, p);
      auto b = eval_int(e.rhs(), row, p);
      if (!a || !b) return std::nullopt;
      std::int64_t out = 0;
      bool overflow = false;
      switch (e.op()) {
        case '+': overflow = __builtin_add_overflow(*a, *b, &out); break;
        case '-': overflow = __builtin_sub_overflow(*a, *b, &out); break;
        case '*': overflow = __builtin_mul_overflow(*a, *b, &out); break;
        default: return std::nullopt;
      }
      if (overflow) return std::nullopt;
      return out;
    }
  }
  return std::nullopt;
}

std::optional<double> eval_float(const Expression& e, const Row& row, const ArithmeticPlan& p) {
  switch (e.kind()) {
    case Expression::Kind::Column: {
      const auto& v = row[p.columns.at(e.column_name())];
      if (v.is_null()) return std::nullopt;
      return v.numeric();
    }
    case Expression::Kind::Literal: return e.literal_value().numeric();
    case Expression::Kind::Negate: {
      auto v = eval_float(e.operand(), row, p);
      if (!v) return std::nullopt;
      return -*v;
    }
    case Expression::Kind::Binary: {
      auto a = eval_float(e.lhs(), row, p);
      auto b = eval_float(e.rhs(), row, p);
      if (!a || !b) return std::nullopt;
      switch (e.op()) {
        case '+': return *a + *b;
        case '-': return *a - *b;
        case '*': return *a * *b;
        case '/':
          if (*b == 0.0) return std::nullopt;
          return *a / *b;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

Table op_column_arithmetic(const Table& input, const ColumnArithmeticParams& params) {
  if (trim(params.out_name).empty()) throw OpError(ErrorKind::DuplicateColumn, "empty column name");
  if (input.schema().contains(params.out_name)) {
    throw OpError(ErrorKind::DuplicateColumn, "column '" + params.out_name + "' already exists");
  }
  ArithmeticPlan plan;
  check_expression(params.expression, input, plan);

  auto cols = input.schema().columns();
  cols.push_back({params.out_name, plan.integer_mode ? DType::Integer : DType::Float});
  std::vector<Row> rows = input.rows();
  for (auto& r : rows) {
    if (plan.integer_mode) {
      auto v = eval_int(params.expression, r, plan);
      r.push_back(v ? CellValue::integer(*v) : CellValue::null());
    } else {
      auto v = eval_float(params.expression, r, plan);
      r.push_back(v ? CellValue::floating(*v) : CellValue::null());
    }
  }
  return Table(input.name(), Schema(std::move(cols)), std::move(rows));
}

// ---------------------------------------------------------------------------
// Dates

const std::vector<std::string>& auto_date_formats() {
  static const std::vector<std::string> formats = {"yyyy.mm.dd", "yyyy/mm/dd", "yyyy-mm-dd",
                                                   "dd/mm/yyyy", "mm-dd-yyyy"};
  return formats;
}

namespace {

enum class DateToken { Year, Month, Day };

struct PatternItem {
  std::optional<DateToken> token;
  char literal = 0;
};

std::optional<std::vector<PatternItem>> compile_pattern(std::string_view format) {
  std::vector<PatternItem> items;
  for (std::size_t i = 0; i < format.size();) {
    if (format.substr(i, 4) == "yyyy") {
      items.push_back({DateToken::Year, 0});
      i += 4;
    } else if (format.substr(i, 2) == "mm") {
      items.push_back({DateToken::Month, 0});
      i += 2;
    } else if (format.substr(i, 2) == "dd") {
      items.push_back({DateToken::Day, 0});
      i += 2;
    } else if (std::isalnum(static_cast<unsigned char>(format[i]))) {
      return std::nullopt;
    } else {
      items.push_back({std::nullopt, format[i]});
      ++i;
    }
  }
  if (items.empty()) return std::nullopt;
  return items;
}

bool has_all_tokens(const std::vector<PatternItem>& items) {
  bool y = false, m = false, d = false;
  for (const auto& it : items) {
    if (!it.token) continue;
    y |= *it.token == DateToken::Year;
    m |= *it.token == DateToken::Month;
    d |= *it.token == DateToken::Day;
  }
  return y && m && d;
}

}  // namespace

std::optional<Date> parse_date_with_format(std::string_view text, std::string_view format) {
  auto items = compile_pattern(format);
  if (!items || !has_all_tokens(*items)) return std::nullopt;
  int year = -1, month = -1, day = -1;
  std::size_t pos = 0;
  for (const auto& it : *items) {
    if (!it.token) {
      if (pos >= text.size() || text[pos] != it.literal) return std::nullopt;
      ++pos;
      continue;
    }
    const std::size_t min_digits = *it.token == DateToken::Year ? 4 : 1;
    const std::size_t max_digits = *it.token == DateToken::Year ? 4 : 2;
    std::size_t n = 0;
    int v = 0;
    while (n < max_digits && pos + n < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos + n]))) {
      v = v * 10 + (text[pos + n] - '0');
      ++n;
    }
    if (n < min_digits) return std::nullopt;
    pos += n;
    int& slot = *it.token == DateToken::Year ? year : *it.token == DateToken::Month ? month : day;
    if (slot != -1) return std::nullopt;
    slot = v;
  }
  if (pos != text.size() || !is_valid_date(year, month, day)) return std::nullopt;
  return Date{year, month, day};
}

std::string format_date_with_format(const Date& date, std::string_view format) {
  auto items = compile_pattern(format);
  if (!items) return {};
  std::string out;
  char buf[8];
  for (const auto& it : *items) {
    if (!it.token) {
      out.push_back(it.literal);
    } else if (*it.token == DateToken::Year) {
      std::snprintf(buf, sizeof buf, "%04d", date.year);
      out += buf;
    } else {
      std::snprintf(buf, sizeof buf, "%02d", *it.token == DateToken::Month ? date.month : date.day);
      out += buf;
    }
  }
  return out;
}

std::optional<std::string> detect_date_format(std::string_view text) {
  for (const auto& f : auto_date_formats()) {
    if (parse_date_with_format(text, f)) return f;
  }
  return std::nullopt;
}

Table op_date_format(const Table& input, const DateFormattingParams& params) {
  auto col = require_column(input, params.column);
  const bool auto_in = params.in_format == "auto";
  if (!auto_in) {
    auto items = compile_pattern(params.in_format);
    if (!items || !has_all_tokens(*items)) {
      throw OpError(ErrorKind::BadDateFormat, "invalid input date pattern '" + params.in_format + "'");
    }
  }
  if (!compile_pattern(params.out_format)) {
    throw OpError(ErrorKind::BadDateFormat, "invalid output date pattern '" + params.out_format + "'");
  }
  const bool as_date = params.out_format == "yyyy-mm-dd";

  auto cols = input.schema().columns();
  cols[col].dtype = as_date ? DType::Date : DType::Text;
  std::vector<Row> rows = input.rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CellValue& cell = rows[r][col];
    if (cell.is_null()) continue;
    std::optional<Date> date;
    if (cell.kind() == CellKind::Date) {
      date = cell.as_date();
    } else {
      const std::string text = cell.render();
      if (auto_in) {
        if (auto f = detect_date_format(text)) date = parse_date_with_format(text, *f);
      } else {
        date = parse_date_with_format(text, params.in_format);
      }
      if (!date) {
        throw OpError(ErrorKind::BadDateFormat, "row " + std::to_string(r + 1) + ": '" + text +
                                                    "' does not match date format '" +
                                                    params.in_format + "'");
      }
    }
    cell = as_date ? CellValue::date(*date)
                   : CellValue::text(format_date_with_format(*date, params.out_format));
  }
  return Table(input.name(), Schema(std::move(cols)), std::move(rows));
}

}  // namespace monteprep
