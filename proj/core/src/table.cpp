#include "monteprep/table.h"

#include <algorithm>

namespace monteprep {

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(trim(c.name)).second) {
      throw TableError("duplicate column name '" + trim(c.name) + "'");
    }
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  const std::string key = trim(name);
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (trim(columns_[i].name) == key) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Schema::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(trim(c.name));
  return out;
}

Table::Table(std::string name, Schema schema, std::vector<Row> rows)
    : name_(std::move(name)), schema_(std::move(schema)), rows_(std::move(rows)) {
  const std::size_t width = schema_.size();
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != width) {
      throw TableError("row " + std::to_string(r) + " has width " +
                       std::to_string(rows_[r].size()) + ", expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (!dtype_admits(schema_[c].dtype, rows_[r][c].kind())) {
        throw TableError("cell (" + std::to_string(r) + ", " + schema_[c].name + ") of kind " +
                         std::string(to_string(rows_[r][c].kind())) + " violates dtype " +
                         std::string(to_string(schema_[c].dtype)));
      }
    }
  }
}

std::size_t Table::column_index(std::string_view name) const {
  auto idx = schema_.index_of(name);
  if (!idx) throw TableError("no column '" + std::string(name) + "' in table '" + name_ + "'");
  return *idx;
}

Table Table::renamed(std::string name) const {
  Table t = *this;
  t.name_ = std::move(name);
  return t;
}

std::set<std::string> schema_names(const Table& table) {
  auto names = table.schema().names();
  return {names.begin(), names.end()};
}

TableSample sample_rows(const Table& table, std::size_t max_rows) {
  if (max_rows == 0) throw TableError("sample size must be positive");
  const std::size_t n = std::min(max_rows, table.row_count());
  std::vector<Row> rows(table.rows().begin(), table.rows().begin() + static_cast<std::ptrdiff_t>(n));
  return {Table(table.name(), table.schema(), std::move(rows)), max_rows};
}

DType infer_dtype(std::span<const CellValue> cells) {
  std::optional<CellKind> seen;
  for (const auto& c : cells) {
    if (c.is_null()) continue;
    if (seen && *seen != c.kind()) return DType::Any;
    seen = c.kind();
  }
  if (!seen) return DType::Any;
  switch (*seen) {
    case CellKind::Boolean: return DType::Boolean;
    case CellKind::Integer: return DType::Integer;
    case CellKind::Float: return DType::Float;
    case CellKind::Date: return DType::Date;
    case CellKind::Text: return DType::Text;
    case CellKind::Null: break;
  }
  return DType::Any;
}

}  // namespace monteprep
