#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "monteprep/value.h"

namespace monteprep {

/// Raised when a table or schema would violate its invariants.
class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s);

struct ColumnSpec {
  std::string name;
  DType dtype = DType::Any;

  bool operator==(const ColumnSpec&) const = default;
};

/// Ordered column list. Names are unique after trimming whitespace; lookups
/// are case-sensitive exact matches on the trimmed name.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  bool empty() const { return columns_.empty(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  /// Trimmed names in column order.
  std::vector<std::string> names() const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
};

using Row = std::vector<CellValue>;

/// Immutable named relation. Every row has the schema's width and every
/// cell conforms to its column dtype or is Null.
class Table {
 public:
  Table() = default;
  Table(std::string name, Schema schema, std::vector<Row> rows);

  const std::string& name() const { return name_; }
  const Schema& schema() const { return schema_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }
  std::size_t column_count() const { return schema_.size(); }

  /// Index of a column; throws TableError when absent.
  std::size_t column_index(std::string_view name) const;

  Table renamed(std::string name) const;

  bool operator==(const Table&) const = default;

 private:
  std::string name_;
  Schema schema_;
  std::vector<Row> rows_;
};

/// Trimmed column names as a set.
std::set<std::string> schema_names(const Table& table);

/// Head-of-table view shown to proposal oracles.
struct TableSample {
  Table table;
  std::size_t max_rows = 5;
};

TableSample sample_rows(const Table& table, std::size_t max_rows);

/// Named tables. Ordered so iteration (and anything rendered from it) is
/// deterministic.
using TableSet = std::map<std::string, Table, std::less<>>;

/// Dtype of in-memory cells: the common kind of the non-Null cells, or Any
/// when kinds are mixed or every cell is Null.
DType infer_dtype(std::span<const CellValue> cells);

}  // namespace monteprep
