#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "monteprep/table.h"

namespace monteprep {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
  bool infer_types = true;
};

/// Parses RFC-4180 CSV text. Unquoted empty fields become Null; a quoted
/// empty field is an empty Text value. With `infer_types` off every column
/// is Text. Throws CsvError on ragged rows, duplicate header names, bad
/// quoting or invalid UTF-8.
Table parse_csv(std::string_view text, std::string table_name, const CsvOptions& options = {});

/// Reads a CSV file; the table is named after the file stem unless a name is given.
Table read_csv(const std::filesystem::path& path, const CsvOptions& options = {},
               std::string table_name = {});

std::string to_csv(const Table& table, char delimiter = ',');
void write_csv(const Table& table, const std::filesystem::path& path, char delimiter = ',');

/// Converts one raw field under the inference rules. Exposed for tests and
/// for typing constants in pipeline plans.
CellValue parse_cell(std::string_view raw, DType dtype);

}  // namespace monteprep
