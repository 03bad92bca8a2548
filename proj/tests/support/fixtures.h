#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "monteprep/table.h"

namespace fixtures {

using monteprep::CellValue;
using monteprep::ColumnSpec;
using monteprep::DType;
using monteprep::Row;
using monteprep::Schema;
using monteprep::Table;

inline CellValue I(std::int64_t v) { return CellValue::integer(v); }
inline CellValue F(double v) { return CellValue::floating(v); }
inline CellValue T(std::string v) { return CellValue::text(std::move(v)); }
inline CellValue N() { return CellValue::null(); }
inline CellValue D(int y, int m, int d) { return CellValue::date({y, m, d}); }

inline Table table(std::string name, std::vector<ColumnSpec> cols, std::vector<Row> rows) {
  return Table(std::move(name), Schema(std::move(cols)), std::move(rows));
}

inline std::filesystem::path data_dir() { return MONTEPREP_TEST_DATA_DIR; }
inline std::filesystem::path microsuite_dir() { return data_dir() / "microsuite"; }

// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("monteprep-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
