#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace monteprep {

/// Calendar date with day precision.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

bool is_valid_date(int year, int month, int day);

/// Parses the canonical `yyyy-mm-dd` form only.
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& date);

enum class CellKind { Null, Boolean, Integer, Float, Text, Date };

/// Column type. `Any` admits every cell kind.
enum class DType { Any, Boolean, Integer, Float, Date, Text };

std::string_view to_string(CellKind kind);
std::string_view to_string(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);

bool is_numeric(DType dtype);
bool dtype_admits(DType dtype, CellKind kind);

/// A single table cell.
///
/// Equality is defined for every variant. Floats compare by bit pattern,
/// except that any two NaNs are equal. Null equals only Null.
class CellValue {
 public:
  CellValue() = default;

  static CellValue null() { return {}; }
  static CellValue boolean(bool v) { return CellValue(Storage(std::in_place_index<1>, v)); }
  static CellValue integer(std::int64_t v) { return CellValue(Storage(std::in_place_index<2>, v)); }
  static CellValue floating(double v) { return CellValue(Storage(std::in_place_index<3>, v)); }
  static CellValue text(std::string v) {
    return CellValue(Storage(std::in_place_index<4>, std::move(v)));
  }
  static CellValue date(Date v) { return CellValue(Storage(std::in_place_index<5>, v)); }

  CellKind kind() const { return static_cast<CellKind>(value_.index()); }
  bool is_null() const { return value_.index() == 0; }
  bool is_numeric() const { return kind() == CellKind::Integer || kind() == CellKind::Float; }

  bool as_bool() const { return std::get<1>(value_); }
  std::int64_t as_int() const { return std::get<2>(value_); }
  double as_float() const { return std::get<3>(value_); }
  const std::string& as_text() const { return std::get<4>(value_); }
  const Date& as_date() const { return std::get<5>(value_); }

  /// Integer or Float widened to double. Precondition: is_numeric().
  double numeric() const;

  /// Text rendering used for CSV output and prompts. Null renders empty;
  /// floats use the shortest round-trip decimal form.
  std::string render() const;

  friend bool operator==(const CellValue& a, const CellValue& b);

  /// Total order: kind first (declaration order), then value. NaN sorts
  /// after every other float.
  friend std::strong_ordering operator<=>(const CellValue& a, const CellValue& b);

 private:
  using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string, Date>;
  explicit CellValue(Storage v) : value_(std::move(v)) {}

  Storage value_;
};

std::string format_double(double v);

}  // namespace monteprep
