#include "monteprep/value.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace monteprep {

bool is_valid_date(int year, int month, int day) {
  if (year < 1 || year > 9999 || month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = kDays[month - 1];
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) limit = 29;
  return day <= limit;
}

namespace {

std::optional<int> parse_fixed_digits(std::string_view s) {
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto y = parse_fixed_digits(text.substr(0, 4));
  auto m = parse_fixed_digits(text.substr(5, 2));
  auto d = parse_fixed_digits(text.substr(8, 2));
  if (!y || !m || !d || !is_valid_date(*y, *m, *d)) return std::nullopt;
  return Date{*y, *m, *d};
}

std::string format_iso_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", date.year, date.month, date.day);
  return buf;
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Null: return "Null";
    case CellKind::Boolean: return "Boolean";
    case CellKind::Integer: return "Integer";
    case CellKind::Float: return "Float";
    case CellKind::Text: return "Text";
    case CellKind::Date: return "Date";
  }
  return "?";
}

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::Any: return "Any";
    case DType::Boolean: return "Boolean";
    case DType::Integer: return "Integer";
    case DType::Float: return "Float";
    case DType::Date: return "Date";
    case DType::Text: return "Text";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
  for (DType d : {DType::Any, DType::Boolean, DType::Integer, DType::Float, DType::Date,
                  DType::Text}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

bool is_numeric(DType dtype) { return dtype == DType::Integer || dtype == DType::Float; }

bool dtype_admits(DType dtype, CellKind kind) {
  if (kind == CellKind::Null || dtype == DType::Any) return true;
  switch (dtype) {
    case DType::Boolean: return kind == CellKind::Boolean;
    case DType::Integer: return kind == CellKind::Integer;
    case DType::Float: return kind == CellKind::Float;
    case DType::Date: return kind == CellKind::Date;
    case DType::Text: return kind == CellKind::Text;
    case DType::Any: return true;
  }
  return false;
}

double CellValue::numeric() const {
  return kind() == CellKind::Integer ? static_cast<double>(as_int()) : as_float();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string CellValue::render() const {
  switch (kind()) {
    case CellKind::Null: return {};
    case CellKind::Boolean: return as_bool() ? "true" : "false";
    case CellKind::Integer: return std::to_string(as_int());
    case CellKind::Float: return format_double(as_float());
    case CellKind::Text: return as_text();
    case CellKind::Date: return format_iso_date(as_date());
  }
  return {};
}

bool operator==(const CellValue& a, const CellValue& b) {
  if (a.value_.index() != b.value_.index()) return false;
  if (a.kind() == CellKind::Float) {
    double x = a.as_float(), y = b.as_float();
    if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  }
  return a.value_ == b.value_;
}

std::strong_ordering operator<=>(const CellValue& a, const CellValue& b) {
  if (auto c = a.value_.index() <=> b.value_.index(); c != 0) return c;
  switch (a.kind()) {
    case CellKind::Null: return std::strong_ordering::equal;
    case CellKind::Boolean: return a.as_bool() <=> b.as_bool();
    case CellKind::Integer: return a.as_int() <=> b.as_int();
    case CellKind::Float: {
      double x = a.as_float(), y = b.as_float();
      bool xn = std::isnan(x), yn = std::isnan(y);
      if (xn || yn) return xn <=> yn;
      if (x < y) return std::strong_ordering::less;
      if (y < x) return std::strong_ordering::greater;
      // -0.0 and 0.0 differ under bit equality; keep the order consistent.
      return std::bit_cast<std::int64_t>(x) <=> std::bit_cast<std::int64_t>(y);
    }
    case CellKind::Text: return a.as_text().compare(b.as_text()) <=> 0;
    case CellKind::Date: return a.as_date() <=> b.as_date();
  }
  return std::strong_ordering::equal;
}

}  // namespace monteprep
