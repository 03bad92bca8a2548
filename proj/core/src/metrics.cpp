#include "monteprep/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace monteprep {

namespace {

// Floats holding an exact integer become Integer cells so that 3 and 3.0
// sort and compare alike.
CellValue canonical(const CellValue& v) {
  if (v.kind() != CellKind::Float) return v;
  const double d = v.as_float();
  if (std::isfinite(d) && std::trunc(d) == d && std::fabs(d) < 9.0e15) {
    return CellValue::integer(static_cast<std::int64_t>(d));
  }
  return v;
}

bool cells_match(const CellValue& a, const CellValue& b, double tol) {
  if (a.is_numeric() && b.is_numeric()) {
    if (a.kind() == CellKind::Integer && b.kind() == CellKind::Integer) return a.as_int() == b.as_int();
    const double x = a.numeric();
    const double y = b.numeric();
    if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
    return tol > 0 ? std::fabs(x - y) <= tol : x == y;
  }
  return a == b;
}

}  // namespace

double metric_cs(const std::vector<std::string>& names, const TargetSchema& target) {
  if (target.size() == 0) return 0.0;
  std::set<std::string> have;
  for (const auto& n : names) have.insert(trim(n));
  std::size_t hit = 0;
  for (const auto& t : target.names()) hit += have.count(t);
  return static_cast<double>(hit) / static_cast<double>(target.size());
}

double metric_cs(const Table& output, const TargetSchema& target) {
  return metric_cs(output.schema().names(), target);
}

int metric_ex(const Table& output, const Table& reference, double float_tolerance) {
  if (schema_names(output) != schema_names(reference)) return 0;
  if (output.row_count() != reference.row_count()) return 0;
  const auto ref_names = reference.schema().names();
  std::vector<std::size_t> order;
  for (const auto& n : ref_names) order.push_back(output.column_index(n));

  auto normalise = [](std::vector<Row> rows) {
    for (auto& r : rows) {
      for (auto& c : r) c = canonical(c);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  std::vector<Row> aligned;
  aligned.reserve(output.row_count());
  for (const auto& row : output.rows()) {
    Row r;
    r.reserve(order.size());
    for (auto i : order) r.push_back(row[i]);
    aligned.push_back(std::move(r));
  }
  const auto a = normalise(std::move(aligned));
  const auto b = normalise(reference.rows());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t c = 0; c < a[i].size(); ++c) {
      if (!cells_match(a[i][c], b[i][c], float_tolerance)) return 0;
    }
  }
  return 1;
}

}  // namespace monteprep
