#include "monteprep/csv.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace monteprep {
namespace {

struct RawField {
  std::string text;
  bool quoted = false;
};

using RawRow = std::vector<RawField>;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    if (c < 0x80) len = 1;
    else if ((c >> 5) == 0x6) len = 2;
    else if ((c >> 4) == 0xE) len = 3;
    else if ((c >> 3) == 0x1E) len = 4;
    else return false;
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

std::vector<RawRow> tokenize(std::string_view text, char delim) {
  std::vector<RawRow> rows;
  RawRow row;
  RawField field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field = {};
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row = {};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.text.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (field_started && !field.quoted) {
        throw CsvError("line " + std::to_string(line) + ": stray quote inside unquoted field");
      }
      if (field.quoted) {
        throw CsvError("line " + std::to_string(line) + ": text after closing quote");
      }
      field.quoted = true;
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
      ++line;
    } else {
      if (field.quoted) {
        throw CsvError("line " + std::to_string(line) + ": text after closing quote");
      }
      field.text.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw CsvError("unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

bool is_bool_token(std::string_view s, bool* value) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "true") {
    if (value) *value = true;
    return true;
  }
  if (lower == "false") {
    if (value) *value = false;
    return true;
  }
  return false;
}

bool parse_int_token(std::string_view s, std::int64_t* value) {
  if (s.empty()) return false;
  std::string_view body = s;
  if (body.front() == '+') body.remove_prefix(1);
  if (body.empty()) return false;
  std::size_t start = body.front() == '-' ? 1 : 0;
  if (start == body.size()) return false;
  for (std::size_t i = start; i < body.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(body[i]))) return false;
  }
  std::int64_t v = 0;
  auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc() || res.ptr != body.data() + body.size()) return false;
  if (value) *value = v;
  return true;
}

// Decimal syntax only: [+-]digits[.digits][e[+-]digits], with at least one
// digit in the mantissa. Words like "nan" or "inf" stay Text.
bool parse_float_token(std::string_view s, double* value) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  if (i != s.size()) return false;
  std::string_view body = s.front() == '+' ? s.substr(1) : s;
  double v = 0;
  auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc() || res.ptr != body.data() + body.size()) return false;
  if (value) *value = v;
  return true;
}

// Bit set of the kinds a raw field can be read as.
enum : unsigned { kBool = 1, kInt = 2, kFloat = 4, kDate = 8, kText = 16 };

unsigned admitted_kinds(const RawField& f) {
  if (f.quoted && f.text.empty()) return kText;
  unsigned m = kText;
  if (is_bool_token(f.text, nullptr)) m |= kBool;
  if (parse_int_token(f.text, nullptr)) m |= kInt;
  if (parse_float_token(f.text, nullptr)) m |= kFloat;
  if (parse_iso_date(f.text)) m |= kDate;
  return m;
}

DType narrowest(unsigned mask) {
  if (mask & kBool) return DType::Boolean;
  if (mask & kInt) return DType::Integer;
  if (mask & kFloat) return DType::Float;
  if (mask & kDate) return DType::Date;
  return DType::Text;
}

bool needs_quotes(std::string_view s, char delim) {
  return s.empty() || s.find_first_of(std::string{delim, '"', '\r', '\n'}) != std::string_view::npos;
}

}  // namespace

CellValue parse_cell(std::string_view raw, DType dtype) {
  switch (dtype) {
    case DType::Boolean: {
      bool b = false;
      if (is_bool_token(raw, &b)) return CellValue::boolean(b);
      break;
    }
    case DType::Integer: {
      std::int64_t v = 0;
      if (parse_int_token(raw, &v)) return CellValue::integer(v);
      break;
    }
    case DType::Float: {
      double v = 0;
      if (parse_float_token(raw, &v)) return CellValue::floating(v);
      break;
    }
    case DType::Date:
      if (auto d = parse_iso_date(raw)) return CellValue::date(*d);
      break;
    case DType::Text:
      return CellValue::text(std::string(raw));
    case DType::Any: {
      RawField f{std::string(raw), false};
      return parse_cell(raw, narrowest(admitted_kinds(f)));
    }
  }
  throw CsvError("value '" + std::string(raw) + "' is not a valid " +
                 std::string(to_string(dtype)));
}

Table parse_csv(std::string_view text, std::string table_name, const CsvOptions& options) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  if (!valid_utf8(text)) throw CsvError("input is not valid UTF-8");
  auto raw = tokenize(text, options.delimiter);
  auto is_blank = [](const RawRow& r) {
    return r.size() == 1 && r[0].text.empty() && !r[0].quoted;
  };
  // Blank lines are skipped unless the table has a single column, where
  // they encode a Null row.
  const bool single_column = !raw.empty() && raw[0].size() == 1;
  if (!single_column) std::erase_if(raw, is_blank);

  std::vector<std::string> names;
  std::size_t first = 0;
  if (options.header) {
    if (raw.empty()) throw CsvError("missing header row");
    for (const auto& f : raw[0]) names.push_back(trim(f.text));
    first = 1;
  } else if (!raw.empty()) {
    for (std::size_t i = 0; i < raw[0].size(); ++i) names.push_back("col" + std::to_string(i + 1));
  }
  {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second) throw CsvError("duplicate header name '" + n + "'");
    }
  }

  const std::size_t width = names.size();
  for (std::size_t r = first; r < raw.size(); ++r) {
    if (raw[r].size() != width) {
      throw CsvError("ragged row " + std::to_string(r + 1) + ": " + std::to_string(raw[r].size()) +
                     " fields, header has " + std::to_string(width));
    }
  }

  std::vector<ColumnSpec> columns;
  for (std::size_t c = 0; c < width; ++c) {
    DType dtype = DType::Text;
    if (options.infer_types) {
      unsigned mask = kBool | kInt | kFloat | kDate | kText;
      bool any = false;
      for (std::size_t r = first; r < raw.size(); ++r) {
        const auto& f = raw[r][c];
        if (f.text.empty() && !f.quoted) continue;
        any = true;
        mask &= admitted_kinds(f);
      }
      dtype = any ? narrowest(mask) : DType::Any;
    }
    columns.push_back({names[c], dtype});
  }

  std::vector<Row> rows;
  rows.reserve(raw.size() - first);
  for (std::size_t r = first; r < raw.size(); ++r) {
    Row row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto& f = raw[r][c];
      if (f.text.empty() && !f.quoted) {
        row.push_back(CellValue::null());
      } else if (columns[c].dtype == DType::Any) {
        row.push_back(CellValue::text(f.text));
      } else {
        row.push_back(parse_cell(f.text, columns[c].dtype));
      }
    }
    rows.push_back(std::move(row));
  }
  return Table(std::move(table_name), Schema(std::move(columns)), std::move(rows));
}

Table read_csv(const std::filesystem::path& path, const CsvOptions& options,
               std::string table_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw CsvError("read failure on '" + path.string() + "'");
  if (table_name.empty()) table_name = path.stem().string();
  return parse_csv(buf.str(), std::move(table_name), options);
}

std::string to_csv(const Table& table, char delimiter) {
  std::string out;
  auto put = [&](std::string_view s, bool null) {
    if (!null && needs_quotes(s, delimiter)) {
      out.push_back('"');
      for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out.append(s);
    }
  };
  const auto& cols = table.schema().columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(delimiter);
    put(cols[c].name, false);
  }
  out.push_back('\n');
  for (const auto& row : table.rows()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(delimiter);
      put(row[c].render(), row[c].is_null());
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Table& table, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError("cannot open '" + path.string() + "' for writing");
  out << to_csv(table, delimiter);
  if (!out) throw CsvError("write failure on '" + path.string() + "'");
}

}  // namespace monteprep
