#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "monteprep/csv.h"
#include "monteprep/table.h"
#include "support/fixtures.h"

using namespace monteprep;
using namespace fixtures;

TEST(CellValue, NullEqualsOnlyNull) {
  EXPECT_EQ(N(), N());
  EXPECT_NE(N(), I(0));
  EXPECT_NE(N(), T(""));
}

TEST(CellValue, NanEqualsNan) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(F(nan), F(-nan));
  EXPECT_NE(F(nan), F(1.0));
}

TEST(CellValue, FloatEqualityIsBitwise) {
  EXPECT_NE(F(0.0), F(-0.0));
  EXPECT_EQ(F(0.1 + 0.2), F(0.1 + 0.2));
  EXPECT_NE(F(0.1 + 0.2), F(0.3));
}

TEST(CellValue, KindsDoNotCrossCompare) {
  EXPECT_NE(I(1), F(1.0));
  EXPECT_NE(T("1"), I(1));
}

TEST(CellValue, OrderIsKindThenValue) {
  EXPECT_LT(N(), I(-5));
  EXPECT_LT(I(3), I(4));
  EXPECT_LT(I(100), F(0.0));
  EXPECT_LT(T("a"), T("b"));
}

TEST(CellValue, RenderShortestRoundTrip) {
  EXPECT_EQ(F(0.1).render(), "0.1");
  EXPECT_EQ(F(2.5).render(), "2.5");
  EXPECT_EQ(std::stod(F(1.0 / 3.0).render()), 1.0 / 3.0);
  EXPECT_EQ(D(2024, 1, 1).render(), "2024-01-01");
  EXPECT_EQ(N().render(), "");
}

TEST(Date, IsoParsingChecksCalendar) {
  EXPECT_TRUE(parse_iso_date("2024-02-29"));
  EXPECT_FALSE(parse_iso_date("2023-02-29"));
  EXPECT_FALSE(parse_iso_date("2024-13-01"));
  EXPECT_FALSE(parse_iso_date("2024.01.01"));
}

TEST(Schema, RejectsDuplicateNamesAfterTrim) {
  EXPECT_THROW(Schema({{"a", DType::Any}, {" a ", DType::Any}}), TableError);
}

TEST(Schema, LookupIsTrimmedAndCaseSensitive) {
  Schema s({{" Date ", DType::Any}, {"Shop_id", DType::Any}});
  EXPECT_EQ(s.index_of("Date"), 0u);
  EXPECT_FALSE(s.index_of("date"));
}

TEST(Table, RejectsRaggedRows) {
  EXPECT_THROW(table("t", {{"a", DType::Any}, {"b", DType::Any}}, {{I(1)}}), TableError);
}

TEST(Table, RejectsNonConformingCells) {
  EXPECT_THROW(table("t", {{"a", DType::Integer}}, {{T("x")}}), TableError);
  EXPECT_NO_THROW(table("t", {{"a", DType::Integer}}, {{N()}}));
}

TEST(SchemaNames, Examples) {
  EXPECT_EQ(schema_names(table("t", {{"Date", DType::Any}, {"Shop_id", DType::Any}}, {})),
            (std::set<std::string>{"Date", "Shop_id"}));
  EXPECT_EQ(schema_names(table("t", {{" a ", DType::Any}, {"b", DType::Any}}, {})),
            (std::set<std::string>{"a", "b"}));
  EXPECT_TRUE(schema_names(Table()).empty());
}

TEST(SchemaNames, InvariantUnderRowPermutation) {
  auto a = table("t", {{"x", DType::Integer}}, {{I(1)}, {I(2)}});
  auto b = table("t", {{"x", DType::Integer}}, {{I(2)}, {I(1)}});
  EXPECT_EQ(schema_names(a), schema_names(b));
}

TEST(Sample, HeadRowsOnly) {
  auto t = table("t", {{"x", DType::Integer}}, {{I(1)}, {I(2)}, {I(3)}});
  auto s = sample_rows(t, 2);
  ASSERT_EQ(s.table.row_count(), 2u);
  EXPECT_EQ(s.table.rows()[1][0], I(2));
  EXPECT_EQ(sample_rows(t, 10).table.row_count(), 3u);
}

TEST(Csv, InfersIntegerAndText) {
  auto t = parse_csv("a,b\n1,x\n", "t");
  EXPECT_EQ(t.schema()[0].dtype, DType::Integer);
  EXPECT_EQ(t.schema()[1].dtype, DType::Text);
  EXPECT_EQ(t.row_count(), 1u);
}

TEST(Csv, NarrowestCommonKind) {
  EXPECT_EQ(parse_csv("v\n1\n2.5\n", "t").schema()[0].dtype, DType::Float);
  EXPECT_EQ(parse_csv("v\ntrue\nfalse\n", "t").schema()[0].dtype, DType::Boolean);
  EXPECT_EQ(parse_csv("v\n2024-01-01\n", "t").schema()[0].dtype, DType::Date);
  EXPECT_EQ(parse_csv("v\n2024-01-01\nx\n", "t").schema()[0].dtype, DType::Text);
}

TEST(Csv, DottedDatesStayText) {
  auto t = parse_csv("Date\n2024.01.01\n", "t");
  EXPECT_EQ(t.schema()[0].dtype, DType::Text);
  EXPECT_EQ(t.rows()[0][0], T("2024.01.01"));
}

TEST(Csv, EmptyFieldsBecomeNull) {
  auto t = parse_csv("a,b\n1,\n,\"\"\n", "t");
  EXPECT_EQ(t.rows()[0][1], N());
  EXPECT_EQ(t.rows()[1][0], N());
  EXPECT_EQ(t.rows()[1][1], T(""));
}

TEST(Csv, QuotedFieldsWithSeparatorsAndNewlines) {
  auto t = parse_csv("a,b\n\"x,y\",\"line1\nline2\"\n\"say \"\"hi\"\"\",z\n", "t");
  ASSERT_EQ(t.row_count(), 2u);
  EXPECT_EQ(t.rows()[0][0], T("x,y"));
  EXPECT_EQ(t.rows()[0][1], T("line1\nline2"));
  EXPECT_EQ(t.rows()[1][0], T("say \"hi\""));
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv("a,b\n1\n", "t"), CsvError);
  EXPECT_THROW(parse_csv("a, a\n1,2\n", "t"), CsvError);
  EXPECT_THROW(parse_csv("a\n\"open\n", "t"), CsvError);
  EXPECT_THROW(parse_csv("a\n\xff\n", "t"), CsvError);
}

TEST(Csv, CustomDelimiterAndNoInference) {
  CsvOptions o;
  o.delimiter = ';';
  o.infer_types = false;
  auto t = parse_csv("a;b\n1;2\n", "t", o);
  EXPECT_EQ(t.schema()[0].dtype, DType::Text);
  EXPECT_EQ(t.rows()[0][1], T("2"));
}

TEST(Csv, WriteExamples) {
  EXPECT_EQ(to_csv(table("t", {{"a", DType::Any}}, {})), "a\n");
  EXPECT_EQ(to_csv(table("t", {{"a", DType::Any}, {"b", DType::Any}}, {{I(1), N()}})), "a,b\n1,\n");
  EXPECT_EQ(to_csv(table("t", {{"d", DType::Date}}, {{D(2024, 1, 1)}})), "d\n2024-01-01\n");
}

TEST(Csv, FileRoundTrip) {
  ScratchDir dir("csv");
  auto t = table("sales",
                 {{"Date", DType::Date}, {"Store_id", DType::Integer}, {"Sales", DType::Float},
                  {"note", DType::Text}},
                 {{D(2024, 1, 5), I(1), F(10.5), T("a, quoted \"x\"")},
                  {D(2024, 1, 6), N(), F(0.25), N()}});
  write_csv(t, dir.path() / "sales.csv");
  auto back = read_csv(dir.path() / "sales.csv");
  EXPECT_EQ(back, t);
}

TEST(Csv, InferenceIsMonotoneUnderAppend) {
  // Appending a row can only widen a column's kind along the inference chain.
  const std::vector<std::string> cells = {"1", "2.5", "true", "2024-01-01", "x", ""};
  auto rank = [](DType d) {
    switch (d) {
      case DType::Boolean: return 0;
      case DType::Integer: return 1;
      case DType::Float: return 2;
      case DType::Date: return 3;
      case DType::Text: return 4;
      case DType::Any: return -1;
    }
    return -1;
  };
  for (const auto& a : cells) {
    for (const auto& b : cells) {
      const DType before = parse_csv("v\n" + a + "\n", "t").schema()[0].dtype;
      const DType after = parse_csv("v\n" + a + "\n" + b + "\n", "t").schema()[0].dtype;
      if (before == DType::Any) continue;
      EXPECT_GE(rank(after), rank(before)) << a << " then " << b;
    }
  }
}
