#include <benchmark/benchmark.h>

#include <random>

#include "monteprep/bench.h"
#include "monteprep/operators.h"
#include "monteprep/search.h"

using namespace monteprep;

namespace {

Table long_table(std::size_t ids, std::size_t cats) {
  std::vector<Row> rows;
  rows.reserve(ids * cats);
  for (std::size_t i = 0; i < ids; ++i) {
    for (std::size_t c = 0; c < cats; ++c) {
      rows.push_back({CellValue::text("id" + std::to_string(i)), CellValue::text("c" + std::to_string(c)),
                      CellValue::integer(static_cast<std::int64_t>(i * 31 + c))});
    }
  }
  return Table("t", Schema({{"id", DType::Text}, {"cat", DType::Text}, {"v", DType::Integer}}), std::move(rows));
}

void BM_GroupBySum(benchmark::State& state) {
  const auto t = long_table(static_cast<std::size_t>(state.range(0)), 8);
  const GroupByParams p{{"id"}, {{"v", AggFn::Sum, "total"}}};
  for (auto _ : state) benchmark::DoNotOptimize(op_groupby(t, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.row_count()));
}
BENCHMARK(BM_GroupBySum)->Arg(100)->Arg(2000);

void BM_PivotUnpivot(benchmark::State& state) {
  const auto t = long_table(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto wide = op_pivot(t, {{"id"}, "cat", "v", AggFn::Sum});
    benchmark::DoNotOptimize(op_unpivot(wide, {{"id"}, "cat", "v"}));
  }
}
BENCHMARK(BM_PivotUnpivot)->Arg(100)->Arg(2000);

void BM_Join(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Row> l, r;
  for (std::size_t i = 0; i < n; ++i) {
    l.push_back({CellValue::integer(static_cast<std::int64_t>(i)), CellValue::integer(static_cast<std::int64_t>(i % 97))});
    r.push_back({CellValue::integer(static_cast<std::int64_t>(i)), CellValue::text("x")});
  }
  const Table left("l", Schema({{"k", DType::Integer}, {"a", DType::Integer}}), l);
  const Table right("r", Schema({{"k", DType::Integer}, {"b", DType::Text}}), r);
  const JoinParams p{"l", "r", {{"k", "k"}}, JoinHow::Inner};
  for (auto _ : state) benchmark::DoNotOptimize(op_join(left, right, p));
}
BENCHMARK(BM_Join)->Arg(1000)->Arg(20000);

void BM_UctScore(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> d(1, 1000);
  double acc = 0;
  for (auto _ : state) {
    const std::size_t nva = d(rng);
    acc += uct_score(0.5 * static_cast<double>(nva), nva + d(rng), nva, 1.0, UctValue::Cumulative);
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_UctScore);

void BM_SearchMicroTask(benchmark::State& state, const char* id) {
  const auto task = load_task(std::filesystem::path(MONTEPREP_BENCH_DATA_DIR) / "microsuite" / id);
  const auto ctx = make_task_context(load_sources(task), task.target);
  SearchConfig cfg;
  cfg.early_stop = false;
  for (auto _ : state) {
    HeuristicOracle oracle;
    benchmark::DoNotOptimize(run_search(ctx, cfg, oracle));
  }
}
BENCHMARK_CAPTURE(BM_SearchMicroTask, rename_only, "rename_only");
BENCHMARK_CAPTURE(BM_SearchMicroTask, join_groupby, "join_groupby");
BENCHMARK_CAPTURE(BM_SearchMicroTask, store_sales_dotted, "store_sales_dotted");

}  // namespace
BENCHMARK_MAIN();
