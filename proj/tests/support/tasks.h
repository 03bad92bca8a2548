#pragma once

#include <memory>

#include "monteprep/bench.h"
#include "monteprep/sandbox.h"
#include "support/fixtures.h"

namespace fixtures {

/// Example-1 style task: dotted dates, Store_id to rename, summed sales.
inline std::shared_ptr<const monteprep::TaskContext> store_sales_context() {
  using namespace monteprep;
  auto sales = table("sales",
                     {{"Date", DType::Text}, {"Store_id", DType::Integer}, {"Product_category", DType::Text},
                      {"Sales", DType::Float}},
                     {{T("2024.01.05"), I(1), T("toys"), F(10.0)},
                      {T("2024.01.05"), I(1), T("toys"), F(5.5)},
                      {T("2024.01.05"), I(2), T("food"), F(3.0)},
                      {T("2024.01.06"), I(1), T("food"), F(8.0)}});
  TargetSchema target({{"Date", "", DType::Any},
                       {"Shop_id", "", DType::Any},
                       {"Product_category", "", DType::Any},
                       {"Total_store_sales", "", DType::Any}});
  return make_task_context({{"sales", sales}}, target);
}

inline std::shared_ptr<const monteprep::TaskContext> microsuite_context(const std::string& id) {
  using namespace monteprep;
  auto task = load_task(microsuite_dir() / id);
  return make_task_context(load_sources(task), task.target);
}

}  // namespace fixtures
