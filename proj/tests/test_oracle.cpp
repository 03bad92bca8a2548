#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "monteprep/heuristics.h"
#include "monteprep/llm.h"
#include "monteprep/metrics.h"
#include "monteprep/oracle.h"
#include "support/tasks.h"

using namespace monteprep;
using namespace fixtures;

namespace {

using A = ActionType;

// Replays canned replies and records every conversation it was sent.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::deque<std::string> replies) : replies_(std::move(replies)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    std::lock_guard lock(mu_);
    seen.push_back(messages);
    if (replies_.empty()) throw ChatError("script exhausted");
    auto r = std::move(replies_.front());
    replies_.pop_front();
    if (r == "!transport") throw ChatError("connection reset");
    return r;
  }

  std::vector<std::vector<ChatMessage>> seen;

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
};

const char* kMappingReply =
    "Here you go.\n```json\n{\"mapping\": [{\"table\": \"sales\", \"column\": \"Store_id\", "
    "\"target\": \"Shop_id\", \"note\": \"renamed\"}]}\n```\nDone.";

}  // namespace

TEST(NameSimilarity, StoreIdVersusShopId) {
  EXPECT_EQ(heuristics::name_tokens("Store_id"), (std::vector<std::string>{"store", "id"}));
  EXPECT_EQ(heuristics::name_tokens("totalStoreSales"), (std::vector<std::string>{"total", "store", "sales"}));
  // Dice over {store, id} and {shop, id}: 2*1 / (2+2).
  EXPECT_DOUBLE_EQ(heuristics::name_similarity("Store_id", "Shop_id"), 0.5);
  EXPECT_GE(heuristics::name_similarity("Store_id", "Shop_id"), heuristics::kSimilarityThreshold);
  EXPECT_DOUBLE_EQ(heuristics::name_similarity("Date", "date"), 1.0);
  EXPECT_DOUBLE_EQ(heuristics::name_similarity("Sales", "Product_category"), 0.0);
}

TEST(Heuristics, MappingPairsStoreIdWithShopId) {
  auto ctx = store_sales_context();
  auto m = heuristics::propose_mapping(*ctx);
  bool found = false;
  for (const auto& e : m.entries) {
    if (e.source_column == "Store_id") {
      EXPECT_EQ(e.target_column, "Shop_id");
      found = true;
    }
    EXPECT_NE(e.target_column, "Total_store_sales");
  }
  EXPECT_TRUE(found);
}

TEST(Heuristics, DiscoveryProposesGroupByAndDateFormatting) {
  auto ctx = store_sales_context();
  auto ops = heuristics::discover_operators(*ctx, nullptr);
  EXPECT_TRUE(ops.contains(OperatorKind::GroupBy));
  EXPECT_TRUE(ops.contains(OperatorKind::DateFormatting));
  EXPECT_TRUE(ops.contains(OperatorKind::Rename));
  EXPECT_FALSE(ops.contains(OperatorKind::Pivot));
}

TEST(Heuristics, Hints) {
  EXPECT_EQ(heuristics::aggregate_hint({"Total_store_sales", "", DType::Any}), AggFn::Sum);
  EXPECT_EQ(heuristics::aggregate_hint({"Avg_sales", "", DType::Any}), AggFn::Mean);
  EXPECT_EQ(heuristics::aggregate_hint({"order_count", "", DType::Any}), AggFn::Count);
  EXPECT_FALSE(heuristics::aggregate_hint({"Shop_id", "", DType::Any}));
  EXPECT_EQ(heuristics::constant_hint({"currency", "constant USD", DType::Any}), T("USD"));
  EXPECT_EQ(heuristics::constant_hint({"flag", "constant 3", DType::Any}), I(3));
  auto e = heuristics::expression_hint({"revenue", "price * quantity", DType::Any}, {"price", "quantity"});
  ASSERT_TRUE(e);
  EXPECT_EQ(*e, parse_expression("price * quantity"));
  EXPECT_FALSE(heuristics::expression_hint({"revenue", "price * tax", DType::Any}, {"price"}));
}

TEST(Heuristics, SynthesizedPlanSolvesExample1) {
  auto ctx = store_sales_context();
  auto m = heuristics::propose_mapping(*ctx);
  auto ops = heuristics::discover_operators(*ctx, &m);
  auto plan = heuristics::synthesize_plan(*ctx, &m, &ops);
  ASSERT_TRUE(plan);
  auto r = execute_plan(*plan, ctx->sources);
  ASSERT_TRUE(r.ok()) << r.diagnostics().message;
  EXPECT_DOUBLE_EQ(metric_cs(r.table(), ctx->target), 1.0);
}

TEST(Heuristics, RefinementRepairsMissingColumn) {
  auto ctx = store_sales_context();
  auto s = initial_state(ctx);
  auto bad = parse_plan(R"({"steps":[
      {"op":"Rename","params":{"mapping":[{"from":"Store_Id","to":"Shop_id"}]},"output_name":"a"}]})",
                        {"sales"});
  s = apply_action(s, Action(CodeSynthesisParams{bad}));
  ASSERT_TRUE(s.diagnostics);
  auto fixed = heuristics::refine_plan(s);
  ASSERT_TRUE(fixed);
  auto next = apply_action(s, Action(CodeRefinementParams{*fixed, s.diagnostics}));
  EXPECT_FALSE(next.diagnostics);
  ASSERT_TRUE(next.output);
}

TEST(Heuristics, JudgeThresholds) {
  auto ctx = store_sales_context();
  auto full = parse_plan(R"({"steps":[
      {"op":"Rename","params":{"mapping":[{"from":"Store_id","to":"Shop_id"},{"from":"Sales","to":"Total_store_sales"}]},
       "output_name":"a"}]})",
                         {"sales"});
  EXPECT_EQ(heuristics::judge_score(*ctx, full, nullptr), 1.0);
  // Date and Product_category survive; Shop_id and the total do not.
  auto half = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":["Store_id"]},"output_name":"a"}]})",
                         {"sales"});
  EXPECT_EQ(heuristics::judge_score(*ctx, half, nullptr), 0.5);
  auto none = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":["Date","Product_category"]},
                                      "output_name":"a"}]})",
                         {"sales"});
  EXPECT_EQ(heuristics::judge_score(*ctx, none, nullptr), 0.0);
}

TEST(HeuristicOracle, DeterministicAndParsedThroughReplyFormat) {
  auto ctx = store_sales_context();
  HeuristicOracle o;
  auto s = initial_state(ctx);
  for (A t : valid_next(s)) {
    auto a = o.propose(s, t);
    auto b = o.propose(s, t);
    ASSERT_TRUE(a.ok()) << a.error;
    EXPECT_EQ(a.raw_text, b.raw_text);
    EXPECT_EQ(Action(*a.params), Action(parse_action_reply(a.raw_text, t, *ctx)));
    EXPECT_NE(a.raw_text.find("```json"), std::string::npos);
  }
}

TEST(HeuristicOracle, JudgeScoresDiagnosticsZero) {
  auto ctx = store_sales_context();
  HeuristicOracle o;
  auto plan = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":[]},"output_name":"a"}]})", {"sales"});
  ExecutionDiagnostics d{0, ErrorKind::MissingColumn, "x"};
  EXPECT_EQ(o.judge({ctx.get(), &plan, nullptr, &d}).score, 0.0);
}

TEST(Prompts, SectionsInOrderAndDeterministic) {
  auto ctx = store_sales_context();
  auto s = initial_state(ctx);
  for (A t : kAllActionTypes) {
    const std::string p = render_prompt(s, t);
    const auto i = p.find("## Instruction"), ti = p.find("## Tips"), tb = p.find("## Table Information"),
               rf = p.find("## Response Format");
    ASSERT_NE(i, std::string::npos);
    EXPECT_LT(i, ti);
    EXPECT_LT(ti, tb);
    EXPECT_LT(tb, rf);
    EXPECT_EQ(p, render_prompt(s, t));
  }
  EXPECT_NE(render_prompt(s, A::CodeSynthesis).find("DateFormatting"), std::string::npos);
  EXPECT_NE(render_prompt(s, A::CodeSynthesis).find("output_name"), std::string::npos);
}

TEST(Prompts, JudgeSectionsAndPreview) {
  auto ctx = store_sales_context();
  auto plan = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":[]},"output_name":"a"}]})", {"sales"});
  auto preview = table("p", {{"marker_col", DType::Text}}, {{T("preview-cell")}});
  const std::string p = render_judge_prompt({ctx.get(), &plan, &preview, nullptr});
  const auto i = p.find("## Instruction"), r = p.find("## Evaluation Rules"), tb = p.find("## Table Information"),
             o = p.find("## Output Format");
  ASSERT_NE(i, std::string::npos);
  EXPECT_LT(i, r);
  EXPECT_LT(r, tb);
  EXPECT_LT(tb, o);
  EXPECT_NE(p.find("preview-cell"), std::string::npos);
  EXPECT_EQ(render_judge_prompt({ctx.get(), &plan, nullptr, nullptr}).find("preview-cell"), std::string::npos);
}

TEST(Prompts, SampleRowsOnly) {
  auto sales = table("sales", {{"k", DType::Text}}, {{T("row-1")}, {T("row-2")}, {T("row-3")}});
  auto ctx = make_task_context({{"sales", sales}}, TargetSchema({{"k", "", DType::Any}}), 2);
  const std::string p = render_prompt(initial_state(ctx), A::SchemaMapping);
  EXPECT_NE(p.find("row-2"), std::string::npos);
  EXPECT_EQ(p.find("row-3"), std::string::npos);
}

TEST(Prompts, TemplateOverridesFromFile) {
  ScratchDir dir("tpl");
  {
    std::ofstream f(dir.path() / "t.json");
    f << R"({"system": "SYS", "actions": {"SchemaMapping": {"tips": "- custom tip"}},
             "judge": {"rules": "- custom rule"}})";
  }
  auto t = load_prompt_templates(dir.path() / "t.json");
  EXPECT_EQ(t.system, "SYS");
  EXPECT_EQ(t.for_action(A::SchemaMapping).tips, "- custom tip");
  EXPECT_EQ(t.for_action(A::SchemaMapping).instruction, PromptTemplates::defaults().for_action(A::SchemaMapping).instruction);
  EXPECT_EQ(t.judge_rules, "- custom rule");
  auto ctx = store_sales_context();
  EXPECT_NE(render_prompt(initial_state(ctx), A::SchemaMapping, t).find("custom tip"), std::string::npos);
}

TEST(ReplyParsing, FencedAndBare) {
  EXPECT_EQ(extract_json_block("x\n```json\n{\"a\":1}\n```\ny"), "{\"a\":1}");
  EXPECT_EQ(extract_json_block("  {\"a\":1}  "), "{\"a\":1}");
  EXPECT_FALSE(extract_json_block("no structure here"));
}

TEST(ReplyParsing, Errors) {
  auto ctx = store_sales_context();
  EXPECT_THROW(parse_action_reply("nothing", A::SchemaMapping, *ctx), ReplyParseError);
  EXPECT_THROW(parse_action_reply("```json\n{\"operators\": [\"Sort\"]}\n```", A::OperatorDiscovery, *ctx),
               ReplyParseError);
  EXPECT_THROW(parse_action_reply("```json\n{\"plan\": {\"steps\": []}}\n```", A::CodeSynthesis, *ctx),
               ReplyParseError);
  auto ops = parse_action_reply("```json\n{\"operators\": [\"Rename\", {\"op\": \"GroupBy\", \"note\": \"n\"}]}\n```",
                                A::OperatorDiscovery, *ctx);
  EXPECT_TRUE(std::get<OperatorDiscoveryParams>(ops).contains(OperatorKind::GroupBy));
}

TEST(ReplyParsing, Judge) {
  auto v = parse_judge_reply("```json\n{\"score\": 0.5, \"rationale\": \"half\"}\n```");
  ASSERT_TRUE(v);
  EXPECT_EQ(v->score, 0.5);
  EXPECT_FALSE(parse_judge_reply("looks great to me"));
  EXPECT_FALSE(parse_judge_reply("{\"score\": 0.7}"));
}

TEST(LlmOracle, RetriesMalformedRepliesThenSucceeds) {
  auto backend = std::make_shared<ScriptedBackend>(
      std::deque<std::string>{"I think Store_id maps to Shop_id.", "```json\n{\"mapping\": 5}\n```", kMappingReply});
  LlmOracle o(backend, {2, PromptTemplates::defaults()});
  auto r = o.propose(initial_state(store_sales_context()), A::SchemaMapping);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(o.backend_calls(), 3u);
  const auto& m = std::get<SchemaMappingParams>(*r.params);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].target_column, "Shop_id");
  // The last conversation carries both failed replies and the parse errors.
  const auto& last = backend->seen.back();
  EXPECT_EQ(last.size(), 1 + 1 + 4u);
  EXPECT_EQ(last[2].role, "assistant");
  EXPECT_NE(last[3].content.find("could not be used"), std::string::npos);
}

TEST(LlmOracle, ExhaustedRetriesReportFailure) {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<std::string>{"no", "no", "no", "unused"});
  LlmOracle o(backend, {2, PromptTemplates::defaults()});
  auto r = o.propose(initial_state(store_sales_context()), A::SchemaMapping);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.attempts, 3);
  EXPECT_FALSE(r.error.empty());
}

TEST(LlmOracle, TransportErrorsAreRetried) {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<std::string>{"!transport", kMappingReply});
  LlmOracle o(backend);
  auto r = o.propose(initial_state(store_sales_context()), A::SchemaMapping);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.attempts, 2);
}

TEST(LlmOracle, TerminationNeedsNoCall) {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<std::string>{});
  LlmOracle o(backend);
  auto r = o.propose(initial_state(store_sales_context()), A::Termination);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(o.backend_calls(), 0u);
}

TEST(LlmOracle, UnparseableJudgeScoresZero) {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<std::string>{"It is probably fine.",
                                                                           "```json\n{\"score\": 1}\n```"});
  LlmOracle o(backend);
  auto ctx = store_sales_context();
  auto plan = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":[]},"output_name":"a"}]})", {"sales"});
  EXPECT_EQ(o.judge({ctx.get(), &plan, nullptr, nullptr}).score, 0.0);
  EXPECT_EQ(o.judge({ctx.get(), &plan, nullptr, nullptr}).score, 1.0);
}

TEST(HttpChatBackend, TalksToCompatibleEndpoint) {
  httplib::Server server;
  std::atomic<int> in_flight{0}, peak{0};
  std::string seen_auth, seen_model;
  std::mutex mu;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    auto body = nlohmann::json::parse(req.body);
    {
      std::lock_guard lock(mu);
      seen_auth = req.get_header_value("Authorization");
      seen_model = body.value("model", "");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const std::string last = body["messages"].back()["content"];
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo:" + last}}}}}}};
    res.set_content(reply.dump(), "application/json");
    --in_flight;
  });
  server.Post("/bad/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("oops", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChatConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.model = "test-model";
  cfg.api_key = "secret";
  cfg.max_in_flight = 2;
  HttpChatBackend backend(cfg);
  EXPECT_EQ(backend.complete({{"user", "hello"}}), "echo:hello");
  {
    std::lock_guard lock(mu);
    EXPECT_EQ(seen_auth, "Bearer secret");
    EXPECT_EQ(seen_model, "test-model");
  }

  std::vector<std::thread> clients;
  for (int i = 0; i < 6; ++i) {
    clients.emplace_back([&, i] { EXPECT_EQ(backend.complete({{"user", std::to_string(i)}}), "echo:" + std::to_string(i)); });
  }
  for (auto& c : clients) c.join();
  EXPECT_LE(peak.load(), 2);

  HttpChatConfig bad = cfg;
  bad.base_url = "http://127.0.0.1:" + std::to_string(port) + "/bad/v1";
  HttpChatBackend failing(bad);
  EXPECT_THROW(failing.complete({{"user", "x"}}), ChatError);

  server.stop();
  th.join();
}

TEST(HttpChatConfig, EnvironmentOverrides) {
  setenv("MONTEPREP_API_BASE", "http://example.invalid/v9", 1);
  setenv("MONTEPREP_MODEL", "m", 1);
  setenv("MONTEPREP_API_KEY", "k", 1);
  auto c = HttpChatConfig::from_env();
  EXPECT_EQ(c.base_url, "http://example.invalid/v9");
  EXPECT_EQ(c.model, "m");
  EXPECT_EQ(c.api_key, "k");
  unsetenv("MONTEPREP_API_BASE");
  unsetenv("MONTEPREP_MODEL");
  unsetenv("MONTEPREP_API_KEY");
}
