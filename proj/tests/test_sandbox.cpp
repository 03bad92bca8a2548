#include <gtest/gtest.h>

#include <set>

#include "monteprep/heuristics.h"
#include "monteprep/sandbox.h"
#include "support/tasks.h"

using namespace monteprep;
using namespace fixtures;

namespace {

using A = ActionType;

Action mapping_action(const TaskContext& ctx) { return Action(heuristics::propose_mapping(ctx)); }

PipelinePlan rename_plan() {
  return parse_plan(R"({"steps":[{"op":"Rename","params":{"mapping":[{"from":"Store_id","to":"Shop_id"}]},
                                 "output_name":"out"}]})",
                    {"sales"});
}

}  // namespace

TEST(TransitionTable, Rows) {
  EXPECT_EQ(transition_row(std::nullopt), (std::vector<A>{A::SchemaMapping, A::OperatorDiscovery, A::CodeSynthesis}));
  EXPECT_EQ(transition_row(A::SchemaMapping), (std::vector<A>{A::OperatorDiscovery, A::CodeSynthesis}));
  EXPECT_EQ(transition_row(A::OperatorDiscovery), (std::vector<A>{A::SchemaMapping, A::CodeSynthesis}));
  EXPECT_EQ(transition_row(A::CodeSynthesis), (std::vector<A>{A::CodeRefinement, A::Termination}));
  EXPECT_EQ(transition_row(A::CodeRefinement), std::vector<A>{A::Termination});
  EXPECT_TRUE(transition_row(A::Termination).empty());
}

TEST(ValidNext, Examples) {
  auto s0 = initial_state(store_sales_context());
  EXPECT_EQ(valid_next(s0), (std::vector<A>{A::SchemaMapping, A::OperatorDiscovery, A::CodeSynthesis}));
  auto s1 = apply_action(s0, Action(CodeSynthesisParams{rename_plan()}));
  EXPECT_EQ(valid_next(s1), (std::vector<A>{A::CodeRefinement, A::Termination}));
  auto s2 = apply_action(s1, Action(TerminationParams{}));
  EXPECT_TRUE(s2.terminal);
  EXPECT_TRUE(valid_next(s2).empty());
}

TEST(ValidNext, NoRepeatOfMappingOrDiscovery) {
  auto ctx = store_sales_context();
  auto s = apply_action(initial_state(ctx), mapping_action(*ctx));
  s = apply_action(s, Action(heuristics::discover_operators(*ctx, &*s.mapping)));
  EXPECT_EQ(valid_next(s), std::vector<A>{A::CodeSynthesis});
}

TEST(ApplyAction, MappingSetsFieldAndHistory) {
  auto ctx = store_sales_context();
  auto s0 = initial_state(ctx);
  auto s1 = apply_action(s0, mapping_action(*ctx));
  ASSERT_TRUE(s1.mapping);
  EXPECT_EQ(s1.history, std::vector<A>{A::SchemaMapping});
  EXPECT_FALSE(s0.mapping);
  EXPECT_TRUE(s0.history.empty());
}

TEST(ApplyAction, RefinementBeforeSynthesisIsInvalid) {
  auto s0 = initial_state(store_sales_context());
  try {
    apply_action(s0, Action(CodeRefinementParams{rename_plan(), std::nullopt}));
    FAIL();
  } catch (const SandboxError& e) {
    EXPECT_EQ(e.kind(), SandboxError::Kind::InvalidTransition);
  }
}

TEST(ApplyAction, SynthesisRecordsOutputOrDiagnostics) {
  auto s0 = initial_state(store_sales_context());
  auto ok = apply_action(s0, Action(CodeSynthesisParams{rename_plan()}));
  ASSERT_TRUE(ok.output);
  EXPECT_FALSE(ok.diagnostics);
  EXPECT_TRUE(ok.output->schema().contains("Shop_id"));

  auto bad_plan = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":["nope"]},"output_name":"o"}]})",
                             {"sales"});
  auto bad = apply_action(s0, Action(CodeSynthesisParams{bad_plan}));
  ASSERT_TRUE(bad.diagnostics);
  EXPECT_EQ(bad.diagnostics->error_kind, ErrorKind::MissingColumn);
  EXPECT_FALSE(bad.output);
}

TEST(ApplyAction, InvalidMappingParams) {
  auto ctx = store_sales_context();
  auto s0 = initial_state(ctx);
  auto expect_invalid = [&](SchemaMappingParams p) {
    try {
      apply_action(s0, Action(std::move(p)));
      ADD_FAILURE();
    } catch (const SandboxError& e) {
      EXPECT_EQ(e.kind(), SandboxError::Kind::InvalidParams);
    }
  };
  expect_invalid({{{"sales", "Store_id", "Nope", ""}}});
  expect_invalid({{{"sales", "Ghost", "Shop_id", ""}}});
  expect_invalid({{{"ghost", "Store_id", "Shop_id", ""}}});
  expect_invalid({{{"sales", "Store_id", "Shop_id", ""}, {"sales", "Sales", "Shop_id", ""}}});
}

TEST(Fingerprint, Examples) {
  auto a = initial_state(store_sales_context());
  auto b = initial_state(store_sales_context());
  EXPECT_EQ(state_fingerprint(a, A::SchemaMapping), state_fingerprint(b, A::SchemaMapping));
  EXPECT_NE(state_fingerprint(a, A::SchemaMapping), state_fingerprint(a, A::OperatorDiscovery));

  auto ctx = store_sales_context();
  auto s = initial_state(ctx);
  auto with_ops = apply_action(s, Action(OperatorDiscoveryParams{{{OperatorKind::Rename, ""}}}));
  auto other_ops = apply_action(s, Action(OperatorDiscoveryParams{{{OperatorKind::GroupBy, ""}}}));
  EXPECT_NE(state_fingerprint(with_ops, A::CodeSynthesis), state_fingerprint(other_ops, A::CodeSynthesis));
}

TEST(Fingerprint, IgnoresHistoryOrder) {
  auto ctx = store_sales_context();
  auto s0 = initial_state(ctx);
  auto m = mapping_action(*ctx);
  Action ops(OperatorDiscoveryParams{{{OperatorKind::Rename, ""}}});
  auto ab = apply_action(apply_action(s0, m), ops);
  auto ba = apply_action(apply_action(s0, ops), m);
  EXPECT_EQ(state_fingerprint(ab, A::CodeSynthesis), state_fingerprint(ba, A::CodeSynthesis));
}

TEST(Fingerprint, DependsOnSamplesNotUnsampledRows) {
  auto base = store_sales_context();
  TableSet more = base->sources;
  auto rows = more.at("sales").rows();
  rows.push_back({T("2030.01.01"), I(9), T("misc"), F(1.0)});
  rows.push_back({T("2030.01.02"), I(9), T("misc"), F(1.0)});
  more.insert_or_assign("sales", Table("sales", more.at("sales").schema(), rows));
  auto ctx_more = make_task_context(more, base->target);
  // Five sample rows: the fifth row is now visible, so the digest moves.
  EXPECT_NE(ctx_more->digest, base->digest);
  auto ctx_two = make_task_context(base->sources, base->target, 2);
  auto ctx_two_more = make_task_context(more, base->target, 2);
  EXPECT_EQ(ctx_two->digest, ctx_two_more->digest);
}

TEST(Action, KeyIsCanonical) {
  Action a(OperatorDiscoveryParams{{{OperatorKind::Rename, "x"}}});
  Action b(OperatorDiscoveryParams{{{OperatorKind::Rename, "x"}}});
  Action c(OperatorDiscoveryParams{{{OperatorKind::Rename, "y"}}});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.type(), A::OperatorDiscovery);
}

TEST(TargetSchema, Validation) {
  EXPECT_THROW(TargetSchema(std::vector<TargetColumn>{}), TableError);
  EXPECT_THROW(TargetSchema({{"a", "", DType::Any}, {" a", "", DType::Any}}), TableError);
  TargetSchema t({{" a ", "", DType::Any}});
  EXPECT_TRUE(t.contains("a"));
}

TEST(SandboxLanguage, TerminalHistoriesMatchPattern) {
  // Walk every admissible sequence with a fixed valid param per type.
  auto ctx = store_sales_context();
  std::set<std::vector<A>> terminal;
  std::size_t longest = 0;
  std::function<void(const ReasoningState&)> walk = [&](const ReasoningState& s) {
    longest = std::max(longest, s.history.size());
    if (s.terminal) terminal.insert(s.history);
    for (A t : valid_next(s)) {
      switch (t) {
        case A::SchemaMapping: walk(apply_action(s, mapping_action(*ctx))); break;
        case A::OperatorDiscovery: walk(apply_action(s, Action(OperatorDiscoveryParams{}))); break;
        case A::CodeSynthesis: walk(apply_action(s, Action(CodeSynthesisParams{rename_plan()}))); break;
        case A::CodeRefinement: walk(apply_action(s, Action(CodeRefinementParams{rename_plan(), {}}))); break;
        case A::Termination: walk(apply_action(s, Action(TerminationParams{}))); break;
      }
    }
  };
  walk(initial_state(ctx));
  std::set<std::vector<A>> expected;
  const std::vector<std::vector<A>> prefixes = {
      {}, {A::SchemaMapping}, {A::OperatorDiscovery}, {A::SchemaMapping, A::OperatorDiscovery},
      {A::OperatorDiscovery, A::SchemaMapping}};
  for (auto p : prefixes) {
    p.push_back(A::CodeSynthesis);
    auto with_refine = p;
    with_refine.push_back(A::CodeRefinement);
    with_refine.push_back(A::Termination);
    p.push_back(A::Termination);
    expected.insert(p);
    expected.insert(with_refine);
  }
  EXPECT_EQ(terminal, expected);
  EXPECT_EQ(longest, 5u);
}
