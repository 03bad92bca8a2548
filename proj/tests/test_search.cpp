#include <gtest/gtest.h>

#include <cmath>

#include "monteprep/metrics.h"
#include "monteprep/search.h"
#include "support/tasks.h"

using namespace monteprep;
using namespace fixtures;

namespace {

using A = ActionType;

// Counts proposals per action type on top of the heuristic oracle.
class CountingOracle : public Oracle {
 public:
  std::string name() const override { return "counting"; }
  OracleResponse propose(const ReasoningState& s, ActionType t) override {
    ++calls;
    ++per_type[static_cast<std::size_t>(t)];
    if (fail_type && *fail_type == t) {
      OracleResponse r;
      r.error = "scripted failure";
      r.attempts = 1;
      return r;
    }
    return inner.propose(s, t);
  }
  JudgeVerdict judge(const JudgeRequest& r) override {
    ++judges;
    if (judge_throws) throw std::runtime_error("judge unreachable");
    return inner.judge(r);
  }

  HeuristicOracle inner;
  std::size_t calls = 0, judges = 0;
  std::array<std::size_t, 5> per_type{};
  std::optional<ActionType> fail_type;
  bool judge_throws = false;
};

}  // namespace

TEST(Uct, Examples) {
  EXPECT_EQ(uct_score(0, 1, 1, 1, UctValue::Cumulative), 0.0);
  EXPECT_NEAR(uct_score(1.5, 8, 3, 1, UctValue::Cumulative), 2.3326, 5e-5);
  const double e1 = uct_score(1.5, 8, 3, 1, UctValue::Cumulative) - 1.5;
  const double e2 = uct_score(1.5, 8, 3, 2, UctValue::Cumulative) - 1.5;
  EXPECT_DOUBLE_EQ(e2, 2 * e1);
  EXPECT_DOUBLE_EQ(uct_score(1.5, 8, 3, 1, UctValue::Mean), 0.5 + e1);
}

TEST(Uct, SelectExampleFavoursFirstAction) {
  // (Q=2, N=2) vs (Q=0.5, N=1) with N_v=3: 2 + sqrt(ln3/2) and 0.5 + sqrt(ln3).
  const double a = uct_score(2, 3, 2, 1, UctValue::Cumulative);
  const double b = uct_score(0.5, 3, 1, 1, UctValue::Cumulative);
  EXPECT_NEAR(a, 2.0 + std::sqrt(std::log(3.0) / 2), 1e-12);
  EXPECT_NEAR(b, 0.5 + std::sqrt(std::log(3.0)), 1e-12);
  EXPECT_NEAR(a, 2.7412, 1e-4);
  EXPECT_NEAR(b, 1.5481, 1e-4);
  EXPECT_GT(a, b);
}

TEST(Config, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rollouts = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_depth = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.early_stop_k = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_reward_mode("hybrid"), RewardMode::Hybrid);
  EXPECT_FALSE(parse_reward_mode("nope"));
  EXPECT_EQ(parse_uct_value("mean"), UctValue::Mean);
}

TEST(Select, FreshRootIsSelected) {
  SearchTree tree(initial_state(store_sales_context()));
  auto s = select(tree, {});
  EXPECT_EQ(s.node, tree.root());
  EXPECT_TRUE(s.path.empty());
}

TEST(Select, UnvisitedActionFirstThenUct) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  expand(tree, tree.root(), o, cache);
  auto& root = tree.node(tree.root());
  ASSERT_EQ(root.edges.size(), 3u);
  // Only the second action unvisited: it is taken regardless of scores.
  root.visits = 5;
  root.edges[0].visits = 3;
  root.edges[0].q = 3;
  root.edges[2].visits = 2;
  root.edges[2].q = 2;
  auto s = select(tree, {});
  ASSERT_EQ(s.path.size(), 1u);
  EXPECT_EQ(s.path[0].edge, 1u);
  // All visited: argmax of cumulative UCT.
  root.edges[1].visits = 1;
  root.edges[1].q = 0;
  root.visits = 6;
  auto s2 = select(tree, {});
  EXPECT_EQ(s2.path[0].edge, 0u);
}

TEST(Select, TiesGoToDeclarationOrder) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  expand(tree, tree.root(), o, cache);
  auto s = select(tree, {});
  EXPECT_EQ(tree.node(tree.root()).edges[s.path[0].edge].action.type(), A::SchemaMapping);
}

TEST(Expand, RootGivesThreeChildrenAndIsIdempotent) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  auto kids = expand(tree, tree.root(), o, cache);
  EXPECT_EQ(kids.size(), 3u);
  const auto calls = o.calls;
  EXPECT_EQ(expand(tree, tree.root(), o, cache), kids);
  EXPECT_EQ(o.calls, calls);
}

TEST(Expand, AfterSynthesisAtMostTwoChildren) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  auto kids = expand(tree, tree.root(), o, cache);
  NodeId a3 = 0;
  for (auto k : kids) {
    if (tree.node(k).state.history.back() == A::CodeSynthesis) a3 = k;
  }
  auto next = expand(tree, a3, o, cache);
  EXPECT_LE(next.size(), 2u);
  for (auto k : next) {
    const auto t = tree.node(k).state.history.back();
    EXPECT_TRUE(t == A::CodeRefinement || t == A::Termination);
  }
}

TEST(Expand, FailedProposalSkippedWithWarning) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  o.fail_type = A::OperatorDiscovery;
  SimulationCache cache;
  std::vector<std::string> warnings;
  auto kids = expand(tree, tree.root(), o, cache, &warnings);
  EXPECT_EQ(kids.size(), 2u);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_FALSE(tree.node(tree.root()).dead);
}

TEST(Expand, NoChildrenMarksDead) {
  // After mapping then discovery, synthesis is the only admissible action.
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  NodeId a1 = 0;
  for (auto k : expand(tree, tree.root(), o, cache)) {
    if (tree.node(k).state.history.back() == A::SchemaMapping) a1 = k;
  }
  ASSERT_NE(a1, 0u);
  NodeId a12 = 0;
  for (auto k : expand(tree, a1, o, cache)) {
    if (tree.node(k).state.history.back() == A::OperatorDiscovery) a12 = k;
  }
  ASSERT_NE(a12, 0u);
  ASSERT_EQ(valid_next(tree.node(a12).state), std::vector<A>{A::CodeSynthesis});
  o.fail_type = A::CodeSynthesis;
  std::vector<std::string> warnings;
  EXPECT_TRUE(expand(tree, a12, o, cache, &warnings).empty());
  EXPECT_TRUE(tree.node(a12).dead);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Simulate, TerminalCandidateHasPathOfOne) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  auto kids = expand(tree, tree.root(), o, cache);
  NodeId a3 = 0;
  for (auto k : kids) {
    if (tree.node(k).state.history.back() == A::CodeSynthesis) a3 = k;
  }
  auto t = expand(tree, a3, o, cache);
  NodeId term = 0;
  for (auto k : t) {
    if (tree.node(k).state.terminal) term = k;
  }
  std::mt19937_64 rng(1);
  auto rec = simulate(tree, a3, {term}, o, cache, {}, rng);
  EXPECT_EQ(rec.path.size(), 1u);
  EXPECT_EQ(rec.leaf, term);
  EXPECT_EQ(rec.terminated_by, RolloutEnd::Termination);
}

TEST(Simulate, DepthLimit) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  SearchConfig cfg;
  cfg.max_depth = 1;
  auto kids = expand(tree, tree.root(), o, cache);
  std::mt19937_64 rng(3);
  auto rec = simulate(tree, tree.root(), kids, o, cache, cfg, rng);
  EXPECT_EQ(rec.terminated_by, RolloutEnd::DepthLimit);
  for (std::size_t i = 0; i < tree.size(); ++i) EXPECT_LE(tree.node(i).depth(), 1u);
}

TEST(Simulate, SeededPathsRepeat) {
  auto run = [] {
    SearchTree tree(initial_state(store_sales_context()));
    CountingOracle o;
    SimulationCache cache;
    auto kids = expand(tree, tree.root(), o, cache);
    std::mt19937_64 rng(42);
    auto rec = simulate(tree, tree.root(), kids, o, cache, {}, rng);
    std::vector<std::string> keys;
    for (const auto& s : describe_path(tree, rec.path)) keys.push_back(std::string(to_string(s.type)) + s.params);
    return keys;
  };
  EXPECT_EQ(run(), run());
}

TEST(Reward, ExecModeExamples) {
  auto ctx = store_sales_context();
  auto s = initial_state(ctx);
  CountingOracle o;
  EXPECT_EQ(evaluate_reward(s, RewardMode::Exec, o), 0.0);

  auto good = parse_plan(R"({"steps":[
      {"op":"Rename","params":{"mapping":[{"from":"Store_id","to":"Shop_id"}]},"output_name":"a"},
      {"op":"GroupBy","params":{"keys":["Date","Shop_id","Product_category"],
                                "aggs":[{"column":"Sales","fn":"sum","out_name":"Total_store_sales"}]},"output_name":"b"}]})",
                         {"sales"});
  EXPECT_EQ(evaluate_reward(apply_action(s, Action(CodeSynthesisParams{good})), RewardMode::Exec, o), 1.0);

  auto half = parse_plan(R"({"steps":[
      {"op":"Rename","params":{"mapping":[{"from":"Store_id","to":"Shop_id"}]},"output_name":"a"},
      {"op":"DropColumns","params":{"names":["Product_category"]},"output_name":"b"}]})",
                         {"sales"});
  EXPECT_EQ(evaluate_reward(apply_action(s, Action(CodeSynthesisParams{half})), RewardMode::Exec, o), 0.5);

  auto broken = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":["nope"]},"output_name":"a"}]})",
                           {"sales"});
  EXPECT_EQ(evaluate_reward(apply_action(s, Action(CodeSynthesisParams{broken})), RewardMode::Exec, o), 0.0);
  EXPECT_EQ(o.judges, 0u);
}

TEST(Reward, SelfAndHybridUseJudge) {
  auto ctx = store_sales_context();
  auto s = initial_state(ctx);
  CountingOracle o;
  auto half = parse_plan(R"({"steps":[{"op":"DropColumns","params":{"names":["Store_id"]},"output_name":"a"}]})",
                         {"sales"});
  auto st = apply_action(s, Action(CodeSynthesisParams{half}));
  std::size_t judges = 0;
  EXPECT_EQ(evaluate_reward(st, RewardMode::Self, o, &judges), 0.5);
  EXPECT_EQ(evaluate_reward(st, RewardMode::Hybrid, o, &judges), 0.5);
  EXPECT_EQ(judges, 2u);
  o.judge_throws = true;
  EXPECT_EQ(evaluate_reward(st, RewardMode::Self, o), 0.0);
}

TEST(Backprop, Examples) {
  SearchTree tree(initial_state(store_sales_context()));
  CountingOracle o;
  SimulationCache cache;
  auto kids = expand(tree, tree.root(), o, cache);
  auto kids2 = expand(tree, kids[0], o, cache);
  auto kids3 = expand(tree, kids2[0], o, cache);
  std::vector<PathStep> path{{tree.root(), 0}, {kids[0], 0}, {kids2[0], 0}};
  backpropagate(tree, path, kids3[0], 1.0);
  for (const auto& p : path) {
    EXPECT_EQ(tree.node(p.node).edges[p.edge].q, 1.0);
    EXPECT_EQ(tree.node(p.node).edges[p.edge].visits, 1u);
    EXPECT_EQ(tree.node(p.node).visits, 1u);
  }
  EXPECT_EQ(tree.node(kids3[0]).visits, 1u);
  backpropagate(tree, path, kids3[0], 0.0);
  EXPECT_EQ(tree.node(tree.root()).edges[0].q, 1.0);
  EXPECT_EQ(tree.node(tree.root()).edges[0].visits, 2u);
  backpropagate(tree, {path[0]}, kids[0], 0.5);
  EXPECT_EQ(tree.node(tree.root()).edges[0].q, 1.5);
  EXPECT_EQ(tree.node(tree.root()).edges[0].visits, 3u);
}

TEST(Cache, SameRequestOneCall) {
  auto s = initial_state(store_sales_context());
  CountingOracle o;
  SimulationCache cache;
  cached_propose(cache, s, A::SchemaMapping, o);
  cached_propose(cache, s, A::SchemaMapping, o);
  EXPECT_EQ(o.calls, 1u);
  EXPECT_EQ(cache.hits(), 1u);
  cached_propose(cache, s, A::OperatorDiscovery, o);
  EXPECT_EQ(o.calls, 2u);

  SimulationCache off(false);
  cached_propose(off, s, A::SchemaMapping, o);
  cached_propose(off, s, A::SchemaMapping, o);
  EXPECT_EQ(o.calls, 4u);
  EXPECT_EQ(off.misses(), 2u);
  EXPECT_EQ(off.hits(), 0u);
}

TEST(Cache, FailuresAreNotStored) {
  auto s = initial_state(store_sales_context());
  CountingOracle o;
  o.fail_type = A::SchemaMapping;
  SimulationCache cache;
  EXPECT_FALSE(cached_propose(cache, s, A::SchemaMapping, o).ok());
  EXPECT_FALSE(cached_propose(cache, s, A::SchemaMapping, o).ok());
  EXPECT_EQ(o.calls, 2u);
}

TEST(RunSearch, Example1FindsExactPlan) {
  HeuristicOracle o;
  auto r = run_search(store_sales_context(), {}, o);
  ASSERT_TRUE(r.best);
  EXPECT_EQ(r.best_reward, 1.0);
  EXPECT_LE(r.trace.size(), 10u);
}

TEST(RunSearch, RenameOnlyGivesSingleRename) {
  HeuristicOracle o;
  auto r = run_search(microsuite_context("rename_only"), {}, o);
  ASSERT_TRUE(r.best);
  EXPECT_EQ(r.best_reward, 1.0);
  ASSERT_EQ(r.best->size(), 1u);
  EXPECT_EQ(r.best->steps()[0].op(), OperatorKind::Rename);
}

TEST(RunSearch, EarlyStopAtSecondExactPlan) {
  for (const char* id : {"rename_only", "join", "store_sales_dotted", "unpivot", "pivot"}) {
    HeuristicOracle o;
    SearchConfig full;
    full.early_stop = false;
    auto all = run_search(microsuite_context(id), full, o);
    std::size_t expect = all.trace.size();
    int exact = 0;
    for (const auto& rec : all.trace) {
      if (rec.plan && rec.reward == 1.0 && ++exact == 2) {
        expect = rec.index + 1;
        break;
      }
    }
    auto stopped = run_search(microsuite_context(id), {}, o);
    EXPECT_EQ(stopped.trace.size(), expect) << id;
    EXPECT_EQ(stopped.stopped_early, exact >= 2) << id;
  }
}

TEST(RunSearch, DeterministicAndCacheSound) {
  for (const char* id : {"store_sales_slashed", "join_groupby", "rename_arithmetic"}) {
    HeuristicOracle o;
    SearchConfig on, off;
    on.early_stop = off.early_stop = false;
    off.cache_enabled = false;
    auto a = run_search(microsuite_context(id), on, o);
    auto b = run_search(microsuite_context(id), on, o);
    auto c = run_search(microsuite_context(id), off, o);
    ASSERT_EQ(a.trace.size(), c.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      EXPECT_EQ(a.trace[i].plan, b.trace[i].plan);
      EXPECT_EQ(a.trace[i].plan, c.trace[i].plan);
      EXPECT_EQ(a.trace[i].reward, c.trace[i].reward);
    }
    EXPECT_EQ(a.cache_misses, b.cache_misses);
    EXPECT_LE(a.oracle_calls, c.oracle_calls);
    EXPECT_EQ(c.cache_hits, 0u);
  }
}

TEST(RunSearch, TreeInvariants) {
  HeuristicOracle o;
  SearchConfig cfg;
  cfg.early_stop = false;
  cfg.rollouts = 40;
  auto r = run_search(microsuite_context("join_groupby"), cfg, o);
  const auto& tree = r.tree;
  std::size_t root_edge_visits = 0;
  for (const auto& e : tree.node(tree.root()).edges) root_edge_visits += e.visits;
  EXPECT_EQ(root_edge_visits, r.trace.size());
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    EXPECT_LE(n.depth(), 5u);
    for (const auto& e : n.edges) {
      EXPECT_GE(e.q, 0.0);
      EXPECT_LE(e.q, static_cast<double>(e.visits));
    }
  }
}

TEST(RunSearch, OracleFailuresScoreZero) {
  CountingOracle o;
  o.fail_type = A::CodeSynthesis;
  auto r = run_search(store_sales_context(), {}, o);
  EXPECT_FALSE(r.best);
  EXPECT_EQ(r.trace.size(), 10u);
  for (const auto& rec : r.trace) EXPECT_EQ(rec.reward, 0.0);
  EXPECT_FALSE(r.warnings.empty());
}
