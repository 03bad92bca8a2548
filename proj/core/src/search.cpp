#include "monteprep/search.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "monteprep/executor.h"
#include "monteprep/metrics.h"

namespace monteprep {

namespace {

void warn(std::vector<std::string>* warnings, std::string msg) {
  if (warnings) warnings->push_back(std::move(msg));
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// Child of `node` for a proposal, or nullopt when the proposal failed or
// the sandbox rejected it.
std::optional<std::size_t> materialize(SearchTree& tree, NodeId node, ActionType type, Oracle& oracle,
                                       SimulationCache& cache, std::vector<std::string>* warnings) {
  const ReasoningState& state = tree.node(node).state;
  OracleResponse r = cached_propose(cache, state, type, oracle);
  if (!r.ok()) {
    warn(warnings, "node " + std::to_string(node) + ": " + std::string(to_string(type)) +
                       " proposal failed: " + r.error);
    return std::nullopt;
  }
  Action action(std::move(*r.params));
  if (auto e = tree.find_edge(node, action)) return e;
  try {
    ReasoningState next = apply_action(state, action);
    return tree.add_child(node, std::move(action), std::move(next));
  } catch (const SandboxError& e) {
    warn(warnings, "node " + std::to_string(node) + ": " + std::string(to_string(type)) +
                       " rejected: " + e.what());
    return std::nullopt;
  }
}

bool better(double reward, std::size_t steps, const SearchResult& r) {
  if (!r.best) return true;
  if (reward != r.best_reward) return reward > r.best_reward;
  return steps < r.best->size();
}

}  // namespace

std::string_view to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::Self: return "self";
    case RewardMode::Exec: return "exec";
    case RewardMode::Hybrid: return "hybrid";
  }
  return "exec";
}

std::optional<RewardMode> parse_reward_mode(std::string_view name) {
  if (name == "self") return RewardMode::Self;
  if (name == "exec") return RewardMode::Exec;
  if (name == "hybrid") return RewardMode::Hybrid;
  return std::nullopt;
}

std::string_view to_string(UctValue mode) {
  return mode == UctValue::Cumulative ? "cumulative" : "mean";
}

std::optional<UctValue> parse_uct_value(std::string_view name) {
  if (name == "cumulative") return UctValue::Cumulative;
  if (name == "mean") return UctValue::Mean;
  return std::nullopt;
}

std::string_view to_string(RolloutEnd end) {
  switch (end) {
    case RolloutEnd::Termination: return "Termination";
    case RolloutEnd::DepthLimit: return "DepthLimit";
    case RolloutEnd::OracleFailure: return "OracleFailure";
    case RolloutEnd::DeadEnd: return "DeadEnd";
  }
  return "Termination";
}

void SearchConfig::validate() const {
  if (rollouts < 1) throw std::invalid_argument("rollouts must be at least 1");
  if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
  if (!(exploration_c > 0) || !std::isfinite(exploration_c)) {
    throw std::invalid_argument("exploration_c must be a positive number");
  }
  if (early_stop_k < 1) throw std::invalid_argument("early_stop_k must be at least 1");
}

double uct_score(double q, std::size_t n_v, std::size_t n_va, double c, UctValue mode) {
  const double exploration =
      c * std::sqrt(std::log(static_cast<double>(n_v)) / static_cast<double>(n_va));
  const double value = mode == UctValue::Cumulative ? q : q / static_cast<double>(n_va);
  return value + exploration;
}

std::optional<std::size_t> SearchNode::edge_of(ActionType type) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].action.type() == type) return i;
  }
  return std::nullopt;
}

SearchTree::SearchTree(ReasoningState root) {
  SearchNode n;
  n.id = 0;
  n.state = std::move(root);
  nodes_.push_back(std::move(n));
}

std::optional<std::size_t> SearchTree::find_edge(NodeId parent, const Action& action) const {
  const auto& edges = node(parent).edges;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].action == action) return i;
  }
  return std::nullopt;
}

std::size_t SearchTree::add_child(NodeId parent, Action action, ReasoningState child_state) {
  if (auto e = find_edge(parent, action)) return *e;
  SearchNode child;
  child.id = nodes_.size();
  child.state = std::move(child_state);
  child.parent = parent;
  const NodeId id = child.id;
  nodes_.push_back(std::move(child));

  auto& edges = nodes_[parent].edges;
  auto pos = std::upper_bound(edges.begin(), edges.end(), action.type(),
                              [](ActionType t, const Edge& e) { return t < e.action.type(); });
  auto it = edges.insert(pos, Edge{std::move(action), id});
  return static_cast<std::size_t>(it - edges.begin());
}

const OracleResponse* SimulationCache::find(const std::string& fingerprint) const {
  auto it = entries_.find(fingerprint);
  return it == entries_.end() ? nullptr : &it->second;
}

void SimulationCache::store(const std::string& fingerprint, OracleResponse response) {
  entries_.insert_or_assign(fingerprint, std::move(response));
}

OracleResponse cached_propose(SimulationCache& cache, const ReasoningState& state, ActionType type,
                              Oracle& oracle) {
  if (!cache.enabled()) {
    cache.count_miss();
    return oracle.propose(state, type);
  }
  const std::string fp = state_fingerprint(state, type);
  if (const OracleResponse* hit = cache.find(fp)) {
    cache.count_hit();
    return *hit;
  }
  cache.count_miss();
  OracleResponse r = oracle.propose(state, type);
  if (r.ok()) cache.store(fp, r);
  return r;
}

Selection select(const SearchTree& tree, const SearchConfig& config) {
  Selection s{tree.root(), {}};
  for (;;) {
    const SearchNode& n = tree.node(s.node);
    if (n.state.terminal || !n.expanded || n.dead || n.edges.empty() ||
        n.depth() >= static_cast<std::size_t>(config.max_depth)) {
      return s;
    }
    for (std::size_t i = 0; i < n.edges.size(); ++i) {
      if (n.edges[i].visits == 0) {
        s.path.push_back({s.node, i});
        s.node = n.edges[i].child;
        return s;
      }
    }
    std::size_t best = 0;
    double best_score = -1;
    for (std::size_t i = 0; i < n.edges.size(); ++i) {
      const Edge& e = n.edges[i];
      const double score = uct_score(e.q, n.visits, e.visits, config.exploration_c, config.uct);
      if (score > best_score) {
        best = i;
        best_score = score;
      }
    }
    s.path.push_back({s.node, best});
    s.node = n.edges[best].child;
  }
}

std::vector<NodeId> expand(SearchTree& tree, NodeId node, Oracle& oracle, SimulationCache& cache,
                           std::vector<std::string>* warnings) {
  if (!tree.node(node).expanded) {
    const auto types = valid_next(tree.node(node).state);
    for (ActionType t : types) {
      if (tree.node(node).edge_of(t)) continue;
      materialize(tree, node, t, oracle, cache, warnings);
    }
    SearchNode& n = tree.node(node);
    n.expanded = true;
    n.dead = n.edges.empty();
  }
  std::vector<NodeId> out;
  for (const auto& e : tree.node(node).edges) out.push_back(e.child);
  return out;
}

RolloutRecord simulate(SearchTree& tree, NodeId from, const std::vector<NodeId>& candidates,
                       Oracle& oracle, SimulationCache& cache, const SearchConfig& config,
                       std::mt19937_64& rng, std::vector<std::string>* warnings) {
  if (candidates.empty()) throw std::invalid_argument("simulate needs at least one candidate");
  RolloutRecord rec;
  const NodeId first = candidates[pick(rng, candidates.size())];
  const auto& edges = tree.node(from).edges;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].child == first) rec.path.push_back({from, i});
  }
  NodeId v = first;
  const auto max_depth = static_cast<std::size_t>(config.max_depth);
  for (;;) {
    const ReasoningState& s = tree.node(v).state;
    if (s.terminal) {
      rec.terminated_by = RolloutEnd::Termination;
      break;
    }
    if (s.depth() >= max_depth) {
      rec.terminated_by = RolloutEnd::DepthLimit;
      break;
    }
    const auto types = valid_next(s);
    if (types.empty()) {
      rec.terminated_by = RolloutEnd::DeadEnd;
      break;
    }
    const ActionType t = types[pick(rng, types.size())];
    auto e = materialize(tree, v, t, oracle, cache, warnings);
    if (!e) {
      rec.terminated_by = RolloutEnd::OracleFailure;
      rec.note = std::string(to_string(t)) + " proposal failed";
      break;
    }
    rec.path.push_back({v, *e});
    v = tree.node(v).edges[*e].child;
  }
  rec.leaf = v;
  rec.plan = tree.node(v).state.plan;
  return rec;
}

namespace {

// A judge that cannot be reached scores the plan 0, like an unparseable verdict.
double judge_or_zero(Oracle& oracle, const JudgeRequest& request) {
  try {
    return oracle.judge(request).score;
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace

double evaluate_reward(const ReasoningState& leaf, RewardMode mode, Oracle& oracle,
                       std::size_t* judge_calls) {
  if (!leaf.plan) return 0.0;
  const TaskContext& ctx = *leaf.context;
  std::shared_ptr<const Table> output = leaf.output;
  std::optional<ExecutionDiagnostics> diagnostics = leaf.diagnostics;
  if (mode != RewardMode::Self && !output && !diagnostics) {
    auto r = execute_plan(*leaf.plan, ctx.sources, ctx.executor);
    if (r.ok()) output = std::make_shared<const Table>(r.table());
    else diagnostics = r.diagnostics();
  }
  switch (mode) {
    case RewardMode::Exec:
      return output ? metric_cs(*output, ctx.target) : 0.0;
    case RewardMode::Self: {
      if (judge_calls) ++*judge_calls;
      return judge_or_zero(oracle, JudgeRequest{&ctx, &*leaf.plan, nullptr, nullptr});
    }
    case RewardMode::Hybrid: {
      std::optional<Table> preview;
      if (output) preview = sample_rows(*output, ctx.sample_rows).table;
      if (judge_calls) ++*judge_calls;
      return judge_or_zero(oracle, JudgeRequest{&ctx, &*leaf.plan, preview ? &*preview : nullptr,
                                                diagnostics ? &*diagnostics : nullptr});
    }
  }
  return 0.0;
}

void backpropagate(SearchTree& tree, const std::vector<PathStep>& path, NodeId leaf, double reward) {
  for (const auto& step : path) {
    SearchNode& n = tree.node(step.node);
    n.visits += 1;
    Edge& e = n.edges.at(step.edge);
    e.q += reward;
    e.visits += 1;
  }
  tree.node(leaf).visits += 1;
}

std::vector<TraceStep> describe_path(const SearchTree& tree, const std::vector<PathStep>& path) {
  std::vector<TraceStep> out;
  for (const auto& step : path) {
    const Edge& e = tree.node(step.node).edges.at(step.edge);
    out.push_back({step.node, e.child, e.action.type(), serialize_action_params(e.action.params())});
  }
  return out;
}

SearchResult run_search(std::shared_ptr<const TaskContext> context, const SearchConfig& config,
                        Oracle& oracle) {
  config.validate();
  SearchResult result(SearchTree(initial_state(std::move(context))));
  SearchTree& tree = result.tree;
  SimulationCache cache(config.cache_enabled);
  std::mt19937_64 rng(config.seed);
  const auto max_depth = static_cast<std::size_t>(config.max_depth);

  for (int i = 0; i < config.rollouts; ++i) {
    Selection sel = select(tree, config);
    RolloutRecord rec;
    const SearchNode& chosen = tree.node(sel.node);
    if (chosen.state.terminal) {
      rec.terminated_by = RolloutEnd::Termination;
      rec.leaf = sel.node;
    } else if (chosen.depth() >= max_depth) {
      rec.terminated_by = RolloutEnd::DepthLimit;
      rec.leaf = sel.node;
    } else {
      auto candidates = expand(tree, sel.node, oracle, cache, &result.warnings);
      if (candidates.empty()) {
        rec.terminated_by = RolloutEnd::DeadEnd;
        rec.leaf = sel.node;
      } else {
        rec = simulate(tree, sel.node, candidates, oracle, cache, config, rng, &result.warnings);
      }
    }
    rec.index = static_cast<std::size_t>(i);
    rec.path.insert(rec.path.begin(), sel.path.begin(), sel.path.end());
    rec.plan = tree.node(rec.leaf).state.plan;
    rec.reward = rec.terminated_by == RolloutEnd::OracleFailure
                     ? 0.0
                     : evaluate_reward(tree.node(rec.leaf).state, config.reward, oracle, &result.judge_calls);
    backpropagate(tree, rec.path, rec.leaf, rec.reward);

    if (rec.plan && better(rec.reward, rec.plan->size(), result)) {
      result.best = rec.plan;
      result.best_reward = rec.reward;
      result.best_rollout = rec.index;
    }
    const bool exact = rec.plan && rec.reward == 1.0;
    if (exact) result.found.push_back({*rec.plan, rec.reward, rec.index});
    result.trace.push_back(std::move(rec));
    if (config.early_stop && result.found.size() >= static_cast<std::size_t>(config.early_stop_k)) {
      result.stopped_early = true;
      break;
    }
  }
  result.cache_hits = cache.hits();
  result.cache_misses = cache.misses();
  result.oracle_calls = cache.misses();
  return result;
}

}  // namespace monteprep
