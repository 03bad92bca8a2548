#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "monteprep/oracle.h"
#include "monteprep/sandbox.h"

namespace monteprep {

enum class RewardMode { Self, Exec, Hybrid };
enum class UctValue { Cumulative, Mean };

std::string_view to_string(RewardMode mode);
std::optional<RewardMode> parse_reward_mode(std::string_view name);
std::string_view to_string(UctValue mode);
std::optional<UctValue> parse_uct_value(std::string_view name);

struct SearchConfig {
  int rollouts = 10;
  int max_depth = 5;
  double exploration_c = 1.0;
  int early_stop_k = 2;
  bool early_stop = true;
  RewardMode reward = RewardMode::Exec;
  UctValue uct = UctValue::Cumulative;
  bool cache_enabled = true;
  std::uint64_t seed = 7;

  /// Throws std::invalid_argument when a bound is violated.
  void validate() const;
};

/// Cumulative: Q + c*sqrt(ln N_v / N_va). Mean: Q/N_va + the same
/// exploration term. Requires N_v >= 1 and N_va >= 1.
double uct_score(double q, std::size_t n_v, std::size_t n_va, double c, UctValue mode);

using NodeId = std::size_t;

/// Outgoing action of a node with its statistics.
struct Edge {
  Action action;
  NodeId child;
  double q = 0.0;
  std::size_t visits = 0;
};

struct SearchNode {
  NodeId id = 0;
  ReasoningState state;
  std::optional<NodeId> parent;
  /// Sorted by action type, then creation order.
  std::vector<Edge> edges;
  std::size_t visits = 0;
  bool expanded = false;
  /// Expansion produced no children.
  bool dead = false;

  std::size_t depth() const { return state.depth(); }
  std::optional<std::size_t> edge_of(ActionType type) const;
};

class SearchTree {
 public:
  explicit SearchTree(ReasoningState root);

  NodeId root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const SearchNode& node(NodeId id) const { return nodes_.at(id); }
  SearchNode& node(NodeId id) { return nodes_.at(id); }

  /// Index of the edge labelled `action`, if present.
  std::optional<std::size_t> find_edge(NodeId parent, const Action& action) const;

  /// Returns the edge index for `action`, creating the child node holding
  /// `child_state` when the action is new.
  std::size_t add_child(NodeId parent, Action action, ReasoningState child_state);

 private:
  std::vector<SearchNode> nodes_;
};

/// One traversed edge: `edge` indexes node(node).edges.
struct PathStep {
  NodeId node;
  std::size_t edge;
};

struct Selection {
  NodeId node;
  std::vector<PathStep> path;
};

enum class RolloutEnd { Termination, DepthLimit, OracleFailure, DeadEnd };
std::string_view to_string(RolloutEnd end);

struct RolloutRecord {
  std::size_t index = 0;
  std::vector<PathStep> path;
  NodeId leaf = 0;
  std::optional<PipelinePlan> plan;
  double reward = 0.0;
  RolloutEnd terminated_by = RolloutEnd::Termination;
  std::string note;
};

/// Proposal responses keyed by state fingerprint (which includes the
/// requested action type).
class SimulationCache {
 public:
  explicit SimulationCache(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  const OracleResponse* find(const std::string& fingerprint) const;
  void store(const std::string& fingerprint, OracleResponse response);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  void count_hit() { ++hits_; }
  void count_miss() { ++misses_; }

 private:
  bool enabled_;
  std::unordered_map<std::string, OracleResponse> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Stored response on a fingerprint hit; otherwise asks the oracle and
/// stores successful responses. With the cache disabled every request goes
/// to the oracle and counts as a miss.
OracleResponse cached_propose(SimulationCache& cache, const ReasoningState& state, ActionType type,
                              Oracle& oracle);

/// Tree walk from the root. Any edge that has never been traversed is
/// taken first (lowest action type wins); otherwise the edge with the
/// highest UCT score. Stops at a node that is terminal, unexpanded, dead
/// or at the depth bound, or right after taking an unvisited edge.
Selection select(const SearchTree& tree, const SearchConfig& config);

/// Creates one child per admissible action type that has no child yet and
/// returns every child of the node. Idempotent. Failed proposals are
/// skipped with a warning; a node left without children is marked dead.
std::vector<NodeId> expand(SearchTree& tree, NodeId node, Oracle& oracle, SimulationCache& cache,
                           std::vector<std::string>* warnings = nullptr);

/// Random rollout: picks one candidate child of `from`, then samples
/// admissible actions uniformly until Termination or the depth bound,
/// adding the visited nodes to the tree. The returned record has no
/// reward yet.
RolloutRecord simulate(SearchTree& tree, NodeId from, const std::vector<NodeId>& candidates,
                       Oracle& oracle, SimulationCache& cache, const SearchConfig& config,
                       std::mt19937_64& rng, std::vector<std::string>* warnings = nullptr);

/// Reward of the plan held by `leaf`; 0 without a plan.
double evaluate_reward(const ReasoningState& leaf, RewardMode mode, Oracle& oracle,
                       std::size_t* judge_calls = nullptr);

/// Adds `reward` to every edge on the path and counts one visit for every
/// node on it, the leaf included.
void backpropagate(SearchTree& tree, const std::vector<PathStep>& path, NodeId leaf, double reward);

struct FoundPipeline {
  PipelinePlan plan;
  double reward;
  std::size_t rollout;
};

struct SearchResult {
  explicit SearchResult(SearchTree t) : tree(std::move(t)) {}

  std::optional<PipelinePlan> best;
  double best_reward = 0.0;
  std::optional<std::size_t> best_rollout;
  std::vector<FoundPipeline> found;
  std::vector<RolloutRecord> trace;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  /// Proposal requests that reached the oracle.
  std::size_t oracle_calls = 0;
  std::size_t judge_calls = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
  SearchTree tree;
};

/// Readable form of one traversed edge.
struct TraceStep {
  NodeId node;
  NodeId child;
  ActionType type;
  /// Canonical object-notation params.
  std::string params;
};

std::vector<TraceStep> describe_path(const SearchTree& tree, const std::vector<PathStep>& path);

/// Up to config.rollouts iterations of select, expand, simulate, evaluate
/// and backpropagate; stops once early_stop_k reward-1 plans were found
/// (when early stopping is on).
SearchResult run_search(std::shared_ptr<const TaskContext> context, const SearchConfig& config,
                        Oracle& oracle);

}  // namespace monteprep
