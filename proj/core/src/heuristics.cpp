#include "monteprep/heuristics.h"

#include <algorithm>
#include <cctype>
#include <map>

#include "monteprep/csv.h"
#include "monteprep/executor.h"
#include "monteprep/operators.h"

namespace monteprep::heuristics {

namespace {

const std::set<std::string>& aggregate_words() {
  static const std::set<std::string> words = {"total", "sum",   "avg",     "average", "mean",
                                              "count", "cnt",   "num",     "number",  "min",
                                              "minimum", "lowest", "max", "maximum", "highest"};
  return words;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double dice(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

std::set<std::string> token_set(std::string_view name) {
  auto t = name_tokens(name);
  return {t.begin(), t.end()};
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct SourceColumn {
  std::string table;
  std::string column;
};

std::vector<SourceColumn> all_source_columns(const TaskContext& ctx) {
  std::vector<SourceColumn> out;
  for (const auto& [name, t] : ctx.samples) {
    for (const auto& c : t.schema().names()) out.push_back({name, c});
  }
  return out;
}

std::set<std::string> source_column_names(const TaskContext& ctx) {
  std::set<std::string> out;
  for (const auto& sc : all_source_columns(ctx)) out.insert(sc.column);
  return out;
}

bool is_derived(const TargetColumn& t, const std::set<std::string>& available) {
  return aggregate_hint(t) || constant_hint(t) || expression_hint(t, available);
}

bool union_compatible(const TaskContext& ctx) {
  if (ctx.samples.size() < 2) return false;
  const auto first = schema_names(ctx.samples.begin()->second);
  return std::all_of(ctx.samples.begin(), ctx.samples.end(),
                     [&](const auto& kv) { return schema_names(kv.second) == first; });
}

bool any_shared_columns(const TaskContext& ctx) {
  for (auto a = ctx.samples.begin(); a != ctx.samples.end(); ++a) {
    const auto an = schema_names(a->second);
    for (auto b = std::next(a); b != ctx.samples.end(); ++b) {
      for (const auto& n : b->second.schema().names()) {
        if (an.count(n)) return true;
      }
    }
  }
  return false;
}

std::set<std::string> mapped_targets(const SchemaMappingParams& m) {
  std::set<std::string> out;
  for (const auto& e : m.entries) out.insert(trim(e.target_column));
  return out;
}

// Text columns whose sampled values name target columns; a sign that the
// values must become columns.
std::optional<std::string> pivot_column(const Table& sample, const std::vector<std::string>& wanted) {
  for (std::size_t c = 0; c < sample.column_count(); ++c) {
    if (sample.schema()[c].dtype != DType::Text) continue;
    for (const auto& row : sample.rows()) {
      if (!row[c].is_null() && contains(wanted, row[c].render())) return sample.schema()[c].name;
    }
  }
  return std::nullopt;
}

std::size_t count_entries_for(const SchemaMappingParams& m, const std::string& table) {
  return static_cast<std::size_t>(std::count_if(m.entries.begin(), m.entries.end(),
                                                 [&](const MappingEntry& e) { return e.source_table == table; }));
}

std::string base_table(const TaskContext& ctx, const SchemaMappingParams& m) {
  std::string best = ctx.samples.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [name, _] : ctx.samples) {
    auto n = count_entries_for(m, name);
    if (n > best_n) {
      best = name;
      best_n = n;
    }
  }
  return best;
}

// Accumulates steps while tracking the schema they produce on the samples.
// A step that fails on the samples is not kept.
class PlanBuilder {
 public:
  PlanBuilder(const TaskContext& ctx, std::string base) : ctx_(ctx), current_name_(std::move(base)) {
    current_ = ctx_.samples.at(current_name_);
  }

  bool add(OperatorParams params) {
    PipelineStep step{std::move(params), std::nullopt, "t" + std::to_string(steps_.size() + 1)};
    if (!reads_named_tables(step.op())) step.input = current_name_;
    auto trial = steps_;
    trial.push_back(step);
    if (trial.size() > ctx_.limits.max_steps) return false;
    auto result = execute_plan(PipelinePlan(trial, "", ctx_.limits.max_steps), ctx_.samples, ctx_.executor);
    if (!result.ok()) return false;
    steps_ = std::move(trial);
    current_ = result.table();
    current_name_ = step.output_name;
    return true;
  }

  const Table& current() const { return current_; }
  const std::string& current_name() const { return current_name_; }
  std::vector<std::string> names() const { return current_.schema().names(); }
  bool has(const std::string& column) const { return current_.schema().contains(column); }
  bool empty() const { return steps_.empty(); }

  std::optional<PipelinePlan> finish() {
    if (steps_.empty() && !add(DropColumnsParams{})) return std::nullopt;
    return PipelinePlan(steps_, "", ctx_.limits.max_steps);
  }

 private:
  const TaskContext& ctx_;
  std::vector<PipelineStep> steps_;
  Table current_;
  std::string current_name_;
};

std::optional<std::string> measure_column(const Table& t, const std::vector<std::string>& keys,
                                          const std::string& target) {
  std::set<std::string> want;
  for (const auto& tok : name_tokens(target)) {
    if (!aggregate_words().count(tok)) want.insert(tok);
  }
  std::optional<std::string> best;
  double best_score = -1;
  for (const auto& c : t.schema().columns()) {
    if (!is_numeric(c.dtype) || contains(keys, c.name)) continue;
    double s = dice(want, token_set(c.name));
    if (s > best_score) {
      best = c.name;
      best_score = s;
    }
  }
  return best;
}

void add_groupby(PlanBuilder& b, const TargetSchema& target) {
  GroupByParams g;
  std::set<std::string> agg_targets;
  for (const auto& t : target.columns()) {
    if (!b.has(t.name) && aggregate_hint(t)) agg_targets.insert(t.name);
  }
  for (const auto& t : target.columns()) {
    if (b.has(t.name) && !agg_targets.count(t.name)) g.keys.push_back(t.name);
  }
  for (const auto& t : target.columns()) {
    if (!agg_targets.count(t.name)) continue;
    AggFn fn = *aggregate_hint(t);
    auto col = measure_column(b.current(), g.keys, t.name);
    if (!col && fn == AggFn::Count && !g.keys.empty()) col = g.keys.front();
    if (!col) continue;
    g.aggs.push_back({*col, fn, t.name});
  }
  if (g.aggs.empty()) return;
  b.add(std::move(g));
}

bool add_pivot(PlanBuilder& b, const TargetSchema& target) {
  std::vector<std::string> missing;
  std::vector<std::string> index;
  for (const auto& n : target.names()) (b.has(n) ? index : missing).push_back(n);
  auto pcol = pivot_column(b.current(), missing);
  if (!pcol) return false;
  std::erase(index, *pcol);
  for (const auto& c : b.current().schema().columns()) {
    if (c.name == *pcol || contains(index, c.name) || !is_numeric(c.dtype)) continue;
    return b.add(PivotParams{index, *pcol, c.name, AggFn::Sum});
  }
  return false;
}

bool add_unpivot(PlanBuilder& b, const TargetSchema& target, const std::set<std::string>& available) {
  std::vector<std::string> ids;
  std::vector<std::string> rest;
  for (const auto& t : target.columns()) {
    if (b.has(t.name)) ids.push_back(t.name);
    else if (!is_derived(t, available)) rest.push_back(t.name);
  }
  if (rest.size() < 2) return false;
  std::vector<std::string> drop;
  for (const auto& c : b.current().schema().columns()) {
    if (!contains(ids, c.name) && !is_numeric(c.dtype)) drop.push_back(c.name);
  }
  if (!drop.empty() && !b.add(DropColumnsParams{drop})) return false;
  return b.add(UnpivotParams{ids, rest[0], rest[1]});
}

// Column names an operator reads from its single input.
std::vector<std::string> referenced_columns(const OperatorParams& params) {
  std::vector<std::string> out;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GroupByParams>) {
          out = p.keys;
          for (const auto& a : p.aggs) out.push_back(a.column);
        } else if constexpr (std::is_same_v<P, PivotParams>) {
          out = p.index;
          out.push_back(p.pivot_col);
          out.push_back(p.value_col);
        } else if constexpr (std::is_same_v<P, UnpivotParams>) {
          out = p.id_cols;
        } else if constexpr (std::is_same_v<P, DropColumnsParams>) {
          out = p.names;
        } else if constexpr (std::is_same_v<P, RenameParams>) {
          for (const auto& [from, _] : p.mapping) out.push_back(from);
        } else if constexpr (std::is_same_v<P, ColumnArithmeticParams>) {
          out = p.expression.columns();
        } else if constexpr (std::is_same_v<P, DateFormattingParams>) {
          out.push_back(p.column);
        }
      },
      params);
  return out;
}

Expression substitute(const Expression& e, const std::map<std::string, std::string>& subst) {
  switch (e.kind()) {
    case Expression::Kind::Column: {
      auto it = subst.find(e.column_name());
      return Expression::column(it == subst.end() ? e.column_name() : it->second);
    }
    case Expression::Kind::Literal:
      return e;
    case Expression::Kind::Negate:
      return Expression::negate(substitute(e.operand(), subst));
    case Expression::Kind::Binary:
      return Expression::binary(e.op(), substitute(e.lhs(), subst), substitute(e.rhs(), subst));
  }
  return e;
}

void substitute_columns(OperatorParams& params, const std::map<std::string, std::string>& subst) {
  auto fix = [&](std::string& s) {
    if (auto it = subst.find(s); it != subst.end()) s = it->second;
  };
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GroupByParams>) {
          for (auto& k : p.keys) fix(k);
          for (auto& a : p.aggs) fix(a.column);
        } else if constexpr (std::is_same_v<P, PivotParams>) {
          for (auto& k : p.index) fix(k);
          fix(p.pivot_col);
          fix(p.value_col);
        } else if constexpr (std::is_same_v<P, UnpivotParams>) {
          for (auto& k : p.id_cols) fix(k);
        } else if constexpr (std::is_same_v<P, DropColumnsParams>) {
          for (auto& k : p.names) fix(k);
        } else if constexpr (std::is_same_v<P, RenameParams>) {
          for (auto& kv : p.mapping) fix(kv.first);
        } else if constexpr (std::is_same_v<P, ColumnArithmeticParams>) {
          p.expression = substitute(p.expression, subst);
        } else if constexpr (std::is_same_v<P, DateFormattingParams>) {
          fix(p.column);
        }
      },
      params);
}

// Pass-through step that keeps the failing step's input and output binding.
PipelineStep neutralised(const PipelinePlan& plan, std::size_t k, const std::vector<std::string>& sources) {
  const PipelineStep& s = plan.steps()[k];
  std::optional<std::string> input;
  if (const auto* j = std::get_if<JoinParams>(&s.params)) {
    input = j->left;
  } else if (const auto* u = std::get_if<UnionParams>(&s.params)) {
    if (!u->tables.empty()) input = u->tables.front();
  } else {
    input = resolve_input(plan, k, sources);
  }
  return PipelineStep{DropColumnsParams{}, input, s.output_name};
}

std::optional<Table> input_sample(const TaskContext& ctx, const PipelinePlan& plan, std::size_t k) {
  auto ref = resolve_input(plan, k, ctx.source_names());
  if (!ref) return std::nullopt;
  if (k == 0) {
    auto it = ctx.samples.find(*ref);
    if (it == ctx.samples.end()) return std::nullopt;
    return it->second;
  }
  std::vector<PipelineStep> prefix(plan.steps().begin(), plan.steps().begin() + static_cast<std::ptrdiff_t>(k));
  auto result = execute_plan(PipelinePlan(prefix, *ref, ctx.limits.max_steps), ctx.samples, ctx.executor);
  if (!result.ok()) return std::nullopt;
  return result.table();
}

std::optional<PipelinePlan> with_steps(const PipelinePlan& plan, std::vector<PipelineStep> steps,
                                       std::size_t max_steps) {
  if (steps.empty() || steps.size() > max_steps) return std::nullopt;
  // Appended steps rebind the result, so the final output follows them.
  std::string final_output =
      steps.size() == plan.size() ? plan.final_output() : steps.back().output_name;
  return PipelinePlan(std::move(steps), final_output, max_steps);
}

std::string fresh_name(const PipelinePlan& plan, std::size_t extra) {
  std::set<std::string> used;
  for (const auto& s : plan.steps()) used.insert(s.output_name);
  for (std::size_t i = plan.size() + 1 + extra;; ++i) {
    std::string n = "t" + std::to_string(i);
    if (!used.count(n)) return n;
  }
}

}  // namespace

std::vector<std::string> name_tokens(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(lower(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(name[i]);
    if (!std::isalnum(c)) {
      flush();
      continue;
    }
    if (std::isupper(c) && !cur.empty()) {
      const bool prev_lower = std::islower(static_cast<unsigned char>(cur.back()));
      const bool next_lower = i + 1 < name.size() && std::islower(static_cast<unsigned char>(name[i + 1]));
      if (prev_lower || (std::isupper(static_cast<unsigned char>(cur.back())) && next_lower)) flush();
    }
    cur.push_back(static_cast<char>(c));
  }
  flush();
  return out;
}

double name_similarity(std::string_view a, std::string_view b) { return dice(token_set(a), token_set(b)); }

std::optional<AggFn> aggregate_hint(const TargetColumn& column) {
  for (const auto& t : name_tokens(column.name)) {
    if (t == "total" || t == "sum") return AggFn::Sum;
    if (t == "avg" || t == "average" || t == "mean") return AggFn::Mean;
    if (t == "count" || t == "cnt" || t == "num" || t == "number") return AggFn::Count;
    if (t == "min" || t == "minimum" || t == "lowest") return AggFn::Min;
    if (t == "max" || t == "maximum" || t == "highest") return AggFn::Max;
  }
  return std::nullopt;
}

std::optional<CellValue> constant_hint(const TargetColumn& column) {
  const std::string d = lower(column.description);
  const auto pos = d.find("constant");
  if (pos == std::string::npos) return std::nullopt;
  std::string raw = trim(std::string_view(column.description).substr(pos + 8));
  while (!raw.empty() && (raw.front() == ':' || raw.front() == '=')) raw = trim(raw.substr(1));
  if (raw.size() >= 2 && (raw.front() == '"' || raw.front() == '\'') && raw.back() == raw.front()) {
    return CellValue::text(raw.substr(1, raw.size() - 2));
  }
  if (raw.empty()) return std::nullopt;
  return parse_cell(raw, DType::Any);
}

std::optional<Expression> expression_hint(const TargetColumn& column,
                                          const std::set<std::string>& available) {
  std::vector<std::string> candidates = {column.description};
  for (char sep : {'=', ':'}) {
    auto p = column.description.rfind(sep);
    if (p != std::string::npos) candidates.push_back(column.description.substr(p + 1));
  }
  for (const auto& text : candidates) {
    if (trim(text).empty()) continue;
    try {
      Expression e = parse_expression(text);
      if (e.kind() != Expression::Kind::Binary) continue;
      auto cols = e.columns();
      if (cols.empty()) continue;
      if (std::all_of(cols.begin(), cols.end(), [&](const std::string& c) { return available.count(c); })) {
        return e;
      }
    } catch (const ExpressionSyntaxError&) {
    }
  }
  return std::nullopt;
}

std::optional<std::string> date_format_of(const Table& sample, std::string_view column) {
  auto idx = sample.schema().index_of(column);
  if (!idx || sample.schema()[*idx].dtype != DType::Text) return std::nullopt;
  std::optional<std::string> fmt;
  for (const auto& row : sample.rows()) {
    const CellValue& v = row[*idx];
    if (v.is_null()) continue;
    const std::string text = v.as_text();
    if (!fmt) {
      fmt = detect_date_format(text);
      if (!fmt) return std::nullopt;
    }
    if (!parse_date_with_format(text, *fmt)) return std::nullopt;
  }
  if (!fmt || *fmt == "yyyy-mm-dd") return std::nullopt;
  return fmt;
}

SchemaMappingParams propose_mapping(const TaskContext& ctx, bool use_similarity) {
  const auto columns = all_source_columns(ctx);
  const auto available = source_column_names(ctx);
  const auto& targets = ctx.target.columns();
  std::vector<std::optional<MappingEntry>> chosen(targets.size());
  std::vector<bool> used(columns.size(), false);

  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t s = 0; s < columns.size(); ++s) {
      if (!used[s] && columns[s].column == targets[t].name) {
        chosen[t] = MappingEntry{columns[s].table, columns[s].column, targets[t].name, "same name"};
        used[s] = true;
        break;
      }
    }
  }

  if (use_similarity) {
    const auto target_names = ctx.target.names();
    struct Candidate {
      double score;
      std::size_t t;
      std::size_t s;
    };
    std::vector<Candidate> cands;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (chosen[t] || is_derived(targets[t], available)) continue;
      for (std::size_t s = 0; s < columns.size(); ++s) {
        if (used[s] || contains(target_names, columns[s].column)) continue;
        double score = name_similarity(targets[t].name, columns[s].column);
        if (score >= kSimilarityThreshold) cands.push_back({score, t, s});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.t != b.t) return a.t < b.t;
      return a.s < b.s;
    });
    for (const auto& c : cands) {
      if (chosen[c.t] || used[c.s]) continue;
      chosen[c.t] = MappingEntry{columns[c.s].table, columns[c.s].column, targets[c.t].name,
                                 "similar name (" + format_double(c.score) + ")"};
      used[c.s] = true;
    }
  }

  SchemaMappingParams out;
  for (auto& e : chosen) {
    if (e) out.entries.push_back(std::move(*e));
  }
  return out;
}

OperatorDiscoveryParams discover_operators(const TaskContext& ctx, const SchemaMappingParams* mapping) {
  SchemaMappingParams computed;
  if (!mapping) {
    computed = propose_mapping(ctx, true);
    mapping = &computed;
  }
  const auto available = source_column_names(ctx);
  const auto matched = mapped_targets(*mapping);
  std::vector<TargetColumn> unmatched;
  for (const auto& t : ctx.target.columns()) {
    if (!matched.count(t.name)) unmatched.push_back(t);
  }
  std::vector<std::string> unmatched_names;
  for (const auto& t : unmatched) unmatched_names.push_back(t.name);

  OperatorDiscoveryParams out;
  auto add = [&](OperatorKind k, std::string note) { out.operators.push_back({k, std::move(note)}); };

  const bool unionable = union_compatible(ctx);
  if (unionable) add(OperatorKind::Union, "sources share one schema");
  if (!unionable && ctx.samples.size() >= 2 && any_shared_columns(ctx)) {
    add(OperatorKind::Join, "sources share key columns");
  }
  for (const auto& e : mapping->entries) {
    if (date_format_of(ctx.samples.at(e.source_table), e.source_column)) {
      add(OperatorKind::DateFormatting, "'" + e.source_column + "' holds non-ISO dates");
      break;
    }
  }
  for (const auto& t : unmatched) {
    if (expression_hint(t, available)) {
      add(OperatorKind::ColumnArithmetic, "'" + t.name + "' is computed from source columns");
      break;
    }
  }
  for (const auto& t : unmatched) {
    if (constant_hint(t)) {
      add(OperatorKind::AddColumn, "'" + t.name + "' is a constant");
      break;
    }
  }
  for (const auto& e : mapping->entries) {
    if (e.source_column != e.target_column) {
      add(OperatorKind::Rename, "'" + e.source_column + "' becomes '" + e.target_column + "'");
      break;
    }
  }
  bool reshaped = false;
  for (const auto& t : unmatched) {
    if (aggregate_hint(t)) {
      add(OperatorKind::GroupBy, "'" + t.name + "' is an aggregate");
      reshaped = true;
      break;
    }
  }
  for (const auto& [name, sample] : ctx.samples) {
    if (auto col = pivot_column(sample, unmatched_names)) {
      add(OperatorKind::Pivot, "values of '" + *col + "' name target columns");
      reshaped = true;
      break;
    }
  }
  if (!reshaped) {
    std::size_t plain_targets = 0;
    for (const auto& t : unmatched) plain_targets += is_derived(t, available) ? 0 : 1;
    std::size_t numeric_unmapped = 0;
    for (const auto& [name, sample] : ctx.samples) {
      for (const auto& c : sample.schema().columns()) {
        const bool mapped = std::any_of(mapping->entries.begin(), mapping->entries.end(), [&](const MappingEntry& e) {
          return e.source_table == name && e.source_column == c.name;
        });
        if (!mapped && is_numeric(c.dtype)) ++numeric_unmapped;
      }
    }
    if (plain_targets >= 2 && numeric_unmapped >= 2) {
      add(OperatorKind::Unpivot, "several value columns collapse into name/value pairs");
    }
  }
  for (const auto& sc : all_source_columns(ctx)) {
    const bool mapped = std::any_of(mapping->entries.begin(), mapping->entries.end(), [&](const MappingEntry& e) {
      return e.source_table == sc.table && e.source_column == sc.column;
    });
    if (!mapped) {
      add(OperatorKind::DropColumns, "some source columns have no target");
      break;
    }
  }
  return out;
}

std::optional<PipelinePlan> synthesize_plan(const TaskContext& ctx, const SchemaMappingParams* mapping,
                                            const OperatorDiscoveryParams* ops) {
  SchemaMappingParams m = mapping ? *mapping : propose_mapping(ctx, false);
  OperatorDiscoveryParams o;
  if (ops) {
    o = *ops;
  } else {
    // Without a discovery step only structural operators are assumed.
    if (union_compatible(ctx)) o.operators.push_back({OperatorKind::Union, {}});
    else if (ctx.samples.size() >= 2 && any_shared_columns(ctx)) o.operators.push_back({OperatorKind::Join, {}});
    o.operators.push_back({OperatorKind::DropColumns, {}});
  }
  if (!mapping && o.contains(OperatorKind::Rename)) m = propose_mapping(ctx, true);

  const auto available = source_column_names(ctx);
  const auto& target = ctx.target;

  std::string base = base_table(ctx, m);
  PlanBuilder b(ctx, base);
  if (o.contains(OperatorKind::Union) && union_compatible(ctx)) {
    b.add(UnionParams{ctx.source_names()});
  } else if (o.contains(OperatorKind::Join) && ctx.samples.size() >= 2) {
    std::vector<std::string> remaining;
    for (const auto& n : ctx.source_names()) {
      if (n != base) remaining.push_back(n);
    }
    bool progress = true;
    while (progress) {
      progress = false;
      for (auto it = remaining.begin(); it != remaining.end(); ++it) {
        JoinParams j{b.current_name(), *it, {}, JoinHow::Inner};
        for (const auto& c : ctx.samples.at(*it).schema().names()) {
          if (b.has(c)) j.on.emplace_back(c, c);
        }
        if (j.on.empty()) continue;
        b.add(std::move(j));
        remaining.erase(it);
        progress = true;
        break;
      }
    }
  }

  for (const auto& e : m.entries) {
    if (!b.has(e.source_column)) continue;
    if (auto fmt = date_format_of(b.current(), e.source_column)) {
      b.add(DateFormattingParams{e.source_column, *fmt, "yyyy-mm-dd"});
    }
  }

  const auto matched = mapped_targets(m);
  if (o.contains(OperatorKind::ColumnArithmetic)) {
    for (const auto& t : target.columns()) {
      if (matched.count(t.name) || b.has(t.name)) continue;
      auto names = b.names();
      if (auto e = expression_hint(t, {names.begin(), names.end()})) {
        b.add(ColumnArithmeticParams{t.name, *e});
      }
    }
  }
  if (o.contains(OperatorKind::AddColumn)) {
    for (const auto& t : target.columns()) {
      if (matched.count(t.name) || b.has(t.name)) continue;
      if (auto v = constant_hint(t)) b.add(AddColumnParams{t.name, *v});
    }
  }

  RenameParams rename;
  for (const auto& e : m.entries) {
    if (e.source_column != e.target_column && b.has(e.source_column) && !b.has(e.target_column)) {
      rename.mapping.emplace_back(e.source_column, e.target_column);
    }
  }
  if (!rename.mapping.empty()) b.add(std::move(rename));

  bool reshaped = false;
  if (o.contains(OperatorKind::GroupBy)) {
    const bool before = b.empty();
    const auto n_before = b.names();
    add_groupby(b, target);
    reshaped = before != b.empty() || n_before != b.names();
  }
  if (!reshaped && o.contains(OperatorKind::Pivot)) reshaped = add_pivot(b, target);
  if (!reshaped && o.contains(OperatorKind::Unpivot)) add_unpivot(b, target, available);

  std::vector<std::string> extras;
  for (const auto& n : b.names()) {
    if (!target.contains(n)) extras.push_back(n);
  }
  if (!extras.empty()) b.add(DropColumnsParams{extras});
  return b.finish();
}

std::optional<PipelinePlan> refine_plan(const ReasoningState& state) {
  if (!state.plan) return std::nullopt;
  const TaskContext& ctx = *state.context;
  const PipelinePlan& plan = *state.plan;
  const auto sources = ctx.source_names();
  std::vector<PipelineStep> steps = plan.steps();

  if (state.diagnostics) {
    const auto& d = *state.diagnostics;
    if (!d.failed_step || *d.failed_step >= steps.size()) return std::nullopt;
    const std::size_t k = *d.failed_step;
    bool patched = false;
    if (d.error_kind == ErrorKind::MissingColumn && !reads_named_tables(steps[k].op())) {
      if (auto in = input_sample(ctx, plan, k)) {
        std::map<std::string, std::string> subst;
        bool all_found = true;
        for (const auto& c : referenced_columns(steps[k].params)) {
          if (in->schema().contains(c) || subst.count(c)) continue;
          std::optional<std::string> best;
          double best_score = kSimilarityThreshold;
          for (const auto& n : in->schema().names()) {
            double s = name_similarity(c, n);
            if (s >= best_score && (!best || s > best_score)) {
              best = n;
              best_score = s;
            }
          }
          if (!best) {
            all_found = false;
            break;
          }
          subst[c] = *best;
        }
        if (all_found && !subst.empty()) {
          substitute_columns(steps[k].params, subst);
          patched = true;
        }
      }
    }
    if (!patched) steps[k] = neutralised(plan, k, sources);
    return with_steps(plan, std::move(steps), ctx.limits.max_steps);
  }

  std::optional<Table> out;
  if (state.output) {
    out = *state.output;
  } else {
    auto r = execute_plan(plan, ctx.samples, ctx.executor);
    if (!r.ok()) return std::nullopt;
    out = r.table();
  }
  const auto names = out->schema().names();
  std::vector<std::string> missing;
  for (const auto& t : ctx.target.names()) {
    if (!contains(names, t)) missing.push_back(t);
  }
  std::vector<std::string> extras;
  for (const auto& n : names) {
    if (!ctx.target.contains(n)) extras.push_back(n);
  }

  RenameParams rename;
  for (const auto& t : missing) {
    std::optional<std::string> best;
    double best_score = kSimilarityThreshold;
    for (const auto& c : extras) {
      double s = name_similarity(t, c);
      if (s >= best_score && (!best || s > best_score)) {
        best = c;
        best_score = s;
      }
    }
    if (best) {
      rename.mapping.emplace_back(*best, t);
      std::erase(extras, *best);
    }
  }
  std::string current = plan.final_output();
  if (!rename.mapping.empty()) {
    std::string out_name = fresh_name(plan, 0);
    steps.push_back(PipelineStep{std::move(rename), current, out_name});
    current = out_name;
  }
  if (!extras.empty()) {
    steps.push_back(PipelineStep{DropColumnsParams{extras}, current, fresh_name(plan, steps.size() - plan.size())});
  }
  return with_steps(plan, std::move(steps), ctx.limits.max_steps);
}

double judge_score(const TaskContext& ctx, const PipelinePlan& plan, const Table* preview) {
  std::optional<Table> out;
  if (preview) {
    out = *preview;
  } else {
    auto r = execute_plan(plan, ctx.samples, ctx.executor);
    if (!r.ok()) return 0.0;
    out = r.table();
  }
  const auto names = schema_names(*out);
  std::size_t hit = 0;
  for (const auto& t : ctx.target.names()) hit += names.count(t);
  const double coverage = static_cast<double>(hit) / static_cast<double>(ctx.target.size());
  if (coverage >= 0.99) return 1.0;
  if (coverage >= 0.5) return 0.5;
  return 0.0;
}

}  // namespace monteprep::heuristics
