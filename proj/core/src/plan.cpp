#include "monteprep/plan.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>

namespace monteprep {

namespace {

constexpr std::array<std::string_view, kOperatorKindCount> kOperatorNames = {
    "Join",    "GroupBy",     "Pivot",  "Unpivot",          "Union",
    "AddColumn", "DropColumns", "Rename", "ColumnArithmetic", "DateFormatting"};

}  // namespace

std::string_view to_string(OperatorKind kind) {
  return kOperatorNames[static_cast<std::size_t>(kind)];
}

std::optional<OperatorKind> parse_operator_kind(std::string_view name) {
  for (std::size_t i = 0; i < kOperatorNames.size(); ++i) {
    if (kOperatorNames[i] == name) return static_cast<OperatorKind>(i);
  }
  return std::nullopt;
}

const std::vector<OperatorKind>& all_operator_kinds() {
  static const std::vector<OperatorKind> kinds = [] {
    std::vector<OperatorKind> v;
    for (std::size_t i = 0; i < kOperatorKindCount; ++i) v.push_back(static_cast<OperatorKind>(i));
    return v;
  }();
  return kinds;
}

std::string_view to_string(AggFn fn) {
  switch (fn) {
    case AggFn::Sum: return "sum";
    case AggFn::Mean: return "mean";
    case AggFn::Count: return "count";
    case AggFn::Min: return "min";
    case AggFn::Max: return "max";
  }
  return "?";
}

std::optional<AggFn> parse_agg_fn(std::string_view name) {
  for (AggFn f : {AggFn::Sum, AggFn::Mean, AggFn::Count, AggFn::Min, AggFn::Max}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

bool reads_named_tables(OperatorKind kind) {
  return kind == OperatorKind::Join || kind == OperatorKind::Union;
}

std::string_view to_string(PlanError::Kind kind) {
  switch (kind) {
    case PlanError::Kind::Syntax: return "syntax";
    case PlanError::Kind::UnknownOperator: return "unknown-operator";
    case PlanError::Kind::InvalidParams: return "invalid-params";
    case PlanError::Kind::DanglingRef: return "dangling-ref";
    case PlanError::Kind::StepCount: return "step-count";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Expression

Expression Expression::column(std::string name) {
  Expression e;
  e.kind_ = Kind::Column;
  e.column_ = std::move(name);
  return e;
}

Expression Expression::literal(CellValue number) {
  Expression e;
  e.kind_ = Kind::Literal;
  e.literal_ = std::move(number);
  return e;
}

Expression Expression::negate(Expression operand) {
  Expression e;
  e.kind_ = Kind::Negate;
  e.lhs_ = std::make_shared<const Expression>(std::move(operand));
  return e;
}

Expression Expression::binary(char op, Expression lhs, Expression rhs) {
  Expression e;
  e.kind_ = Kind::Binary;
  e.op_ = op;
  e.lhs_ = std::make_shared<const Expression>(std::move(lhs));
  e.rhs_ = std::make_shared<const Expression>(std::move(rhs));
  return e;
}

std::vector<std::string> Expression::columns() const {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const Expression& e) -> void {
    switch (e.kind_) {
      case Kind::Column:
        if (std::find(out.begin(), out.end(), e.column_) == out.end()) out.push_back(e.column_);
        break;
      case Kind::Literal: break;
      case Kind::Negate: self(self, *e.lhs_); break;
      case Kind::Binary:
        self(self, *e.lhs_);
        self(self, *e.rhs_);
        break;
    }
  };
  walk(walk, *this);
  return out;
}

namespace {

int precedence(char op) { return (op == '+' || op == '-') ? 1 : 2; }

bool plain_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

std::string render(const Expression& e, int parent_prec, bool right_side) {
  switch (e.kind()) {
    case Expression::Kind::Column:
      return plain_identifier(e.column_name()) ? e.column_name() : "`" + e.column_name() + "`";
    case Expression::Kind::Literal: {
      std::string s = e.literal_value().render();
      if (e.literal_value().kind() == CellKind::Float && s.find_first_of(".eEn") == std::string::npos) {
        s += ".0";
      }
      return s;
    }
    case Expression::Kind::Negate: return "-" + render(e.operand(), 3, false);
    case Expression::Kind::Binary: {
      int p = precedence(e.op());
      std::string s = render(e.lhs(), p, false) + " " + e.op() + " " + render(e.rhs(), p, true);
      bool wrap = p < parent_prec || (right_side && p == parent_prec);
      return wrap ? "(" + s + ")" : s;
    }
  }
  return {};
}

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression parse() {
    Expression e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionSyntaxError(what + " at position " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  Expression parse_sum() {
    Expression lhs = parse_product();
    for (;;) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        char op = text_[pos_++];
        lhs = Expression::binary(op, std::move(lhs), parse_product());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_product() {
    Expression lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
        char op = text_[pos_++];
        lhs = Expression::binary(op, std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      return Expression::negate(parse_unary());
    }
    if (pos_ < text_.size() && text_[pos_] == '+') {
      ++pos_;
      return parse_unary();
    }
    return parse_primary();
  }

  Expression parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = parse_sum();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return inner;
    }
    if (c == '`') {
      auto close = text_.find('`', pos_ + 1);
      if (close == std::string_view::npos) fail("unterminated quoted column name");
      std::string name(text_.substr(pos_ + 1, close - pos_ - 1));
      if (name.empty()) fail("empty column name");
      pos_ = close + 1;
      return Expression::column(std::move(name));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '_' || text_[pos_] == '.')) {
        ++pos_;
      }
      return Expression::column(std::string(text_.substr(start, pos_ - start)));
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expression parse_number() {
    std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      is_float = true;
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      is_float = true;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    std::string_view tok = text_.substr(start, pos_ - start);
    if (is_float) {
      double v = 0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) fail("malformed number");
      return Expression::literal(CellValue::floating(v));
    }
    std::int64_t v = 0;
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) fail("malformed integer");
    return Expression::literal(CellValue::integer(v));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Expression::to_string() const { return render(*this, 0, false); }

bool operator==(const Expression& a, const Expression& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Expression::Kind::Column: return a.column_ == b.column_;
    case Expression::Kind::Literal: return a.literal_ == b.literal_;
    case Expression::Kind::Negate: return *a.lhs_ == *b.lhs_;
    case Expression::Kind::Binary:
      return a.op_ == b.op_ && *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
  }
  return false;
}

Expression parse_expression(std::string_view text) { return ExpressionParser(text).parse(); }

// ---------------------------------------------------------------------------
// PipelinePlan

PipelinePlan::PipelinePlan(std::vector<PipelineStep> steps, std::string final_output,
                           std::size_t max_steps)
    : steps_(std::move(steps)), final_output_(std::move(final_output)) {
  if (steps_.empty()) {
    throw PlanError(PlanError::Kind::StepCount, "a plan needs at least one step", "steps");
  }
  if (steps_.size() > max_steps) {
    throw PlanError(PlanError::Kind::StepCount,
                    "plan has " + std::to_string(steps_.size()) + " steps, limit is " +
                        std::to_string(max_steps),
                    "steps");
  }
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i].output_name.empty()) {
      throw PlanError(PlanError::Kind::InvalidParams, "step output_name must not be empty",
                      "steps[" + std::to_string(i) + "].output_name", i);
    }
  }
  if (final_output_.empty()) final_output_ = steps_.back().output_name;
}

std::optional<std::string> resolve_input(const PipelinePlan& plan, std::size_t step,
                                         const std::vector<std::string>& source_names) {
  const auto& s = plan.steps()[step];
  if (s.input) return s.input;
  if (step > 0) return plan.steps()[step - 1].output_name;
  if (source_names.size() == 1) return source_names.front();
  return std::nullopt;
}

void validate_refs(const PipelinePlan& plan, const std::vector<std::string>& source_names) {
  std::set<std::string> bound(source_names.begin(), source_names.end());
  auto require = [&](const std::string& ref, std::size_t i, const std::string& field) {
    if (!bound.contains(ref)) {
      throw PlanError(PlanError::Kind::DanglingRef,
                      "step " + std::to_string(i + 1) + " reads undefined table '" + ref + "'",
                      "steps[" + std::to_string(i) + "]." + field, i);
    }
  };
  for (std::size_t i = 0; i < plan.steps().size(); ++i) {
    const auto& step = plan.steps()[i];
    if (const auto* j = std::get_if<JoinParams>(&step.params)) {
      require(j->left, i, "params.left");
      require(j->right, i, "params.right");
    } else if (const auto* u = std::get_if<UnionParams>(&step.params)) {
      for (std::size_t k = 0; k < u->tables.size(); ++k) {
        require(u->tables[k], i, "params.tables[" + std::to_string(k) + "]");
      }
    } else {
      auto in = resolve_input(plan, i, source_names);
      if (!in) {
        throw PlanError(PlanError::Kind::DanglingRef,
                        "step 1 has no input and there are several source tables", "steps[0].input",
                        i);
      }
      require(*in, i, "input");
    }
    bound.insert(step.output_name);
  }
  if (!bound.contains(plan.final_output())) {
    throw PlanError(PlanError::Kind::DanglingRef,
                    "final_output '" + plan.final_output() + "' is not bound", "final_output");
  }
}

}  // namespace monteprep
