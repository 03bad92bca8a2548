#include "monteprep/oracle.h"

#include <cmath>

#include "internal/action_json.h"
#include "monteprep/heuristics.h"

namespace monteprep {

std::optional<std::string> extract_json_block(std::string_view reply) {
  constexpr std::string_view open = "```json";
  if (auto start = reply.find(open); start != std::string_view::npos) {
    auto body = start + open.size();
    auto end = reply.find("```", body);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(trim(reply.substr(body, end - body)));
  }
  auto t = trim(reply);
  if (!t.empty() && t.front() == '{' && t.back() == '}') return t;
  return std::nullopt;
}

ActionParams parse_action_reply(std::string_view reply, ActionType type, const TaskContext& ctx) {
  auto block = extract_json_block(reply);
  if (!block) throw ReplyParseError("reply has no ```json block");
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(*block);
  } catch (const nlohmann::json::parse_error& e) {
    throw ReplyParseError(std::string("json block does not parse: ") + e.what());
  }
  try {
    return detail::params_from_json(type, body, ctx.source_names(), ctx.limits);
  } catch (const detail::ParamsFormatError& e) {
    throw ReplyParseError(e.what());
  }
}

std::optional<JudgeVerdict> parse_judge_reply(std::string_view reply) {
  auto block = extract_json_block(reply);
  if (!block) return std::nullopt;
  nlohmann::json body = nlohmann::json::parse(*block, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return std::nullopt;
  auto it = body.find("score");
  if (it == body.end() || !it->is_number()) return std::nullopt;
  const double s = it->get<double>();
  if (s != 0.0 && s != 0.5 && s != 1.0) return std::nullopt;
  JudgeVerdict v;
  v.score = s;
  if (auto r = body.find("rationale"); r != body.end() && r->is_string()) v.rationale = r->get<std::string>();
  v.raw_text = std::string(reply);
  return v;
}

std::string format_action_reply(const ActionParams& params) {
  return "```json\n" + detail::params_to_json(params).dump(2) + "\n```";
}

void HeuristicOracle::set_prompt_sinks(PromptSink on_action, JudgePromptSink on_judge,
                                       PromptTemplates templates) {
  action_sink_ = std::move(on_action);
  judge_sink_ = std::move(on_judge);
  templates_ = std::move(templates);
}

OracleResponse HeuristicOracle::propose(const ReasoningState& state, ActionType type) {
  if (action_sink_) action_sink_(type, render_prompt(state, type, templates_));
  const TaskContext& ctx = *state.context;
  OracleResponse r;
  r.attempts = 1;
  std::optional<ActionParams> params;
  switch (type) {
    case ActionType::SchemaMapping:
      params = heuristics::propose_mapping(ctx, true);
      break;
    case ActionType::OperatorDiscovery:
      params = heuristics::discover_operators(ctx, state.mapping ? &*state.mapping : nullptr);
      break;
    case ActionType::CodeSynthesis:
      if (auto plan = heuristics::synthesize_plan(ctx, state.mapping ? &*state.mapping : nullptr,
                                                  state.discovered_ops ? &*state.discovered_ops : nullptr)) {
        params = CodeSynthesisParams{std::move(*plan)};
      }
      break;
    case ActionType::CodeRefinement:
      if (auto plan = heuristics::refine_plan(state)) {
        params = CodeRefinementParams{std::move(*plan), std::nullopt};
      }
      break;
    case ActionType::Termination:
      params = TerminationParams{};
      break;
  }
  if (!params) {
    r.error = "no " + std::string(to_string(type)) + " proposal applies to this state";
    return r;
  }
  r.raw_text = format_action_reply(*params);
  try {
    r.params = parse_action_reply(r.raw_text, type, ctx);
    if (auto* ref = std::get_if<CodeRefinementParams>(&*r.params)) ref->addressed = state.diagnostics;
  } catch (const ReplyParseError& e) {
    r.error = e.what();
  }
  return r;
}

JudgeVerdict HeuristicOracle::judge(const JudgeRequest& request) {
  if (judge_sink_) judge_sink_(render_judge_prompt(request, templates_));
  JudgeVerdict v;
  if (request.diagnostics) {
    v.rationale = "plan fails to execute";
  } else {
    v.score = heuristics::judge_score(*request.context, *request.plan, request.preview);
    v.rationale = "target column coverage of the plan output";
  }
  return v;
}

}  // namespace monteprep
