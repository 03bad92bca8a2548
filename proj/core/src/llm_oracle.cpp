#include "monteprep/llm.h"

namespace monteprep {

LlmOracle::LlmOracle(std::shared_ptr<ChatBackend> backend, LlmOracleOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw std::invalid_argument("LlmOracle needs a chat backend");
  if (options_.retries < 0) throw std::invalid_argument("retries must be non-negative");
}

void LlmOracle::set_prompt_sinks(PromptSink on_action, JudgePromptSink on_judge) {
  action_sink_ = std::move(on_action);
  judge_sink_ = std::move(on_judge);
}

std::string LlmOracle::call(const std::vector<ChatMessage>& messages) {
  ++calls_;
  return backend_->complete(messages);
}

OracleResponse LlmOracle::propose(const ReasoningState& state, ActionType type) {
  OracleResponse r;
  if (type == ActionType::Termination) {
    r.raw_text = "{}";
    r.params = TerminationParams{};
    return r;
  }
  const std::string prompt = render_prompt(state, type, options_.templates);
  if (action_sink_) action_sink_(type, prompt);
  std::vector<ChatMessage> messages;
  if (!options_.templates.system.empty()) messages.push_back({"system", options_.templates.system});
  messages.push_back({"user", prompt});

  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    r.attempts = attempt + 1;
    try {
      r.raw_text = call(messages);
    } catch (const ChatError& e) {
      r.error = e.what();
      continue;
    }
    try {
      r.params = parse_action_reply(r.raw_text, type, *state.context);
      if (auto* ref = std::get_if<CodeRefinementParams>(&*r.params)) ref->addressed = state.diagnostics;
      r.error.clear();
      return r;
    } catch (const ReplyParseError& e) {
      r.error = e.what();
      messages.push_back({"assistant", r.raw_text});
      messages.push_back({"user", "The reply could not be used: " + r.error +
                                      "\nAnswer again with one ```json block in the required format."});
    }
  }
  return r;
}

JudgeVerdict LlmOracle::judge(const JudgeRequest& request) {
  const std::string prompt = render_judge_prompt(request, options_.templates);
  if (judge_sink_) judge_sink_(prompt);
  std::vector<ChatMessage> messages;
  if (!options_.templates.system.empty()) messages.push_back({"system", options_.templates.system});
  messages.push_back({"user", prompt});
  std::string raw = call(messages);
  if (auto v = parse_judge_reply(raw)) return *v;
  JudgeVerdict v;
  v.rationale = "unparseable judge reply";
  v.raw_text = std::move(raw);
  return v;
}

}  // namespace monteprep
