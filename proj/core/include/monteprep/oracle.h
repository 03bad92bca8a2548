#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "monteprep/sandbox.h"

namespace monteprep {

/// What a proposal call produced. `params` is empty when the reply could not
/// be parsed; `error` then says why.
struct OracleResponse {
  std::string raw_text;
  std::optional<ActionParams> params;
  std::string error;
  int attempts = 0;

  bool ok() const { return params.has_value(); }
};

/// Inputs to the self-evaluation judge. `preview` is the head of the
/// executed output (hybrid reward); `diagnostics` is set when execution
/// failed.
struct JudgeRequest {
  const TaskContext* context = nullptr;
  const PipelinePlan* plan = nullptr;
  const Table* preview = nullptr;
  const ExecutionDiagnostics* diagnostics = nullptr;
};

struct JudgeVerdict {
  /// One of 0, 0.5, 1.
  double score = 0.0;
  std::string rationale;
  std::string raw_text;
};

/// Receives every prompt an oracle renders, in call order.
using PromptSink = std::function<void(ActionType type, const std::string& prompt)>;
using JudgePromptSink = std::function<void(const std::string& prompt)>;

class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::string name() const = 0;
  virtual OracleResponse propose(const ReasoningState& state, ActionType type) = 0;
  virtual JudgeVerdict judge(const JudgeRequest& request) = 0;
};

struct ActionPrompt {
  std::string instruction;
  std::string tips;
  std::string response_format;
};

/// Prompt text per action plus the judge prompt. Sections are rendered as
/// Instruction / Tips / Table Information / Response Format for actions and
/// Instruction / Evaluation Rules / Table Information / Output Format for
/// the judge.
struct PromptTemplates {
  std::string system;
  std::array<ActionPrompt, 5> actions;
  std::string judge_instruction;
  std::string judge_rules;
  std::string judge_output_format;

  const ActionPrompt& for_action(ActionType t) const { return actions[static_cast<std::size_t>(t)]; }

  static const PromptTemplates& defaults();
};

/// Reads overrides from an object-notation file. Keys: "system",
/// "actions" (keyed by action name, each with optional "instruction",
/// "tips", "response_format") and "judge" ("instruction", "rules",
/// "output_format"). Missing keys keep the defaults.
PromptTemplates load_prompt_templates(const std::filesystem::path& path);

/// Source schemas with sampled rows, the target schema, and what the state
/// has established so far. Never includes target rows.
std::string render_table_information(const ReasoningState& state);
std::string render_prompt(const ReasoningState& state, ActionType type,
                          const PromptTemplates& templates = PromptTemplates::defaults());
std::string render_judge_prompt(const JudgeRequest& request,
                                const PromptTemplates& templates = PromptTemplates::defaults());

class ReplyParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Body of the first ```json fenced block, else the whole reply when it is
/// a bare object.
std::optional<std::string> extract_json_block(std::string_view reply);

/// Parses a reply into the params of `type`; throws ReplyParseError.
ActionParams parse_action_reply(std::string_view reply, ActionType type, const TaskContext& ctx);

/// nullopt when the reply is unparseable or the score is not 0, 0.5 or 1.
std::optional<JudgeVerdict> parse_judge_reply(std::string_view reply);

/// Fenced reply text for params, in the format the parsers read.
std::string format_action_reply(const ActionParams& params);

/// Deterministic rule-based oracle. Replies are produced in the same text
/// format an LLM is asked for and go through the same parser.
class HeuristicOracle : public Oracle {
 public:
  HeuristicOracle() = default;

  /// Renders the prompts an LLM would receive and hands them to the sinks.
  void set_prompt_sinks(PromptSink on_action, JudgePromptSink on_judge,
                        PromptTemplates templates = PromptTemplates::defaults());

  std::string name() const override { return "heuristic"; }
  OracleResponse propose(const ReasoningState& state, ActionType type) override;
  JudgeVerdict judge(const JudgeRequest& request) override;

 private:
  PromptSink action_sink_;
  JudgePromptSink judge_sink_;
  PromptTemplates templates_;
};

}  // namespace monteprep
