#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <stdexcept>
#include <string>
#include <vector>

#include "monteprep/oracle.h"

namespace monteprep {

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Transport or protocol failure talking to a chat model.
class ChatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One chat-completion round trip. Implementations must be callable from
/// several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Assistant reply text. Throws ChatError.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct LlmOracleOptions {
  /// Extra attempts after a reply that does not parse.
  int retries = 2;
  PromptTemplates templates = PromptTemplates::defaults();
};

/// Oracle that asks a chat model. Termination needs no parameters and is
/// answered without a model call.
class LlmOracle : public Oracle {
 public:
  explicit LlmOracle(std::shared_ptr<ChatBackend> backend, LlmOracleOptions options = {});

  void set_prompt_sinks(PromptSink on_action, JudgePromptSink on_judge);

  std::string name() const override { return "llm"; }
  OracleResponse propose(const ReasoningState& state, ActionType type) override;
  JudgeVerdict judge(const JudgeRequest& request) override;

  /// Backend round trips made so far.
  std::size_t backend_calls() const { return calls_.load(); }

 private:
  std::string call(const std::vector<ChatMessage>& messages);

  std::shared_ptr<ChatBackend> backend_;
  LlmOracleOptions options_;
  PromptSink action_sink_;
  JudgePromptSink judge_sink_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpChatConfig {
  /// Base URL up to and including the API version, e.g.
  /// http://localhost:8000/v1. Requests go to <base>/chat/completions.
  std::string base_url = "http://localhost:8000/v1";
  std::string model;
  std::string api_key;
  double temperature = 0.2;
  int timeout_seconds = 120;
  std::size_t max_in_flight = 4;

  /// MONTEPREP_API_BASE, MONTEPREP_MODEL and MONTEPREP_API_KEY override the
  /// defaults when set.
  static HttpChatConfig from_env();
};

/// OpenAI-compatible chat-completion client.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config);

  std::string complete(const std::vector<ChatMessage>& messages) override;

  const HttpChatConfig& config() const { return config_; }

 private:
  HttpChatConfig config_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace monteprep
