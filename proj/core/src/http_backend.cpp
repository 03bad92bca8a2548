#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "monteprep/llm.h"

namespace monteprep {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : std::move(fallback);
}

// "http://host:8000/v1" -> {"http://host:8000", "/v1"}
std::pair<std::string, std::string> split_base(const std::string& base) {
  auto scheme = base.find("://");
  if (scheme == std::string::npos) throw ChatError("base URL needs a scheme: '" + base + "'");
  auto slash = base.find('/', scheme + 3);
  if (slash == std::string::npos) return {base, ""};
  std::string path = base.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base.substr(0, slash), path};
}

}  // namespace

HttpChatConfig HttpChatConfig::from_env() {
  HttpChatConfig c;
  c.base_url = env_or("MONTEPREP_API_BASE", c.base_url);
  c.model = env_or("MONTEPREP_MODEL", c.model);
  c.api_key = env_or("MONTEPREP_API_KEY", c.api_key);
  return c;
}

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
  if (config_.max_in_flight == 0) throw std::invalid_argument("max_in_flight must be positive");
  split_base(config_.base_url);
}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpChatBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  nlohmann::json body;
  if (!config_.model.empty()) body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  auto [host, prefix] = split_base(config_.base_url);
  httplib::Client client(host);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw ChatError("chat request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ChatError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                    res->body.substr(0, 200));
  }
  auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded()) throw ChatError("chat endpoint returned a non-JSON body");
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ChatError("chat reply has no choices[0].message.content");
  }
}

}  // namespace monteprep
