#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tpet/engine.hpp"

namespace tpet::llm {

using nlohmann::json;

void EngineSettings::validate() const {
  if (timeout_s <= 0) throw std::invalid_argument("engine: timeout must be > 0");
  if (max_in_flight < 1) throw std::invalid_argument("engine: max_in_flight must be >= 1");
  if (retry_budget < 0) throw std::invalid_argument("engine: retry_budget must be >= 0");
}

std::vector<std::string> extract_fenced_blocks(const std::string& text) {
  std::vector<std::string> blocks;
  size_t pos = 0;
  while (true) {
    size_t open = text.find("```", pos);
    if (open == std::string::npos) break;
    size_t body = text.find('\n', open);  // skip the fence line (with any language tag)
    if (body == std::string::npos) break;
    ++body;
    size_t close = text.find("```", body);
    if (close == std::string::npos) break;  // unterminated fence: dropped
    size_t end = close;  // interior runs up to the line holding the closing fence
    if (end > body && text[end - 1] == '\n') --end;
    blocks.push_back(text.substr(body, end - body));
    pos = close + 3;
  }
  return blocks;
}

namespace {

struct ParsedEndpoint {
  std::string host_port;  // scheme://host:port
  std::string base_path;
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
  size_t scheme = endpoint.find("://");
  size_t path = scheme == std::string::npos ? endpoint.find('/')
                                            : endpoint.find('/', scheme + 3);
  if (path == std::string::npos) return {endpoint, ""};
  return {endpoint.substr(0, path), endpoint.substr(path)};
}

json chat_body(const EngineSettings& settings, const std::string& system_text,
               const std::string& user_text, int n) {
  return json{{"model", settings.model},
              {"messages",
               {{{"role", "system"}, {"content", system_text}},
                {{"role", "user"}, {"content", user_text}}}},
              {"temperature", settings.temperature},
              {"n", n}};
}

// POST with retry + exponential backoff. Returns the body, or nullopt once
// the budget is exhausted.
std::optional<std::string> post_with_retry(const EngineSettings& settings,
                                           const std::string& body) {
  auto [host, base] = split_endpoint(settings.endpoint);
  const char* token = std::getenv(settings.auth_env.c_str());
  int backoff_ms = 100;
  for (int attempt = 0; attempt <= settings.retry_budget; ++attempt) {
    httplib::Client client(host);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(settings.timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(settings.timeout_s * 1000)));
    httplib::Headers headers;
    if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
    auto res = client.Post(base + "/chat/completions", headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (attempt < settings.retry_budget) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = std::min(backoff_ms * 2, 2000);
    }
  }
  return std::nullopt;
}

const char* system_text() {
  return "You are a heuristic designer for traffic signal control. You improve small rule-based "
         "policies written in a fixed grammar. Reply with policies only, each inside its own "
         "fenced code block.";
}

}  // namespace

evo::ProposeResult remote_propose(const EngineSettings& settings, const evo::PromptState& prompt,
                                  int n) {
  evo::ProposeResult out;
  auto body = chat_body(settings, system_text(), prompt.to_text(n), n);
  auto response = post_with_retry(settings, body.dump());
  if (!response) {
    out.status = evo::ProposeStatus::Exhausted;
    return out;
  }
  json doc = json::parse(*response, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices")) {
    out.dropped += 1;  // malformed body
    return out;
  }
  for (const auto& choice : doc["choices"]) {
    if (!choice.contains("message") || !choice["message"].contains("content")) {
      out.dropped += 1;
      continue;
    }
    auto blocks = extract_fenced_blocks(choice["message"]["content"].get<std::string>());
    if (blocks.empty()) {
      out.dropped += 1;
      continue;
    }
    for (auto& b : blocks) {
      if (static_cast<int>(out.sources.size()) >= n) break;
      out.sources.push_back({std::move(b), "", 0});
    }
  }
  return out;
}

RemoteEngine::RemoteEngine(EngineSettings settings) : settings_(std::move(settings)) {
  settings_.validate();
  const char* token = std::getenv(settings_.auth_env.c_str());
  if (!token || !*token)
    throw std::invalid_argument("remote engine: environment variable " + settings_.auth_env +
                                " is not set");
  token_ = token;
}

evo::ProposeResult RemoteEngine::propose(const evo::PromptState& prompt, int n) {
  ++requests_;
  return remote_propose(settings_, prompt, n);
}

std::string RemoteEngine::refine_prompt(const evo::PromptState& prompt) {
  ++requests_;
  std::string ask =
      prompt.to_text(1) +
      "\nRewrite the task description above so the next round of policy design addresses the "
      "critiques. Reply with the new task description in one fenced code block.\n";
  auto body = chat_body(settings_, system_text(), ask, 1);
  auto response = post_with_retry(settings_, body.dump());
  if (!response) return prompt.task;
  json doc = json::parse(*response, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
    return prompt.task;
  const auto& choice = doc["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content")) return prompt.task;
  auto blocks = extract_fenced_blocks(choice["message"]["content"].get<std::string>());
  return blocks.empty() ? prompt.task : blocks.front();
}

}  // namespace tpet::llm
