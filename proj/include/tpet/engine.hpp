#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpet/evolution.hpp"

namespace tpet::llm {

struct EngineSettings {
  std::string endpoint = "http://127.0.0.1:8089";
  std::string model = "glm-4-flash";
  std::string auth_env = "TPET_API_KEY";  // environment variable holding the token
  double timeout_s = 30.0;
  int max_in_flight = 4;
  double temperature = 0.8;
  int retry_budget = 3;

  void validate() const;  // throws std::invalid_argument
};

// ``` fenced blocks, language tags ignored; interiors returned byte-exact.
std::vector<std::string> extract_fenced_blocks(const std::string& text);

// One chat-completion round trip asking for n candidates. Transport failures
// retry with exponential backoff up to the budget; exhaustion returns an
// empty Exhausted result instead of failing the loop. Responses without a
// fenced block are dropped and counted.
evo::ProposeResult remote_propose(const EngineSettings& settings, const evo::PromptState& prompt,
                                  int n);

// Deterministic in (seed, prompt): critique-aware mutations of the prompt's
// elites. Starvation mentions bias toward inserting starvation_risk override
// rules, wasted-green mentions toward threshold perturbation. Every returned
// source parses.
evo::ProposeResult mock_propose(uint64_t seed, const evo::PromptState& prompt, int n,
                                int phase_count);

class RemoteEngine : public evo::MutationEngine {
 public:
  explicit RemoteEngine(EngineSettings settings);  // throws when the token is missing
  evo::ProposeResult propose(const evo::PromptState& prompt, int n) override;
  std::string refine_prompt(const evo::PromptState& prompt) override;
  int64_t request_count() const { return requests_; }

 private:
  EngineSettings settings_;
  std::string token_;
  int64_t requests_ = 0;
};

class MockEngine : public evo::MutationEngine {
 public:
  MockEngine(uint64_t seed, int phase_count) : seed_(seed), phase_count_(phase_count) {}
  evo::ProposeResult propose(const evo::PromptState& prompt, int n) override;
  std::string refine_prompt(const evo::PromptState& prompt) override;

 private:
  uint64_t seed_;
  int phase_count_;
  uint64_t calls_ = 0;  // fresh sub-seed per call so stagnant elites still move
};

}  // namespace tpet::llm
