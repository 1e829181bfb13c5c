#include <algorithm>

#include "tpet/engine.hpp"
#include "tpet/util.hpp"

namespace tpet::llm {

namespace {

// True when any elite critique reports a nonzero count for the pattern,
// e.g. "Phase Starvation: 4".
bool pattern_reported(const evo::PromptState& prompt, const std::string& name) {
  const std::string needle = name + ": ";
  for (const auto& e : prompt.elites) {
    size_t at = 0;
    while ((at = e.critique.find(needle, at)) != std::string::npos) {
      size_t num = at + needle.size();
      if (num < e.critique.size() && e.critique[num] >= '1' && e.critique[num] <= '9')
        return true;
      at = num;
    }
  }
  return false;
}

// Fairness override targeting the most starved phase at evaluation time.
dsl::Rule starvation_override_rule(util::Rng& rng, int phase_count) {
  dsl::Rule r;
  int p = rng.uniform_int(phase_count);
  r.cond.kind = dsl::BoolExpr::Kind::StarvationTest;
  r.cond.phase = p;
  if (rng.chance(0.5)) {
    r.target.kind = dsl::PhaseExpr::Kind::Literal;
    r.target.phase = p;
  } else {
    r.target.kind = dsl::PhaseExpr::Kind::Select;
    r.target.sel = dsl::SelOp::ArgMax;
    r.target.feature = dsl::Feature::Starvation;
  }
  return r;
}

}  // namespace

evo::ProposeResult mock_propose(uint64_t seed, const evo::PromptState& prompt, int n,
                                int phase_count) {
  evo::ProposeResult out;
  if (n <= 0 || prompt.elites.empty()) return out;

  dsl::Signature sig;
  sig.phase_count = phase_count;

  // The prompt content is part of the seed, so identical (seed, prompt)
  // pairs reproduce exactly.
  uint64_t prompt_hash = util::fnv1a(prompt.to_text(n));
  util::Rng rng(util::splitmix64(seed) ^ prompt_hash);

  const bool starved = pattern_reported(prompt, "Phase Starvation");
  const bool wasted = pattern_reported(prompt, "Wasted Green Time");

  std::vector<dsl::PolicyProgram> parents;
  for (const auto& e : prompt.elites) {
    auto parsed = dsl::parse({e.source, "", 0}, sig);
    if (parsed.ok()) parents.push_back(*parsed.program);
  }
  if (parents.empty()) return out;

  static const dsl::MutationKind kinds[6] = {
      dsl::MutationKind::ThresholdPerturb, dsl::MutationKind::RuleInsert,
      dsl::MutationKind::RuleDelete,       dsl::MutationKind::RuleSwap,
      dsl::MutationKind::OperatorFlip,     dsl::MutationKind::SelectorSwap};

  for (int i = 0; i < n; ++i) {
    const dsl::PolicyProgram& parent = parents[static_cast<size_t>(i) % parents.size()];
    dsl::PolicyProgram child = parent;
    double roll = rng.uniform01();

    if (starved && roll < 0.45 &&
        static_cast<int>(parent.rules.size()) < sig.max_rules) {
      // Critique-aware bias: put a starvation override in front.
      child.rules.insert(child.rules.begin(), starvation_override_rule(rng, phase_count));
    } else if (wasted && roll < 0.75) {
      auto res = dsl::mutate_ast(parent, rng.next(), dsl::MutationKind::ThresholdPerturb, sig);
      if (!res.applied)
        res = dsl::mutate_ast(parent, rng.next(), dsl::MutationKind::RuleInsert, sig);
      child = res.program;
    } else {
      auto kind = kinds[rng.uniform_int(6)];
      auto res = dsl::mutate_ast(parent, rng.next(), kind, sig);
      if (!res.applied) res = dsl::mutate_ast(parent, rng.next(), dsl::MutationKind::RuleInsert, sig);
      child = res.program;
    }

    out.sources.push_back(dsl::render(child));
  }
  return out;
}

evo::ProposeResult MockEngine::propose(const evo::PromptState& prompt, int n) {
  uint64_t call_seed = util::splitmix64(seed_ ^ (0x51AB1E00ULL + calls_));
  ++calls_;
  return mock_propose(call_seed, prompt, n, phase_count_);
}

std::string MockEngine::refine_prompt(const evo::PromptState& prompt) { return prompt.task; }

}  // namespace tpet::llm
