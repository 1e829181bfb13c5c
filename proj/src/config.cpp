#include "tpet/config.hpp"

#include "json.hpp"
#include "tpet/util.hpp"

namespace tpet::config {

using nlohmann::json;

void RunConfig::validate() const {
  try {
    ssa.validate();
    caf.validate();
    evolution.validate();
    engine.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (sim.decision_interval < 1) throw ConfigError("sim: decision_interval must be >= 1");
  if (sim.saturation_flow <= 0) throw ConfigError("sim: saturation_flow must be > 0");
  if (horizon < 1 || horizon % sim.decision_interval != 0)
    throw ConfigError("horizon must be a positive multiple of the decision interval");
  if (seeds.empty()) throw ConfigError("at least one seed required");
  if (engine_kind != "mock" && engine_kind != "remote")
    throw ConfigError("engine_kind must be 'mock' or 'remote'");
}

namespace {

template <typename T>
void opt(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j[key].get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("run config: not valid JSON");
  RunConfig c;
  opt(doc, "network", c.network_path);
  opt(doc, "flows", c.flows_path);
  opt(doc, "out_dir", c.out_dir);
  opt(doc, "horizon", c.horizon);
  opt(doc, "seeds", c.seeds);
  opt(doc, "engine_kind", c.engine_kind);
  opt(doc, "mock_seed", c.mock_seed);

  if (doc.contains("sim")) {
    const auto& j = doc["sim"];
    opt(j, "decision_interval", c.sim.decision_interval);
    opt(j, "saturation_flow", c.sim.saturation_flow);
  }
  if (doc.contains("ssa")) {
    const auto& j = doc["ssa"];
    opt(j, "theta_demand", c.ssa.theta_demand);
    opt(j, "tau_critical", c.ssa.tau_critical);
    opt(j, "cut_low", c.ssa.cut_low);
    opt(j, "cut_moderate", c.ssa.cut_moderate);
    opt(j, "cut_high", c.ssa.cut_high);
    opt(j, "cut_critical", c.ssa.cut_critical);
    opt(j, "urgency_wait", c.ssa.urgency_wait);
    opt(j, "imbalance_ratio", c.ssa.imbalance_ratio);
    opt(j, "dominant_margin", c.ssa.dominant_margin);
    opt(j, "passthrough", c.ssa.passthrough);
  }
  if (doc.contains("caf")) {
    const auto& j = doc["caf"];
    opt(j, "tau_crit", c.caf.tau_crit);
    opt(j, "epsilon_demand", c.caf.epsilon_demand);
    opt(j, "high_demand", c.caf.high_demand);
    opt(j, "residual_demand", c.caf.residual_demand);
    opt(j, "top_k", c.caf.top_k);
    opt(j, "enabled", c.caf.enabled);
  }
  c.caf.interval_seconds = c.sim.decision_interval;
  if (doc.contains("evolution")) {
    const auto& j = doc["evolution"];
    opt(j, "population", c.evolution.population);
    opt(j, "elites", c.evolution.elites);
    opt(j, "inner_iterations", c.evolution.inner_iterations);
    opt(j, "outer_iterations", c.evolution.outer_iterations);
    opt(j, "runs", c.evolution.runs);
    opt(j, "retry_budget", c.evolution.retry_budget);
    opt(j, "max_parallel", c.evolution.max_parallel);
    opt(j, "max_prompt_bytes", c.evolution.max_prompt_bytes);
    opt(j, "task_description", c.evolution.task_description);
    if (j.contains("fitness")) {
      const auto& f = j["fitness"];
      opt(f, "att", c.evolution.fitness.att);
      opt(f, "aql", c.evolution.fitness.aql);
      opt(f, "awt", c.evolution.fitness.awt);
    }
    if (j.contains("eval_seeds")) c.evolution.eval_seeds = j["eval_seeds"].get<std::vector<uint64_t>>();
  }
  if (doc.contains("engine")) {
    const auto& j = doc["engine"];
    opt(j, "endpoint", c.engine.endpoint);
    opt(j, "model", c.engine.model);
    opt(j, "auth_env", c.engine.auth_env);
    opt(j, "timeout_s", c.engine.timeout_s);
    opt(j, "max_in_flight", c.engine.max_in_flight);
    opt(j, "temperature", c.engine.temperature);
    opt(j, "retry_budget", c.engine.retry_budget);
  }
  if (doc.contains("fixed_time_plan"))
    for (const auto& e : doc["fixed_time_plan"])
      c.fixed_time_plan.entries.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());

  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(util::read_file(path));
}

std::string run_config_to_json(const RunConfig& c) {
  json doc;
  doc["network"] = c.network_path;
  doc["flows"] = c.flows_path;
  doc["out_dir"] = c.out_dir;
  doc["horizon"] = c.horizon;
  doc["seeds"] = c.seeds;
  doc["engine_kind"] = c.engine_kind;
  doc["mock_seed"] = c.mock_seed;
  doc["sim"] = {{"decision_interval", c.sim.decision_interval},
                {"saturation_flow", c.sim.saturation_flow}};
  doc["ssa"] = {{"theta_demand", c.ssa.theta_demand},
                {"tau_critical", c.ssa.tau_critical},
                {"cut_low", c.ssa.cut_low},
                {"cut_moderate", c.ssa.cut_moderate},
                {"cut_high", c.ssa.cut_high},
                {"cut_critical", c.ssa.cut_critical},
                {"urgency_wait", c.ssa.urgency_wait},
                {"imbalance_ratio", c.ssa.imbalance_ratio},
                {"dominant_margin", c.ssa.dominant_margin},
                {"passthrough", c.ssa.passthrough}};
  doc["caf"] = {{"tau_crit", c.caf.tau_crit},
                {"epsilon_demand", c.caf.epsilon_demand},
                {"high_demand", c.caf.high_demand},
                {"residual_demand", c.caf.residual_demand},
                {"top_k", c.caf.top_k},
                {"enabled", c.caf.enabled}};
  doc["evolution"] = {{"population", c.evolution.population},
                      {"elites", c.evolution.elites},
                      {"inner_iterations", c.evolution.inner_iterations},
                      {"outer_iterations", c.evolution.outer_iterations},
                      {"runs", c.evolution.runs},
                      {"retry_budget", c.evolution.retry_budget},
                      {"max_parallel", c.evolution.max_parallel},
                      {"max_prompt_bytes", c.evolution.max_prompt_bytes},
                      {"task_description", c.evolution.task_description},
                      {"eval_seeds", c.evolution.eval_seeds},
                      {"fitness",
                       {{"att", c.evolution.fitness.att},
                        {"aql", c.evolution.fitness.aql},
                        {"awt", c.evolution.fitness.awt}}}};
  doc["engine"] = {{"endpoint", c.engine.endpoint},
                   {"model", c.engine.model},
                   {"auth_env", c.engine.auth_env},
                   {"timeout_s", c.engine.timeout_s},
                   {"max_in_flight", c.engine.max_in_flight},
                   {"temperature", c.engine.temperature},
                   {"retry_budget", c.engine.retry_budget}};
  if (!c.fixed_time_plan.entries.empty()) {
    doc["fixed_time_plan"] = json::array();
    for (auto [p, d] : c.fixed_time_plan.entries) doc["fixed_time_plan"].push_back({p, d});
  }
  return doc.dump(2) + "\n";
}

}  // namespace tpet::config
