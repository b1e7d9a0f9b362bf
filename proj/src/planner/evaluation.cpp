#include "circuitrl/planner/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "circuitrl/common.hpp"

namespace circuitrl {

namespace {
constexpr std::uint64_t kEvalSamplerTag = 0x6576616cULL;
}

std::string_view eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Sample: return "sample";
    case EvalMode::Greedy: return "greedy";
    case EvalMode::Random: return "random";
  }
  return "sample";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "sample") return EvalMode::Sample;
  if (name == "greedy") return EvalMode::Greedy;
  if (name == "random") return EvalMode::Random;
  throw std::invalid_argument("unknown evaluation mode '" + std::string(name) + "'");
}

std::vector<EpisodeLog> run_eval(const PolicyParams* params, AblationEnv& env, const EvalConfig& cfg) {
  if (cfg.mode != EvalMode::Random && !params) throw std::invalid_argument("policy evaluation needs parameters");
  if (cfg.n_episodes < 0) throw std::invalid_argument("episode count must be non-negative");
  PlannerConfig pc{cfg.k, cfg.mode == EvalMode::Greedy, cfg.workers};

  std::vector<EpisodeLog> logs;
  for (int e = 0; e < cfg.n_episodes; ++e) {
    EpisodeLog log;
    log.seed = cfg.seed_floor + static_cast<std::uint64_t>(e);
    log.task = cfg.task;
    log.k = cfg.k;
    log.mode = cfg.mode;
    env.reset(log.seed, cfg.task, cfg.onehot);
    log.onehot = env.state().onehot;
    std::mt19937_64 rng(mix_seed(cfg.sampler_seed ^ kEvalSamplerTag, log.seed));
    double best = -INFINITY;
    while (!env.terminated()) {
      const std::vector<std::uint8_t> mask = env.action_mask();
      const ActionDistribution dist = cfg.mode == EvalMode::Random
                                          ? uniform_distribution(mask)
                                          : policy_forward(*params, env.observation().flatten(), mask).dist;
      const PlanStep ps = plan_step(env, dist, pc, rng);
      log.picks.push_back(env.head(ps.committed));
      log.rewards.push_back(ps.outcome.reward);
      best = std::max(best, ps.outcome.reward);
      log.running_max.push_back(best);
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

EvalSummary summarize(const std::vector<EpisodeLog>& logs) {
  EvalSummary s;
  s.episodes = static_cast<int>(logs.size());
  if (logs.empty()) return s;
  for (const auto& l : logs) s.mean_running_max += l.final_running_max();
  s.mean_running_max /= static_cast<double>(logs.size());
  if (logs.size() > 1) {
    double var = 0.0;
    for (const auto& l : logs) var += std::pow(l.final_running_max() - s.mean_running_max, 2);
    var /= static_cast<double>(logs.size() - 1);
    s.std_error = std::sqrt(var / static_cast<double>(logs.size()));
  }
  return s;
}

std::string regime_label(const std::array<double, 2>& onehot) {
  std::ostringstream s;
  s << '[' << onehot[0] << ',' << onehot[1] << ']';
  return s.str();
}

std::array<double, 2> parse_regime(std::string_view label) {
  if (label == "[0,0]" || label == "zero-shot") return {0, 0};
  if (label == "[1,0]" || label == "induction") return {1, 0};
  if (label == "[0,1]" || label == "ioi") return {0, 1};
  throw std::invalid_argument("unknown regime '" + std::string(label) + "' (expected [0,0], [1,0] or [0,1])");
}

std::string episode_to_json(const EpisodeLog& log) {
  nlohmann::json picks = nlohmann::json::array();
  for (const auto& h : log.picks) picks.push_back(h.action());
  const nlohmann::json j = {
      {"kind", "episode"},
      {"seed", log.seed},
      {"task", std::string(task_name(log.task))},
      {"regime", regime_label(log.onehot)},
      {"k", log.k},
      {"mode", std::string(eval_mode_name(log.mode))},
      {"picks", picks},
      {"rewards", log.rewards},
      {"running_max", log.running_max},
  };
  return j.dump();
}

std::string oracle_to_json(const OracleResult& r) {
  const nlohmann::json j = {
      {"kind", "oracle"},
      {"seed", r.seed},
      {"task", std::string(task_name(r.task))},
      {"best_action", r.best_action},
      {"best_reward", r.best_reward},
      {"rewards", r.rewards},
      {"task_damage", r.task_damage},
      {"general_damage", r.general_damage},
  };
  return j.dump();
}

LogBundle read_logs(const std::vector<std::filesystem::path>& paths) {
  LogBundle out;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open log " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = path.string() + ":" + std::to_string(lineno);
      try {
        const auto j = nlohmann::json::parse(line);
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "episode") {
          EpisodeLog l;
          l.seed = j.at("seed").get<std::uint64_t>();
          l.task = parse_task(j.at("task").get<std::string>());
          l.onehot = parse_regime(j.at("regime").get<std::string>());
          l.k = j.at("k").get<int>();
          l.mode = parse_eval_mode(j.at("mode").get<std::string>());
          for (int a : j.at("picks")) l.picks.push_back(HeadIndex::from_action(a));
          l.rewards = j.at("rewards").get<std::vector<double>>();
          l.running_max = j.at("running_max").get<std::vector<double>>();
          if (l.rewards.size() != l.picks.size() || l.running_max.size() != l.picks.size()) {
            throw FormatError("picks, rewards and running_max differ in length");
          }
          out.episodes.push_back(std::move(l));
        } else if (kind == "oracle") {
          OracleResult r;
          r.seed = j.at("seed").get<std::uint64_t>();
          r.task = parse_task(j.at("task").get<std::string>());
          r.best_action = j.at("best_action").get<int>();
          r.best_reward = j.at("best_reward").get<double>();
          r.rewards = j.at("rewards").get<std::vector<double>>();
          if (j.contains("task_damage")) r.task_damage = j["task_damage"].get<std::vector<double>>();
          if (j.contains("general_damage")) r.general_damage = j["general_damage"].get<std::vector<double>>();
          out.oracles.push_back(std::move(r));
        } else {
          throw FormatError("unknown record kind '" + kind + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + ": " + e.what());
      } catch (const std::exception& e) {
        throw FormatError(where + ": " + e.what());
      }
    }
  }
  return out;
}

}  // namespace circuitrl
