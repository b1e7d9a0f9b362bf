#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "circuitrl/planner/best_of_k.hpp"
#include "circuitrl/planner/oracle.hpp"

namespace circuitrl {

enum class EvalMode { Sample, Greedy, Random };

std::string_view eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);

struct EpisodeLog {
  std::uint64_t seed = 0;
  TaskId task = TaskId::Induction;
  std::array<double, 2> onehot{};
  int k = 1;
  EvalMode mode = EvalMode::Sample;
  std::vector<HeadIndex> picks;
  std::vector<double> rewards;
  std::vector<double> running_max;

  double final_running_max() const { return running_max.empty() ? 0.0 : running_max.back(); }
};

struct EvalConfig {
  TaskId task = TaskId::Induction;
  std::optional<std::array<double, 2>> onehot;  // priming override
  int k = 1;
  int n_episodes = 20;
  std::uint64_t seed_floor = 10'000'000;  // episode i uses seed_floor + i
  std::uint64_t sampler_seed = 0;
  EvalMode mode = EvalMode::Sample;
  std::size_t workers = 1;
};

// Runs full-length episodes. `params` may be null only in Random mode.
// Each episode's sampler is seeded from (sampler_seed, episode seed), so an
// episode does not depend on which others were run.
std::vector<EpisodeLog> run_eval(const PolicyParams* params, AblationEnv& env, const EvalConfig& cfg);

struct EvalSummary {
  int episodes = 0;
  double mean_running_max = 0.0;
  double std_error = 0.0;
};

EvalSummary summarize(const std::vector<EpisodeLog>& logs);

// JSONL records: {"kind":"episode", ...} and {"kind":"oracle", ...}.
std::string episode_to_json(const EpisodeLog& log);
std::string oracle_to_json(const OracleResult& result);

struct LogBundle {
  std::vector<EpisodeLog> episodes;
  std::vector<OracleResult> oracles;
};

// Reads any number of JSONL files of either record kind. Throws FormatError.
LogBundle read_logs(const std::vector<std::filesystem::path>& paths);

std::string regime_label(const std::array<double, 2>& onehot);
std::array<double, 2> parse_regime(std::string_view label);

}  // namespace circuitrl
