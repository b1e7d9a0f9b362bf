#pragma once

#include <cstdint>
#include <vector>

#include "circuitrl/env/ablation_env.hpp"

namespace circuitrl {

// Exhaustive single-head sweep on one episode's batches.
struct OracleResult {
  std::uint64_t seed = 0;
  TaskId task = TaskId::Induction;
  std::vector<double> rewards;  // indexed by action
  std::vector<double> task_damage;
  std::vector<double> general_damage;
  int best_action = 0;  // lowest index among the maxima
  double best_reward = 0.0;
};

// Resets `env` to (seed, task) and scores every head, up to `workers` at a
// time. The environment is left at the start of that episode.
OracleResult oracle_episode(AblationEnv& env, std::uint64_t seed, TaskId task, std::size_t workers = 1);

// Heads ordered by mean reward over several oracle episodes, descending,
// ties to the lower action index.
struct OracleRanking {
  std::vector<double> mean_reward;  // by action
  std::vector<int> order;           // actions, best first
  std::vector<int> rank;            // 1-based rank by action

  double ceiling = 0.0;  // mean of the per-episode best rewards
};

OracleRanking oracle_mean_ranking(const std::vector<OracleResult>& results);

}  // namespace circuitrl
