#pragma once

#include <random>
#include <span>
#include <vector>

#include "circuitrl/env/ablation_env.hpp"
#include "circuitrl/policy/policy_net.hpp"

namespace circuitrl {

struct PlannerConfig {
  int k = 1;
  bool greedy = false;  // take the k most probable actions instead of sampling
  std::size_t workers = 1;
};

// k distinct actions drawn one at a time from `dist`, each draw renormalised
// over the remaining mass. The first draw consumes the RNG exactly like
// sample_action. Legal actions whose probability underflowed to zero are
// drawn uniformly once the rest of the mass is exhausted.
std::vector<int> sample_without_replacement(const ActionDistribution& dist, std::span<const std::uint8_t> mask, int k,
                                            std::mt19937_64& rng);

// The k most probable legal actions, ties to the lower index.
std::vector<int> top_k(const ActionDistribution& dist, std::span<const std::uint8_t> mask, int k);

// Uniform distribution over the legal actions.
ActionDistribution uniform_distribution(std::span<const std::uint8_t> mask);

struct PlanStep {
  std::vector<int> candidates;
  std::vector<double> candidate_rewards;
  int committed = -1;
  StepOutcome outcome;
};

// Scores every candidate with a real ablation on the current episode and
// commits the best (ties to the lowest action index). Rewards of the other
// candidates are not fed back into the observation. Throws ContractViolation
// when k is not in [1, number of legal actions].
PlanStep plan_step(AblationEnv& env, const ActionDistribution& dist, const PlannerConfig& cfg, std::mt19937_64& rng);

// plan_step with the distribution of `params` at the env's current state.
PlanStep best_of_k(const PolicyParams& params, AblationEnv& env, const PlannerConfig& cfg, std::mt19937_64& rng);

}  // namespace circuitrl
