#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "circuitrl/env/vector_env.hpp"
#include "circuitrl/policy/policy_net.hpp"

namespace circuitrl {

struct Transition {
  std::vector<double> obs;
  std::vector<std::uint8_t> mask;
  int action = 0;
  double log_prob = 0.0;  // behaviour policy
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct EpisodeSummary {
  std::uint64_t seed = 0;
  TaskId task = TaskId::Induction;
  int length = 0;
  double running_max = 0.0;
};

// Transitions are stored env-major: index = env * horizon + t.
struct RolloutBuffer {
  int n_envs = 0;
  int horizon = 0;
  std::vector<Transition> transitions;
  std::vector<double> next_values;  // per env, V of the state after its last transition
  std::vector<EpisodeSummary> finished;
  std::vector<double> advantages;  // raw GAE, filled by compute_advantages
  std::vector<double> returns;

  std::size_t size() const { return transitions.size(); }
  const Transition& at(int env, int t) const { return transitions.at(static_cast<std::size_t>(env * horizon + t)); }
};

// Drives a VectorEnv with the current policy. Keeps the live observations
// and per-episode running maxima between collections.
class RolloutCollector {
 public:
  explicit RolloutCollector(VectorEnv& envs);

  // Starts every environment from its seed stream.
  void reset();
  // Restarts every environment with explicit seeds (resume).
  void reset(std::span<const std::uint64_t> seeds);

  RolloutBuffer collect(const PolicyParams& params, std::mt19937_64& rng, int horizon);

  VectorEnv& envs() { return *envs_; }
  // Seeds of the episodes currently in progress.
  std::vector<std::uint64_t> current_seeds() const;

 private:
  VectorEnv* envs_;
  std::vector<Observation> obs_;
  std::vector<double> running_max_;
  bool started_ = false;
};

// Fills buffer.advantages / buffer.returns with per-env GAE.
void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda);

}  // namespace circuitrl
