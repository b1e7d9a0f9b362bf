#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "circuitrl/env/ablation_env.hpp"

namespace circuitrl {

// Per-environment stream of training seeds, a fixed function of
// (run seed, environment index). Seeds stay below `ceiling` so training never
// touches the evaluation band.
class SeedStream {
 public:
  SeedStream(std::uint64_t run_seed, std::size_t env_index, std::uint64_t ceiling = 10'000'000);
  std::uint64_t next();
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  std::uint64_t ceiling_;
};

struct VectorStep {
  StepOutcome outcome;            // as returned by the sub-environment, terminal obs included
  bool auto_reset = false;        // the episode ended and a new one was started
  std::uint64_t next_seed = 0;    // seed of the new episode when auto_reset
  Observation next_observation;   // what the policy should act on next
};

// Synchronous vector of environments over one shared, read-only scorer.
// Results match N sequential single-environment calls with the same seeds.
class VectorEnv {
 public:
  VectorEnv(std::vector<AblationEnv> envs, std::uint64_t run_seed, std::size_t workers = 1);

  std::size_t size() const { return envs_.size(); }
  AblationEnv& env(std::size_t i) { return envs_.at(i); }
  const AblationEnv& env(std::size_t i) const { return envs_.at(i); }

  // Starts every sub-environment with the given seeds.
  std::vector<Observation> reset(std::span<const std::uint64_t> seeds);
  // Starts every sub-environment with the next seed of its stream.
  std::vector<Observation> reset();

  // One action per environment. A terminated environment auto-resets with
  // the next seed from its stream.
  std::vector<VectorStep> step(std::span<const int> actions);

  std::vector<std::vector<std::uint8_t>> action_masks() const;

  SeedStream& stream(std::size_t i) { return streams_.at(i); }
  const SeedStream& stream(std::size_t i) const { return streams_.at(i); }

 private:
  std::vector<AblationEnv> envs_;
  std::vector<SeedStream> streams_;
  std::size_t workers_;
};

}  // namespace circuitrl
