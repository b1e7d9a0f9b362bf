#include "circuitrl/env/vector_env.hpp"

#include <stdexcept>

#include "circuitrl/common.hpp"

namespace circuitrl {

SeedStream::SeedStream(std::uint64_t run_seed, std::size_t env_index, std::uint64_t ceiling)
    : base_(mix_seed(run_seed, seed_tag::kEnvStream + env_index)), ceiling_(ceiling) {
  if (ceiling_ == 0) throw std::invalid_argument("seed ceiling must be positive");
}

std::uint64_t SeedStream::next() { return mix_seed(base_, counter_++) % ceiling_; }

VectorEnv::VectorEnv(std::vector<AblationEnv> envs, std::uint64_t run_seed, std::size_t workers)
    : envs_(std::move(envs)), workers_(workers) {
  if (envs_.empty()) throw std::invalid_argument("vector environment needs at least one environment");
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    streams_.emplace_back(run_seed, i, envs_[i].config().eval_seed_floor);
  }
}

std::vector<Observation> VectorEnv::reset(std::span<const std::uint64_t> seeds) {
  if (seeds.size() != envs_.size()) throw std::invalid_argument("one seed per environment is required");
  std::vector<Observation> out(envs_.size());
  parallel_for(envs_.size(), workers_, [&](std::size_t i) { out[i] = envs_[i].reset(seeds[i]); });
  return out;
}

std::vector<Observation> VectorEnv::reset() {
  std::vector<std::uint64_t> seeds;
  for (auto& s : streams_) seeds.push_back(s.next());
  return reset(seeds);
}

std::vector<VectorStep> VectorEnv::step(std::span<const int> actions) {
  if (actions.size() != envs_.size()) throw std::invalid_argument("one action per environment is required");
  std::vector<VectorStep> out(envs_.size());
  // Stream seeds are drawn up front so the result does not depend on scheduling.
  std::vector<std::uint64_t> next_seeds(envs_.size(), 0);
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    const auto& st = envs_[i].state();
    if (envs_[i].has_episode() && st.steps + 1 >= envs_[i].config().max_steps) next_seeds[i] = streams_[i].next();
  }
  parallel_for(envs_.size(), workers_, [&](std::size_t i) {
    VectorStep& vs = out[i];
    vs.outcome = envs_[i].step(actions[i]);
    if (vs.outcome.terminated) {
      vs.auto_reset = true;
      vs.next_seed = next_seeds[i];
      vs.next_observation = envs_[i].reset(next_seeds[i]);
    } else {
      vs.next_observation = vs.outcome.observation;
    }
  });
  return out;
}

std::vector<std::vector<std::uint8_t>> VectorEnv::action_masks() const {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& e : envs_) out.push_back(e.action_mask());
  return out;
}

}  // namespace circuitrl
