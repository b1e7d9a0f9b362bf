#include "circuitrl/ppo/rollout.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "circuitrl/ppo/gae.hpp"

namespace circuitrl {

RolloutCollector::RolloutCollector(VectorEnv& envs) : envs_(&envs) {}

void RolloutCollector::reset() {
  obs_ = envs_->reset();
  running_max_.assign(envs_->size(), -std::numeric_limits<double>::infinity());
  started_ = true;
}

void RolloutCollector::reset(std::span<const std::uint64_t> seeds) {
  obs_ = envs_->reset(seeds);
  running_max_.assign(envs_->size(), -std::numeric_limits<double>::infinity());
  started_ = true;
}

std::vector<std::uint64_t> RolloutCollector::current_seeds() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < envs_->size(); ++i) out.push_back(envs_->env(i).state().seed);
  return out;
}

RolloutBuffer RolloutCollector::collect(const PolicyParams& params, std::mt19937_64& rng, int horizon) {
  if (!started_) reset();
  if (horizon <= 0) throw std::invalid_argument("rollout horizon must be positive");
  const int n = static_cast<int>(envs_->size());

  RolloutBuffer buf;
  buf.n_envs = n;
  buf.horizon = horizon;
  buf.transitions.resize(static_cast<std::size_t>(n * horizon));
  buf.next_values.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<int> actions(static_cast<std::size_t>(n));
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      Transition& tr = buf.transitions[static_cast<std::size_t>(i * horizon + t)];
      tr.obs = obs_[static_cast<std::size_t>(i)].flatten();
      tr.mask = envs_->env(static_cast<std::size_t>(i)).action_mask();
      const PolicyOutput out = policy_forward(params, tr.obs, tr.mask);
      tr.action = sample_action(out.dist, rng);
      tr.log_prob = out.dist.log_probs[static_cast<std::size_t>(tr.action)];
      tr.value = out.value;
      actions[static_cast<std::size_t>(i)] = tr.action;
    }
    // Task and seed must be read before the step, which may auto-reset.
    std::vector<EpisodeSummary> live(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& st = envs_->env(static_cast<std::size_t>(i)).state();
      live[static_cast<std::size_t>(i)] = {st.seed, st.task, st.steps + 1, 0.0};
    }
    const std::vector<VectorStep> steps = envs_->step(actions);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Transition& tr = buf.transitions[static_cast<std::size_t>(i * horizon + t)];
      tr.reward = steps[ui].outcome.reward;
      tr.done = steps[ui].outcome.terminated;
      running_max_[ui] = std::max(running_max_[ui], tr.reward);
      if (tr.done) {
        live[ui].running_max = running_max_[ui];
        buf.finished.push_back(live[ui]);
        running_max_[ui] = -std::numeric_limits<double>::infinity();
      }
      obs_[ui] = steps[ui].next_observation;
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (buf.transitions[static_cast<std::size_t>(i * horizon + horizon - 1)].done) continue;
    const auto flat = obs_[ui].flatten();
    buf.next_values[ui] = policy_forward(params, flat, envs_->env(ui).action_mask()).value;
  }
  return buf;
}

void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda) {
  if (buffer.transitions.empty()) throw std::invalid_argument("cannot compute advantages of an empty buffer");
  buffer.advantages.assign(buffer.size(), 0.0);
  buffer.returns.assign(buffer.size(), 0.0);
  const auto h = static_cast<std::size_t>(buffer.horizon);
  std::vector<double> r(h), v(h);
  std::vector<int> d(h);
  for (int i = 0; i < buffer.n_envs; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * h;
    for (std::size_t t = 0; t < h; ++t) {
      const Transition& tr = buffer.transitions[base + t];
      r[t] = tr.reward;
      v[t] = tr.value;
      d[t] = tr.done ? 1 : 0;
    }
    const GaeResult g = compute_gae(r, v, d, buffer.next_values[static_cast<std::size_t>(i)], gamma, lambda);
    std::copy(g.advantages.begin(), g.advantages.end(), buffer.advantages.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy(g.returns.begin(), g.returns.end(), buffer.returns.begin() + static_cast<std::ptrdiff_t>(base));
  }
}

}  // namespace circuitrl
