#include "circuitrl/env/ablation_env.hpp"

#include <random>
#include <stdexcept>
#include <string>

#include "circuitrl/common.hpp"
#include "circuitrl/env/trace_log.hpp"
#include "circuitrl/model/forward.hpp"

namespace circuitrl {

double ModelScorer::task_metric(const TaskBatch& batch, const AblationSpec& ablation) const {
  return circuitrl::task_metric(*model_, batch.tokens, batch.metric, ablation);
}

double ModelScorer::control_loss(const ControlBatch& batch, const AblationSpec& ablation) const {
  return circuitrl::control_loss(*model_, batch.tokens, ablation);
}

void EnvConfig::validate(int n_actions) const {
  if (max_steps <= 0 || max_steps > n_actions) {
    throw std::invalid_argument("max_steps must lie in [1, n_actions]");
  }
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward_scale must be positive");
  if (training_tasks.empty()) throw std::invalid_argument("at least one training task is required");
}

std::vector<double> Observation::flatten() const {
  std::vector<double> out;
  out.reserve(dim());
  out.insert(out.end(), task_onehot.begin(), task_onehot.end());
  out.insert(out.end(), tried_mask.begin(), tried_mask.end());
  out.insert(out.end(), reward_channel.begin(), reward_channel.end());
  return out;
}

AblationEnv::AblationEnv(std::shared_ptr<const InterventionScorer> scorer, std::shared_ptr<const BatchSource> batches,
                         EnvConfig cfg)
    : scorer_(std::move(scorer)), batches_(std::move(batches)), cfg_(std::move(cfg)) {
  if (!scorer_ || !batches_) throw std::invalid_argument("environment needs a scorer and a batch source");
  n_actions_ = scorer_->n_actions();
  cfg_.validate(n_actions_);
}

HeadIndex AblationEnv::head(int action) const {
  return HeadIndex::from_action(action, scorer_->n_layers(), scorer_->n_heads());
}

Observation AblationEnv::reset(std::uint64_t seed, std::optional<TaskId> task_override,
                               std::optional<std::array<double, 2>> onehot_override) {
  TaskId task;
  if (task_override) {
    task = *task_override;
  } else {
    std::mt19937_64 rng(mix_seed(seed, seed_tag::kTaskChoice));
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.training_tasks.size() - 1);
    task = cfg_.training_tasks[pick(rng)];
  }

  EpisodeState s;
  s.task = task;
  s.onehot = onehot_override ? *onehot_override : task_onehot(task);
  s.seed = seed;
  s.task_batch = batches_->task_batch(task, seed);
  s.control_batch = batches_->control_batch(seed);
  s.baseline_metric = scorer_->task_metric(s.task_batch, AblationSpec::intact());
  s.baseline_ctrl = scorer_->control_loss(s.control_batch, AblationSpec::intact());
  s.tried.assign(static_cast<std::size_t>(n_actions_), 0);
  s.rewards.assign(static_cast<std::size_t>(n_actions_), 0.0);
  state_ = std::move(s);
  cache_.assign(static_cast<std::size_t>(n_actions_), std::nullopt);
  started_ = true;
  return observation();
}

void AblationEnv::check_action(int action) const {
  if (!started_) throw ContractViolation("step() called before reset()");
  if (action < 0 || action >= n_actions_) {
    throw ContractViolation("action " + std::to_string(action) + " outside [0, " + std::to_string(n_actions_) + ")");
  }
}

RewardBreakdown AblationEnv::compute(int action) const {
  const HeadIndex h = head(action);
  const AblationSpec ablation = AblationSpec::zero_head(h);
  RewardBreakdown r;
  r.action = h;
  r.baseline_metric = state_.baseline_metric;
  r.baseline_ctrl = state_.baseline_ctrl;
  r.task_damage = state_.baseline_metric - scorer_->task_metric(state_.task_batch, ablation);
  r.general_damage = scorer_->control_loss(state_.control_batch, ablation) - state_.baseline_ctrl;
  r.reward = r.task_damage - r.general_damage;
  return r;
}

RewardBreakdown AblationEnv::evaluate(int action) {
  check_action(action);
  auto& slot = cache_[static_cast<std::size_t>(action)];
  if (!slot) slot = compute(action);
  return *slot;
}

std::vector<RewardBreakdown> AblationEnv::evaluate_many(std::span<const int> actions, std::size_t workers) {
  for (int a : actions) check_action(a);
  std::vector<RewardBreakdown> out(actions.size());
  parallel_for(actions.size(), workers, [&](std::size_t i) {
    const auto& cached = cache_[static_cast<std::size_t>(actions[i])];
    out[i] = cached ? *cached : compute(actions[i]);
  });
  for (const auto& r : out) cache_[static_cast<std::size_t>(r.action.action())] = r;
  return out;
}

StepOutcome AblationEnv::step(int action) {
  check_action(action);
  if (terminated()) throw ContractViolation("step() after the episode terminated");
  if (state_.tried[static_cast<std::size_t>(action)]) {
    throw ContractViolation("action " + std::to_string(action) + " was already tried this episode");
  }
  const RewardBreakdown r = evaluate(action);
  const int step_index = state_.steps;
  state_.tried[static_cast<std::size_t>(action)] = 1;
  state_.rewards[static_cast<std::size_t>(action)] = r.reward;
  ++state_.steps;

  if (trace_) {
    trace_->write({state_.seed, state_.task, step_index, r});
  }
  return {observation(), r.reward, terminated(), r};
}

std::vector<std::uint8_t> AblationEnv::action_mask() const {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_actions_), 1);
  if (!started_) return mask;
  for (std::size_t a = 0; a < mask.size(); ++a) mask[a] = state_.tried[a] ? 0 : 1;
  return mask;
}

Observation AblationEnv::observation() const {
  Observation o;
  o.task_onehot = state_.onehot;
  o.tried_mask.assign(static_cast<std::size_t>(n_actions_), 0.0);
  o.reward_channel.assign(static_cast<std::size_t>(n_actions_), 0.0);
  if (!started_) return o;
  for (std::size_t a = 0; a < o.tried_mask.size(); ++a) {
    if (state_.tried[a]) {
      o.tried_mask[a] = 1.0;
      o.reward_channel[a] = state_.rewards[a] / cfg_.reward_scale;
    }
  }
  return o;
}

}  // namespace circuitrl
