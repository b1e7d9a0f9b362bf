#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "circuitrl/env/scorer.hpp"
#include "circuitrl/tasks/task_suite.hpp"

namespace circuitrl {

class TraceWriter;

struct EnvConfig {
  int max_steps = 50;
  double reward_scale = 5.0;  // reward channel holds r(a) / reward_scale
  std::uint64_t eval_seed_floor = 10'000'000;
  std::vector<TaskId> training_tasks{TaskId::Induction, TaskId::IOI};

  void validate(int n_actions) const;
};

struct Observation {
  std::array<double, 2> task_onehot{};
  std::vector<double> tried_mask;
  std::vector<double> reward_channel;

  std::size_t dim() const { return 2 + tried_mask.size() + reward_channel.size(); }
  // [onehot | tried mask | reward channel]
  std::vector<double> flatten() const;
  bool operator==(const Observation&) const = default;
};

// Terms of one single-head ablation on the current episode's batches.
struct RewardBreakdown {
  HeadIndex action;
  double task_damage = 0.0;     // M(B) - M_ablated(B)
  double general_damage = 0.0;  // L_ablated(C) - L(C)
  double reward = 0.0;          // task_damage - general_damage
  double baseline_metric = 0.0;
  double baseline_ctrl = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  RewardBreakdown info;
};

struct EpisodeState {
  TaskId task = TaskId::Induction;
  std::array<double, 2> onehot{};
  TaskBatch task_batch;
  ControlBatch control_batch;
  double baseline_metric = 0.0;
  double baseline_ctrl = 0.0;
  std::vector<std::uint8_t> tried;
  std::vector<double> rewards;  // raw r(a) for tried actions, 0 elsewhere
  int steps = 0;
  std::uint64_t seed = 0;
};

// Single-head ablation MDP. reset() samples a task (unless overridden),
// rebuilds the episode batches from the seed and evaluates the intact
// baselines once; step() ablates one untried head and returns the
// contrastive reward. Ablations never persist between steps.
class AblationEnv {
 public:
  AblationEnv(std::shared_ptr<const InterventionScorer> scorer, std::shared_ptr<const BatchSource> batches,
              EnvConfig cfg = {});

  Observation reset(std::uint64_t seed, std::optional<TaskId> task_override = std::nullopt,
                    std::optional<std::array<double, 2>> onehot_override = std::nullopt);

  // Throws ContractViolation for repeated actions, steps after termination,
  // or stepping before reset.
  StepOutcome step(int action);
  StepOutcome step(HeadIndex action) { return step(action.action()); }

  // Reward of ablating `action` on this episode's batches without advancing
  // the episode. Results are cached until the next reset.
  RewardBreakdown evaluate(int action);
  // Evaluates several actions, up to `workers` at a time. Output order
  // follows `actions`.
  std::vector<RewardBreakdown> evaluate_many(std::span<const int> actions, std::size_t workers = 1);

  std::vector<std::uint8_t> action_mask() const;
  Observation observation() const;
  const EpisodeState& state() const { return state_; }
  bool has_episode() const { return started_; }
  bool terminated() const { return started_ && state_.steps >= cfg_.max_steps; }
  int n_actions() const { return n_actions_; }
  const EnvConfig& config() const { return cfg_; }
  HeadIndex head(int action) const;

  // Optional per-step JSONL trace; the writer must outlive the env.
  void set_trace(TraceWriter* trace) { trace_ = trace; }

 private:
  RewardBreakdown compute(int action) const;
  void check_action(int action) const;

  std::shared_ptr<const InterventionScorer> scorer_;
  std::shared_ptr<const BatchSource> batches_;
  EnvConfig cfg_;
  int n_actions_ = 0;
  bool started_ = false;
  EpisodeState state_;
  std::vector<std::optional<RewardBreakdown>> cache_;
  TraceWriter* trace_ = nullptr;
};

}  // namespace circuitrl
