#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "circuitrl/policy/adam.hpp"
#include "circuitrl/ppo/rollout.hpp"

namespace circuitrl {

struct PPOHyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double ent_coef = 0.1;
  double vf_coef = 0.5;
  int epochs = 4;
  int minibatches = 8;
  int n_envs = 8;
  int horizon = 50;  // steps per env per rollout
  std::int64_t total_steps = 200'000;
  double learning_rate = 2.5e-4;
  double final_lr_fraction = 0.2;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;

  int rollout_size() const { return n_envs * horizon; }
  std::int64_t n_updates() const { return total_steps / rollout_size(); }
  LinearSchedule schedule() const { return {learning_rate, final_lr_fraction, n_updates()}; }
  // Throws std::invalid_argument for negative coefficients or a rollout
  // that does not split into equal minibatches.
  void validate() const;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mean squared error, before vf_coef
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double total = 0.0;  // policy_loss + vf_coef * value_loss - ent_coef * entropy
};

// Clipped-surrogate loss of one minibatch together with its derivatives
// with respect to the per-sample log-probs, entropies and values.
struct MinibatchLoss {
  LossTerms terms;
  Eigen::VectorXd d_logp;
  Eigen::VectorXd d_entropy;
  Eigen::VectorXd d_value;
};

MinibatchLoss ppo_loss(const Eigen::VectorXd& new_log_probs, const Eigen::VectorXd& old_log_probs,
                       const Eigen::VectorXd& advantages, const Eigen::VectorXd& entropies,
                       const Eigen::VectorXd& values, const Eigen::VectorXd& returns, const PPOHyperparams& hp);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;          // mean pre-clip norm
  double first_ratio_max_dev = 0.0;  // max |ratio - 1| on the very first minibatch
  int optimizer_steps = 0;
};

// Epochs x shuffled minibatches with one Adam step each. Advantages are
// normalised over the whole buffer first when hp.normalize_advantages.
// Throws NumericError on a non-finite loss.
UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer, const PPOHyperparams& hp,
                       double lr, std::mt19937_64& rng);

}  // namespace circuitrl
