#include "circuitrl/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "circuitrl/common.hpp"
#include "circuitrl/ppo/gae.hpp"

namespace circuitrl {

void PPOHyperparams::validate() const {
  if (gamma < 0 || gae_lambda < 0 || clip < 0 || ent_coef < 0 || vf_coef < 0 || max_grad_norm < 0) {
    throw std::invalid_argument("PPO coefficients must be non-negative");
  }
  if (epochs <= 0 || minibatches <= 0 || n_envs <= 0 || horizon <= 0) {
    throw std::invalid_argument("epochs, minibatches, n_envs and horizon must be positive");
  }
  if (rollout_size() % minibatches != 0) {
    throw std::invalid_argument("rollout of " + std::to_string(rollout_size()) + " transitions does not split into " +
                                std::to_string(minibatches) + " equal minibatches");
  }
  if (total_steps < rollout_size()) throw std::invalid_argument("total_steps is smaller than one rollout");
  if (!(learning_rate > 0) || final_lr_fraction < 0) throw std::invalid_argument("invalid learning-rate schedule");
}

MinibatchLoss ppo_loss(const Eigen::VectorXd& new_lp, const Eigen::VectorXd& old_lp, const Eigen::VectorXd& adv,
                       const Eigen::VectorXd& ent, const Eigen::VectorXd& values, const Eigen::VectorXd& returns,
                       const PPOHyperparams& hp) {
  const Eigen::Index n = new_lp.size();
  if (n == 0) throw std::invalid_argument("empty minibatch");
  if (old_lp.size() != n || adv.size() != n || ent.size() != n || values.size() != n || returns.size() != n) {
    throw std::invalid_argument("minibatch vectors differ in length");
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  MinibatchLoss out;
  out.d_logp = Eigen::VectorXd::Zero(n);
  out.d_entropy = Eigen::VectorXd::Constant(n, -hp.ent_coef * inv_n);
  out.d_value = Eigen::VectorXd::Zero(n);
  LossTerms& t = out.terms;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double log_ratio = new_lp(i) - old_lp(i);
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - hp.clip, 1.0 + hp.clip);
    const double unclipped_obj = ratio * adv(i);
    const double clipped_obj = clipped * adv(i);
    if (unclipped_obj <= clipped_obj) {
      t.policy_loss -= unclipped_obj;
      out.d_logp(i) = -unclipped_obj * inv_n;  // d(ratio)/d(logp) = ratio
    } else {
      t.policy_loss -= clipped_obj;
    }
    const double err = values(i) - returns(i);
    t.value_loss += err * err;
    out.d_value(i) = hp.vf_coef * 2.0 * err * inv_n;
    t.entropy += ent(i);
    if (std::abs(ratio - 1.0) > hp.clip) t.clip_frac += 1.0;
    t.approx_kl += (ratio - 1.0) - log_ratio;
  }
  t.policy_loss *= inv_n;
  t.value_loss *= inv_n;
  t.entropy *= inv_n;
  t.clip_frac *= inv_n;
  t.approx_kl *= inv_n;
  t.total = t.policy_loss + hp.vf_coef * t.value_loss - hp.ent_coef * t.entropy;
  return out;
}

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer, const PPOHyperparams& hp,
                       double lr, std::mt19937_64& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) throw std::invalid_argument("PPO update on an empty buffer");
  if (buffer.advantages.size() != n || buffer.returns.size() != n) {
    throw std::invalid_argument("advantages have not been computed for this buffer");
  }
  if (n % static_cast<std::size_t>(hp.minibatches) != 0) {
    throw std::invalid_argument("buffer does not split into equal minibatches");
  }
  const std::vector<double> adv =
      hp.normalize_advantages ? normalize_advantages(buffer.advantages) : buffer.advantages;

  const PolicyShape shape = params.shape();
  const std::size_t mb = n / static_cast<std::size_t>(hp.minibatches);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  Eigen::MatrixXd obs(static_cast<Eigen::Index>(mb), shape.obs_dim);
  Eigen::MatrixXd masks(static_cast<Eigen::Index>(mb), shape.n_actions);
  Eigen::VectorXd old_lp(mb), a(mb), ret(mb);
  std::vector<int> actions(mb);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int b = 0; b < hp.minibatches; ++b) {
      for (std::size_t j = 0; j < mb; ++j) {
        const std::size_t idx = order[static_cast<std::size_t>(b) * mb + j];
        const Transition& tr = buffer.transitions[idx];
        const auto row = static_cast<Eigen::Index>(j);
        obs.row(row) = Eigen::Map<const Eigen::RowVectorXd>(tr.obs.data(), shape.obs_dim);
        for (int k = 0; k < shape.n_actions; ++k) masks(row, k) = tr.mask[static_cast<std::size_t>(k)];
        actions[j] = tr.action;
        old_lp(row) = tr.log_prob;
        a(row) = adv[idx];
        ret(row) = buffer.returns[idx];
      }
      const ActionEvaluation eval(params, obs, masks, actions);
      const MinibatchLoss loss = ppo_loss(eval.log_probs(), old_lp, a, eval.entropies(), eval.values(), ret, hp);
      if (!std::isfinite(loss.terms.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << " minibatch " << b << ": policy " << loss.terms.policy_loss
            << ", value " << loss.terms.value_loss << ", entropy " << loss.terms.entropy;
        throw NumericError(msg.str());
      }
      if (epoch == 0 && b == 0) {
        stats.first_ratio_max_dev = ((eval.log_probs() - old_lp).array().exp() - 1.0).abs().maxCoeff();
      }
      PolicyParams grads = eval.backward(loss.d_logp, loss.d_entropy, loss.d_value);
      stats.grad_norm += clip_grad_norm(grads, hp.max_grad_norm);
      adam_step(params, grads, adam, lr);

      stats.policy_loss += loss.terms.policy_loss;
      stats.value_loss += loss.terms.value_loss;
      stats.entropy += loss.terms.entropy;
      stats.clip_frac += loss.terms.clip_frac;
      stats.approx_kl += loss.terms.approx_kl;
      ++stats.optimizer_steps;
    }
  }
  const double k = static_cast<double>(stats.optimizer_steps);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.clip_frac /= k;
  stats.approx_kl /= k;
  stats.grad_norm /= k;
  return stats;
}

}  // namespace circuitrl
