#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace circuitrl {

struct PolicyShape {
  int obs_dim = 290;
  int hidden = 256;
  int n_actions = 144;

  static PolicyShape for_actions(int n_actions, int hidden = 256) { return {2 + 2 * n_actions, hidden, n_actions}; }
  bool operator==(const PolicyShape&) const = default;
};

// obs -> tanh(W1) -> tanh(W2) -> (policy logits, value). Weights are stored
// [out x in]; biases as row vectors.
struct PolicyParams {
  Eigen::MatrixXd w1;
  Eigen::RowVectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::RowVectorXd b2;
  Eigen::MatrixXd w_policy;
  Eigen::RowVectorXd b_policy;
  Eigen::MatrixXd w_value;
  Eigen::RowVectorXd b_value;

  static PolicyParams zeros(const PolicyShape& shape);
  PolicyShape shape() const;

  // Visits every tensor as a flat view, in a fixed order.
  void for_each(const std::function<void(std::string_view, Eigen::Map<Eigen::VectorXd>)>& fn);
  void for_each(const std::function<void(std::string_view, Eigen::Map<const Eigen::VectorXd>)>& fn) const;

  std::size_t num_parameters() const;
};

// Orthogonal initialisation: hidden layers gain sqrt(2), policy head 0.01,
// value head 1.0, zero biases. Rows of each weight are orthonormal up to the gain.
PolicyParams init_params(std::uint64_t seed, const PolicyShape& shape = {});

struct ActionDistribution {
  std::vector<double> masked_logits;  // raw logits with -1e9 added on illegal actions
  std::vector<double> probs;
  std::vector<double> log_probs;
};

struct PolicyOutput {
  ActionDistribution dist;
  double value = 0.0;
};

// Throws ContractViolation when the mask has no legal action.
PolicyOutput policy_forward(const PolicyParams& params, std::span<const double> obs,
                            std::span<const std::uint8_t> mask);

int sample_action(const ActionDistribution& dist, std::mt19937_64& rng);

// Batched evaluation of given actions with the cache needed for an exact
// backward pass. Rows of `obs` / `masks` are transitions.
class ActionEvaluation {
 public:
  ActionEvaluation(const PolicyParams& params, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& masks,
                   std::span<const int> actions);

  const Eigen::VectorXd& log_probs() const { return log_prob_taken_; }
  const Eigen::VectorXd& entropies() const { return entropy_; }
  const Eigen::VectorXd& values() const { return value_; }
  const Eigen::MatrixXd& probs() const { return probs_; }

  // Gradient of sum_i (d_logp[i] * logp[i] + d_entropy[i] * H[i] + d_value[i] * v[i])
  // with respect to every parameter.
  PolicyParams backward(const Eigen::VectorXd& d_logp, const Eigen::VectorXd& d_entropy,
                        const Eigen::VectorXd& d_value) const;

 private:
  const PolicyParams* params_;
  Eigen::MatrixXd obs_, h1_, h2_, probs_, log_probs_;
  std::vector<int> actions_;
  Eigen::VectorXd log_prob_taken_, entropy_, value_;
};

}  // namespace circuitrl
