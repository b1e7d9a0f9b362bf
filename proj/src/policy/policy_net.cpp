#include "circuitrl/policy/policy_net.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "circuitrl/common.hpp"

namespace circuitrl {

namespace {

constexpr double kMaskPenalty = -1e9;

template <class T>
auto flat(T& m) {
  using Scalar = std::remove_reference_t<decltype(*m.data())>;
  if constexpr (std::is_const_v<Scalar>) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  } else {
    return Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
  }
}

Eigen::MatrixXd orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool transpose = rows < cols;
  const int r = transpose ? cols : rows;
  const int c = transpose ? rows : cols;
  Eigen::MatrixXd a(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd upper = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (upper(j, j) < 0) q.col(j) *= -1.0;
  }
  if (transpose) q.transposeInPlace();
  return gain * q;
}

// Log-softmax of the masked logits of one row.
void masked_log_softmax(const double* logits, const std::uint8_t* mask, int n, double* masked, double* log_probs,
                        double* probs) {
  double hi = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int k = 0; k < n; ++k) {
    masked[k] = logits[k] + (mask[k] ? 0.0 : kMaskPenalty);
    if (mask[k]) any = true;
    hi = std::max(hi, masked[k]);
  }
  if (!any) throw ContractViolation("action mask has no legal action");
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += std::exp(masked[k] - hi);
  const double lse = hi + std::log(sum);
  for (int k = 0; k < n; ++k) {
    log_probs[k] = masked[k] - lse;
    probs[k] = std::exp(log_probs[k]);
  }
}

}  // namespace

PolicyParams PolicyParams::zeros(const PolicyShape& s) {
  PolicyParams p;
  p.w1 = Eigen::MatrixXd::Zero(s.hidden, s.obs_dim);
  p.b1 = Eigen::RowVectorXd::Zero(s.hidden);
  p.w2 = Eigen::MatrixXd::Zero(s.hidden, s.hidden);
  p.b2 = Eigen::RowVectorXd::Zero(s.hidden);
  p.w_policy = Eigen::MatrixXd::Zero(s.n_actions, s.hidden);
  p.b_policy = Eigen::RowVectorXd::Zero(s.n_actions);
  p.w_value = Eigen::MatrixXd::Zero(1, s.hidden);
  p.b_value = Eigen::RowVectorXd::Zero(1);
  return p;
}

PolicyShape PolicyParams::shape() const {
  return {static_cast<int>(w1.cols()), static_cast<int>(w1.rows()), static_cast<int>(w_policy.rows())};
}

void PolicyParams::for_each(const std::function<void(std::string_view, Eigen::Map<Eigen::VectorXd>)>& fn) {
  fn("w1", flat(w1));
  fn("b1", flat(b1));
  fn("w2", flat(w2));
  fn("b2", flat(b2));
  fn("w_policy", flat(w_policy));
  fn("b_policy", flat(b_policy));
  fn("w_value", flat(w_value));
  fn("b_value", flat(b_value));
}

void PolicyParams::for_each(
    const std::function<void(std::string_view, Eigen::Map<const Eigen::VectorXd>)>& fn) const {
  fn("w1", flat(w1));
  fn("b1", flat(b1));
  fn("w2", flat(w2));
  fn("b2", flat(b2));
  fn("w_policy", flat(w_policy));
  fn("b_policy", flat(b_policy));
  fn("w_value", flat(w_value));
  fn("b_value", flat(b_value));
}

std::size_t PolicyParams::num_parameters() const {
  std::size_t n = 0;
  for_each([&](std::string_view, Eigen::Map<const Eigen::VectorXd> t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

PolicyParams init_params(std::uint64_t seed, const PolicyShape& s) {
  if (s.obs_dim <= 0 || s.hidden <= 0 || s.n_actions <= 0) throw std::invalid_argument("policy shape must be positive");
  std::mt19937_64 rng(seed);
  PolicyParams p = PolicyParams::zeros(s);
  p.w1 = orthogonal(s.hidden, s.obs_dim, std::sqrt(2.0), rng);
  p.w2 = orthogonal(s.hidden, s.hidden, std::sqrt(2.0), rng);
  p.w_policy = orthogonal(s.n_actions, s.hidden, 0.01, rng);
  p.w_value = orthogonal(1, s.hidden, 1.0, rng);
  return p;
}

PolicyOutput policy_forward(const PolicyParams& p, std::span<const double> obs, std::span<const std::uint8_t> mask) {
  const PolicyShape s = p.shape();
  if (static_cast<int>(obs.size()) != s.obs_dim) {
    throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " entries, policy expects " +
                                std::to_string(s.obs_dim));
  }
  if (static_cast<int>(mask.size()) != s.n_actions) throw std::invalid_argument("mask size does not match actions");
  const Eigen::Map<const Eigen::RowVectorXd> x(obs.data(), s.obs_dim);
  const Eigen::RowVectorXd h1 = (x * p.w1.transpose() + p.b1).array().tanh().matrix();
  const Eigen::RowVectorXd h2 = (h1 * p.w2.transpose() + p.b2).array().tanh().matrix();
  const Eigen::RowVectorXd logits = h2 * p.w_policy.transpose() + p.b_policy;

  PolicyOutput out;
  out.value = (h2 * p.w_value.transpose() + p.b_value)(0);
  out.dist.masked_logits.resize(s.n_actions);
  out.dist.log_probs.resize(s.n_actions);
  out.dist.probs.resize(s.n_actions);
  masked_log_softmax(logits.data(), mask.data(), s.n_actions, out.dist.masked_logits.data(),
                     out.dist.log_probs.data(), out.dist.probs.data());
  return out;
}

int sample_action(const ActionDistribution& dist, std::mt19937_64& rng) {
  std::discrete_distribution<int> pick(dist.probs.begin(), dist.probs.end());
  return pick(rng);
}

ActionEvaluation::ActionEvaluation(const PolicyParams& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& masks,
                                   std::span<const int> actions)
    : params_(&p), obs_(obs), actions_(actions.begin(), actions.end()) {
  const PolicyShape s = p.shape();
  const Eigen::Index n = obs.rows();
  if (obs.cols() != s.obs_dim || masks.rows() != n || masks.cols() != s.n_actions ||
      static_cast<Eigen::Index>(actions.size()) != n) {
    throw std::invalid_argument("inconsistent batch shapes for action evaluation");
  }
  h1_ = ((obs * p.w1.transpose()).rowwise() + p.b1).array().tanh().matrix();
  h2_ = ((h1_ * p.w2.transpose()).rowwise() + p.b2).array().tanh().matrix();
  const Eigen::MatrixXd logits = (h2_ * p.w_policy.transpose()).rowwise() + p.b_policy;
  value_ = ((h2_ * p.w_value.transpose()).rowwise() + p.b_value).col(0);

  probs_.resize(n, s.n_actions);
  log_probs_.resize(n, s.n_actions);
  log_prob_taken_.resize(n);
  entropy_.resize(n);
  std::vector<double> row_logits(s.n_actions), masked(s.n_actions), lp(s.n_actions), pr(s.n_actions);
  std::vector<std::uint8_t> row_mask(s.n_actions);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < s.n_actions; ++k) {
      row_logits[k] = logits(i, k);
      row_mask[k] = masks(i, k) != 0.0 ? 1 : 0;
    }
    masked_log_softmax(row_logits.data(), row_mask.data(), s.n_actions, masked.data(), lp.data(), pr.data());
    const int a = actions_[static_cast<std::size_t>(i)];
    if (a < 0 || a >= s.n_actions || !row_mask[a]) {
      throw ContractViolation("action " + std::to_string(a) + " is not legal under its mask");
    }
    double h = 0.0;
    for (int k = 0; k < s.n_actions; ++k) {
      probs_(i, k) = pr[k];
      log_probs_(i, k) = lp[k];
      if (pr[k] > 0.0) h -= pr[k] * lp[k];
    }
    entropy_(i) = h;
    log_prob_taken_(i) = lp[a];
  }
}

PolicyParams ActionEvaluation::backward(const Eigen::VectorXd& d_logp, const Eigen::VectorXd& d_entropy,
                                        const Eigen::VectorXd& d_value) const {
  const PolicyParams& p = *params_;
  const Eigen::Index n = obs_.rows();
  if (d_logp.size() != n || d_entropy.size() != n || d_value.size() != n) {
    throw std::invalid_argument("upstream gradient size does not match the batch");
  }

  // dlogp_a/dz = onehot(a) - p ; dH/dz_k = -p_k (log p_k + H)
  Eigen::MatrixXd dz(n, probs_.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < probs_.cols(); ++k) {
      const double pk = probs_(i, k);
      const double ent = pk > 0.0 ? -pk * (log_probs_(i, k) + entropy_(i)) : 0.0;
      dz(i, k) = -d_logp(i) * pk + d_entropy(i) * ent;
    }
    dz(i, actions_[static_cast<std::size_t>(i)]) += d_logp(i);
  }

  PolicyParams g;
  g.w_policy = dz.transpose() * h2_;
  g.b_policy = dz.colwise().sum();
  g.w_value = d_value.transpose() * h2_;
  g.b_value = Eigen::RowVectorXd::Constant(1, d_value.sum());

  const Eigen::MatrixXd dh2 = dz * p.w_policy + d_value * p.w_value;
  const Eigen::MatrixXd da2 = dh2.array() * (1.0 - h2_.array().square());
  g.w2 = da2.transpose() * h1_;
  g.b2 = da2.colwise().sum();

  const Eigen::MatrixXd dh1 = da2 * p.w2;
  const Eigen::MatrixXd da1 = dh1.array() * (1.0 - h1_.array().square());
  g.w1 = da1.transpose() * obs_;
  g.b1 = da1.colwise().sum();
  return g;
}

}  // namespace circuitrl
