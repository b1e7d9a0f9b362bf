#include "circuitrl/policy/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "circuitrl/common.hpp"

namespace circuitrl {

AdamState AdamState::zeros(const PolicyShape& shape) {
  return {PolicyParams::zeros(shape), PolicyParams::zeros(shape), 0};
}

namespace {

std::vector<Eigen::Map<Eigen::VectorXd>> views(PolicyParams& p) {
  std::vector<Eigen::Map<Eigen::VectorXd>> out;
  p.for_each([&](std::string_view, Eigen::Map<Eigen::VectorXd> t) { out.push_back(t); });
  return out;
}

std::vector<Eigen::Map<const Eigen::VectorXd>> views(const PolicyParams& p) {
  std::vector<Eigen::Map<const Eigen::VectorXd>> out;
  p.for_each([&](std::string_view, Eigen::Map<const Eigen::VectorXd> t) { out.push_back(t); });
  return out;
}

}  // namespace

void adam_step(PolicyParams& params, const PolicyParams& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  if (!(params.shape() == grads.shape()) || !(params.shape() == state.m.shape())) {
    throw std::invalid_argument("Adam: parameter, gradient and state shapes differ");
  }
  auto g = views(grads);
  for (const auto& t : g) {
    if (!t.allFinite()) throw NumericError("non-finite gradient; update skipped");
  }
  auto p = views(params);
  auto m = views(state.m);
  auto v = views(state.v);

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double step_size = lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i].cwiseProduct(g[i]);
    const Eigen::ArrayXd denom = v[i].array().sqrt() / sqrt_bc2 + cfg.eps;
    p[i].array() -= step_size * m[i].array() / denom;
  }
}

double clip_grad_norm(PolicyParams& grads, double max_norm) {
  auto g = views(grads);
  double sq = 0.0;
  for (const auto& t : g) sq += t.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& t : g) t *= scale;
  }
  return norm;
}

double LinearSchedule::rate(std::int64_t update) const {
  if (total_updates <= 1) return initial;
  if (update < 0 || update >= total_updates) {
    throw std::out_of_range("update " + std::to_string(update) + " outside the schedule");
  }
  const double u = static_cast<double>(update) / static_cast<double>(total_updates - 1);
  return initial * (1.0 - (1.0 - final_fraction) * u);
}

}  // namespace circuitrl
