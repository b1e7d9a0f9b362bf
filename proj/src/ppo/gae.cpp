#include "circuitrl/ppo/gae.hpp"

#include <cmath>
#include <stdexcept>

namespace circuitrl {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const int> dones,
                      double next_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("GAE over an empty buffer");
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("GAE inputs differ in length");

  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double nonterminal = dones[k] ? 0.0 : 1.0;
    const double v_next = k + 1 < n ? values[k + 1] : next_value;
    const double delta = rewards[k] + gamma * v_next * nonterminal - values[k];
    running = delta + gamma * lambda * nonterminal * running;
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
  }
  return out;
}

std::vector<double> normalize_advantages(std::span<const double> advantages) {
  const std::size_t n = advantages.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = advantages[0] - mean;
    return out;
  }
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) out[i] = (advantages[i] - mean) / (sd + 1e-8);
  return out;
}

}  // namespace circuitrl
