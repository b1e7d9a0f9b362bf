#pragma once

#include <cstdint>

#include "circuitrl/policy/policy_net.hpp"

namespace circuitrl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  PolicyParams m;
  PolicyParams v;
  std::int64_t step = 0;

  static AdamState zeros(const PolicyShape& shape);
};

// One bias-corrected Adam step. Throws NumericError, leaving params and state
// untouched, if any gradient entry is non-finite.
void adam_step(PolicyParams& params, const PolicyParams& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(PolicyParams& grads, double max_norm);

// Linear decay from `initial` to `initial * final_fraction`, reached on the
// last update.
struct LinearSchedule {
  double initial = 2.5e-4;
  double final_fraction = 0.2;
  std::int64_t total_updates = 500;

  double rate(std::int64_t update) const;
};

}  // namespace circuitrl
