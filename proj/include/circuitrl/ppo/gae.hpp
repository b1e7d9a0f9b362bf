#pragma once

#include <span>
#include <vector>

namespace circuitrl {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// Generalised advantage estimation over one environment's contiguous
// transitions. dones[t] != 0 means the episode ended after step t, so no
// value is bootstrapped across it. `next_value` is V of the state following
// the last transition (ignored if that transition is terminal).
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const int> dones,
                      double next_value, double gamma, double lambda);

// Zero mean, unit (population) standard deviation with 1e-8 added to the
// denominator. A single element is only centred.
std::vector<double> normalize_advantages(std::span<const double> advantages);

}  // namespace circuitrl
