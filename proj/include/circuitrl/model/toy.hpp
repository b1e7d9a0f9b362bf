#pragma once

#include <cstdint>

#include "circuitrl/model/model.hpp"

namespace circuitrl {

// 2 layers x 2 heads, d_model 8, vocab 11. Small enough that every model
// property can be checked without real weights.
ModelConfig toy_config();

// Deterministic Gaussian weights (std `scale`) with unit layer-norm gains.
ModelWeights random_toy_weights(const ModelConfig& cfg, std::uint64_t seed, float scale = 0.5f);

// Zeroes the value projection (weights and bias) of one head so that its z
// vectors, and hence its contribution, are identically zero.
void zero_value_projection(ModelWeights& weights, const ModelConfig& cfg, HeadIndex head);

}  // namespace circuitrl
