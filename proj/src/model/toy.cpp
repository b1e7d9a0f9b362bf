#include "circuitrl/model/toy.hpp"

#include <random>

namespace circuitrl {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 8;
  cfg.d_head = 4;
  cfg.d_mlp = 16;
  cfg.vocab_size = 11;
  cfg.max_positions = 64;
  return cfg;
}

ModelWeights random_toy_weights(const ModelConfig& cfg, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, scale);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model), m = static_cast<std::size_t>(cfg.d_mlp);
  auto gaussian = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  auto constant = [](std::size_t n, float value) { return std::vector<float>(n, value); };

  ModelWeights w;
  w.token_embedding = gaussian(static_cast<std::size_t>(cfg.vocab_size) * d);
  w.position_embedding = gaussian(static_cast<std::size_t>(cfg.max_positions) * d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerWeights lw;
    lw.ln1_gain = constant(d, 1.0f);
    lw.ln1_bias = constant(d, 0.0f);
    lw.qkv_weight = gaussian(d * 3 * d);
    lw.qkv_bias = gaussian(3 * d);
    lw.out_weight = gaussian(d * d);
    lw.out_bias = gaussian(d);
    lw.ln2_gain = constant(d, 1.0f);
    lw.ln2_bias = constant(d, 0.0f);
    lw.fc_weight = gaussian(d * m);
    lw.fc_bias = gaussian(m);
    lw.proj_weight = gaussian(m * d);
    lw.proj_bias = gaussian(d);
    w.layers.push_back(std::move(lw));
  }
  w.final_gain = constant(d, 1.0f);
  w.final_bias = constant(d, 0.0f);
  return w;
}

void zero_value_projection(ModelWeights& weights, const ModelConfig& cfg, HeadIndex head) {
  const std::size_t d = static_cast<std::size_t>(cfg.d_model), dh = static_cast<std::size_t>(cfg.d_head);
  LayerWeights& lw = weights.layers.at(static_cast<std::size_t>(head.layer()));
  const std::size_t col0 = 2 * d + static_cast<std::size_t>(head.head()) * dh;
  for (std::size_t row = 0; row < d; ++row) {
    for (std::size_t c = 0; c < dh; ++c) lw.qkv_weight[row * 3 * d + col0 + c] = 0.0f;
  }
  for (std::size_t c = 0; c < dh; ++c) lw.qkv_bias[col0 + c] = 0.0f;
}

}  // namespace circuitrl
