#pragma once

#include <compare>
#include <optional>
#include <string>

namespace circuitrl {

struct ModelConfig {
  int n_layers = 12;
  int n_heads = 12;
  int d_model = 768;
  int d_head = 64;
  int d_mlp = 3072;
  int vocab_size = 50257;
  int max_positions = 1024;
  float layernorm_epsilon = 1e-5f;

  int n_actions() const { return n_layers * n_heads; }

  // Throws std::invalid_argument when dimensions are inconsistent
  // (d_head * n_heads != d_model, non-positive sizes).
  void validate() const;

  static ModelConfig gpt2_small() { return {}; }

  bool operator==(const ModelConfig&) const = default;
};

// One attention head, addressed either by flat action index or (layer, head).
// The flat index is layer * n_heads + head.
class HeadIndex {
 public:
  HeadIndex() = default;

  static HeadIndex from_action(int action, int n_layers = 12, int n_heads = 12);
  static HeadIndex at(int layer, int head, int n_layers = 12, int n_heads = 12);
  static HeadIndex from_action(int action, const ModelConfig& cfg) {
    return from_action(action, cfg.n_layers, cfg.n_heads);
  }
  // Parses labels of the form "L5.H5".
  static HeadIndex parse(const std::string& label, int n_layers = 12, int n_heads = 12);

  int action() const { return action_; }
  int layer() const { return layer_; }
  int head() const { return head_; }
  std::string label() const;

  auto operator<=>(const HeadIndex& other) const { return action_ <=> other.action_; }
  bool operator==(const HeadIndex& other) const { return action_ == other.action_; }

 private:
  HeadIndex(int action, int layer, int head) : action_(action), layer_(layer), head_(head) {}
  int action_ = 0;
  int layer_ = 0;
  int head_ = 0;
};

// Which head, if any, has its per-head attention output z zeroed before the
// output projection. Single head only; each forward pass starts from the
// intact weights.
struct AblationSpec {
  std::optional<HeadIndex> target;

  static AblationSpec intact() { return {}; }
  static AblationSpec zero_head(HeadIndex h) { return {h}; }
};

}  // namespace circuitrl
