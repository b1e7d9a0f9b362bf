#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "circuitrl/model/config.hpp"
#include "circuitrl/model/safetensors.hpp"

namespace circuitrl {

// Affine weights are stored [in x out] so every projection is y = x W + b.
struct LayerWeights {
  std::vector<float> ln1_gain, ln1_bias;       // [d_model]
  std::vector<float> qkv_weight, qkv_bias;     // [d_model x 3 d_model], [3 d_model]; q | k | v
  std::vector<float> out_weight, out_bias;     // [d_model x d_model], [d_model]  (W_O, b_O)
  std::vector<float> ln2_gain, ln2_bias;       // [d_model]
  std::vector<float> fc_weight, fc_bias;       // [d_model x d_mlp], [d_mlp]
  std::vector<float> proj_weight, proj_bias;   // [d_mlp x d_model], [d_model]
};

struct ModelWeights {
  std::vector<float> token_embedding;     // [vocab x d_model], also the unembedding
  std::vector<float> position_embedding;  // [max_positions x d_model]
  std::vector<LayerWeights> layers;
  std::vector<float> final_gain, final_bias;  // [d_model]
};

struct TensorManifestEntry {
  std::string name;
  std::vector<std::int64_t> shape;
};

// The documented tensor-name manifest of the weight file, in load order.
std::vector<TensorManifestEntry> weight_manifest(const ModelConfig& cfg);

// Immutable GPT-2 style decoder. Construction validates every tensor shape
// against the config and rejects non-finite values.
class Model {
 public:
  Model(ModelConfig config, ModelWeights weights);

  const ModelConfig& config() const { return config_; }
  const ModelWeights& weights() const { return *weights_; }

  // Builds a model from manifest-named tensors. Errors name the offending
  // tensor (missing, wrong shape, wrong dtype, non-finite).
  static Model from_tensors(const ModelConfig& cfg, const std::map<std::string, StoredTensor>& tensors);

  // Manifest-named F32 tensors plus config metadata, ready for write_safetensors.
  SafetensorsFile to_safetensors() const;

 private:
  ModelConfig config_;
  std::shared_ptr<const ModelWeights> weights_;
};

// Loads and validates against `expected` (GPT-2 small by default).
Model load_model(const std::filesystem::path& weights_path,
                 const ModelConfig& expected = ModelConfig::gpt2_small());

// Reads the config from the file's metadata and tensor shapes instead of
// assuming GPT-2 small. Used for small test fixtures.
ModelConfig infer_config(const SafetensorsFile& file);
Model load_model_inferred(const std::filesystem::path& weights_path);

}  // namespace circuitrl
