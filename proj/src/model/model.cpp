#include "circuitrl/model/model.hpp"

#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "circuitrl/common.hpp"

namespace circuitrl {

void ModelConfig::validate() const {
  if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || d_head <= 0 || d_mlp <= 0 || vocab_size <= 0 ||
      max_positions <= 0) {
    throw std::invalid_argument("model config dimensions must be positive");
  }
  if (d_head * n_heads != d_model) {
    throw std::invalid_argument("model config requires d_head * n_heads == d_model");
  }
  if (!(layernorm_epsilon > 0.0f)) throw std::invalid_argument("layernorm epsilon must be positive");
}

HeadIndex HeadIndex::from_action(int action, int n_layers, int n_heads) {
  if (action < 0 || action >= n_layers * n_heads) {
    throw std::out_of_range("action " + std::to_string(action) + " outside [0, " +
                            std::to_string(n_layers * n_heads) + ")");
  }
  return HeadIndex(action, action / n_heads, action % n_heads);
}

HeadIndex HeadIndex::at(int layer, int head, int n_layers, int n_heads) {
  if (layer < 0 || layer >= n_layers || head < 0 || head >= n_heads) {
    throw std::out_of_range("head L" + std::to_string(layer) + ".H" + std::to_string(head) + " out of range");
  }
  return HeadIndex(layer * n_heads + head, layer, head);
}

HeadIndex HeadIndex::parse(const std::string& label, int n_layers, int n_heads) {
  static const std::regex pattern(R"(L(\d+)\.H(\d+))");
  std::smatch m;
  if (!std::regex_match(label, m, pattern)) throw std::invalid_argument("bad head label '" + label + "'");
  return at(std::stoi(m[1]), std::stoi(m[2]), n_layers, n_heads);
}

std::string HeadIndex::label() const { return "L" + std::to_string(layer_) + ".H" + std::to_string(head_); }

std::vector<TensorManifestEntry> weight_manifest(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d_model, m = cfg.d_mlp;
  std::vector<TensorManifestEntry> out;
  out.push_back({"wte.weight", {cfg.vocab_size, d}});
  out.push_back({"wpe.weight", {cfg.max_positions, d}});
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    out.push_back({p + "ln_1.weight", {d}});
    out.push_back({p + "ln_1.bias", {d}});
    out.push_back({p + "attn.c_attn.weight", {d, 3 * d}});
    out.push_back({p + "attn.c_attn.bias", {3 * d}});
    out.push_back({p + "attn.c_proj.weight", {d, d}});
    out.push_back({p + "attn.c_proj.bias", {d}});
    out.push_back({p + "ln_2.weight", {d}});
    out.push_back({p + "ln_2.bias", {d}});
    out.push_back({p + "mlp.c_fc.weight", {d, m}});
    out.push_back({p + "mlp.c_fc.bias", {m}});
    out.push_back({p + "mlp.c_proj.weight", {m, d}});
    out.push_back({p + "mlp.c_proj.bias", {d}});
  }
  out.push_back({"ln_f.weight", {d}});
  out.push_back({"ln_f.bias", {d}});
  return out;
}

namespace {

// Visits every weight vector of `w` paired with its manifest entry, in manifest order.
template <typename Weights, typename Fn>
void for_each_tensor(const ModelConfig& cfg, Weights& w, Fn&& fn) {
  const auto manifest = weight_manifest(cfg);
  std::size_t k = 0;
  fn(manifest[k++], w.token_embedding);
  fn(manifest[k++], w.position_embedding);
  for (auto& layer : w.layers) {
    fn(manifest[k++], layer.ln1_gain);
    fn(manifest[k++], layer.ln1_bias);
    fn(manifest[k++], layer.qkv_weight);
    fn(manifest[k++], layer.qkv_bias);
    fn(manifest[k++], layer.out_weight);
    fn(manifest[k++], layer.out_bias);
    fn(manifest[k++], layer.ln2_gain);
    fn(manifest[k++], layer.ln2_bias);
    fn(manifest[k++], layer.fc_weight);
    fn(manifest[k++], layer.fc_bias);
    fn(manifest[k++], layer.proj_weight);
    fn(manifest[k++], layer.proj_bias);
  }
  fn(manifest[k++], w.final_gain);
  fn(manifest[k++], w.final_bias);
}

std::size_t numel(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace

Model::Model(ModelConfig config, ModelWeights weights) : config_(config) {
  config_.validate();
  if (weights.layers.size() != static_cast<std::size_t>(config_.n_layers)) {
    throw FormatError("model has " + std::to_string(weights.layers.size()) + " layers, config expects " +
                      std::to_string(config_.n_layers));
  }
  for_each_tensor(config_, weights, [](const TensorManifestEntry& e, const std::vector<float>& v) {
    if (v.size() != numel(e.shape)) {
      throw FormatError("tensor '" + e.name + "' has " + std::to_string(v.size()) + " values, expected shape " +
                        shape_str(e.shape));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw NumericError("tensor '" + e.name + "' contains non-finite values");
    }
  });
  weights_ = std::make_shared<const ModelWeights>(std::move(weights));
}

Model Model::from_tensors(const ModelConfig& cfg, const std::map<std::string, StoredTensor>& tensors) {
  cfg.validate();
  ModelWeights w;
  w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  std::set<std::string> used;
  for_each_tensor(cfg, w, [&](const TensorManifestEntry& e, std::vector<float>& dst) {
    auto it = tensors.find(e.name);
    if (it == tensors.end()) throw FormatError("missing tensor '" + e.name + "'");
    const StoredTensor& t = it->second;
    if (t.dtype != DType::F32) throw FormatError("tensor '" + e.name + "' must be F32");
    if (t.shape != e.shape) {
      throw FormatError("shape mismatch for tensor '" + e.name + "': got " + shape_str(t.shape) + ", expected " +
                        shape_str(e.shape));
    }
    dst = t.f32;
    used.insert(e.name);
  });
  for (const auto& [name, t] : tensors) {
    if (!used.contains(name)) throw FormatError("unexpected tensor '" + name + "' not in the weight manifest");
  }
  return Model(cfg, std::move(w));
}

SafetensorsFile Model::to_safetensors() const {
  SafetensorsFile file;
  for_each_tensor(config_, *weights_, [&](const TensorManifestEntry& e, const std::vector<float>& v) {
    file.tensors.emplace(e.name, StoredTensor::from_f32(e.shape, v));
  });
  file.metadata = {{"format", "circuitrl-gpt2"},
                   {"n_layers", std::to_string(config_.n_layers)},
                   {"n_heads", std::to_string(config_.n_heads)},
                   {"d_model", std::to_string(config_.d_model)},
                   {"d_mlp", std::to_string(config_.d_mlp)},
                   {"vocab_size", std::to_string(config_.vocab_size)},
                   {"max_positions", std::to_string(config_.max_positions)}};
  return file;
}

Model load_model(const std::filesystem::path& weights_path, const ModelConfig& expected) {
  const SafetensorsFile file = read_safetensors(weights_path);
  return Model::from_tensors(expected, file.tensors);
}

ModelConfig infer_config(const SafetensorsFile& file) {
  auto shape_of = [&](const std::string& name) -> const std::vector<std::int64_t>& {
    auto it = file.tensors.find(name);
    if (it == file.tensors.end()) throw FormatError("missing tensor '" + name + "'");
    return it->second.shape;
  };
  ModelConfig cfg;
  const auto& wte = shape_of("wte.weight");
  const auto& wpe = shape_of("wpe.weight");
  if (wte.size() != 2 || wpe.size() != 2) throw FormatError("embedding tensors must be rank 2");
  cfg.vocab_size = static_cast<int>(wte[0]);
  cfg.d_model = static_cast<int>(wte[1]);
  cfg.max_positions = static_cast<int>(wpe[0]);
  int layers = 0;
  while (file.tensors.contains("h." + std::to_string(layers) + ".ln_1.weight")) ++layers;
  cfg.n_layers = layers;
  const auto& fc = shape_of("h.0.mlp.c_fc.weight");
  if (fc.size() != 2) throw FormatError("tensor 'h.0.mlp.c_fc.weight' must be rank 2");
  cfg.d_mlp = static_cast<int>(fc[1]);
  auto meta = file.metadata.find("n_heads");
  cfg.n_heads = meta != file.metadata.end() ? std::stoi(meta->second) : 12;
  if (cfg.n_heads <= 0 || cfg.d_model % cfg.n_heads != 0) {
    throw FormatError("n_heads does not divide d_model");
  }
  cfg.d_head = cfg.d_model / cfg.n_heads;
  return cfg;
}

Model load_model_inferred(const std::filesystem::path& weights_path) {
  const SafetensorsFile file = read_safetensors(weights_path);
  return Model::from_tensors(infer_config(file), file.tensors);
}

}  // namespace circuitrl
