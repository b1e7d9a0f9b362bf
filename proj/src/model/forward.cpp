#include "circuitrl/model/forward.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace circuitrl {

namespace {

constexpr float kMaskedScore = -1e9f;

// out[n x m] = x[n x k] W[k x m] + b
using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// out[n x m] = x[n x k] W[k x m] + b
void affine(const float* x, std::size_t n, std::size_t k, const float* w, std::size_t m, const float* b,
            float* out) {
  const auto rows = static_cast<Eigen::Index>(n), inner = static_cast<Eigen::Index>(k), cols = static_cast<Eigen::Index>(m);
  Eigen::Map<RowMajor> o(out, rows, cols);
  o.noalias() = Eigen::Map<const RowMajor>(x, rows, inner) * Eigen::Map<const RowMajor>(w, inner, cols);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(b, cols);
}

// out[n x V] = h[n x d] wte^T, the tied unembedding.
void unembed(const float* h, std::size_t n, const float* wte, std::size_t vocab, std::size_t d, float* out) {
  const auto rows = static_cast<Eigen::Index>(n), dim = static_cast<Eigen::Index>(d), v = static_cast<Eigen::Index>(vocab);
  Eigen::Map<RowMajor>(out, rows, v).noalias() =
      Eigen::Map<const RowMajor>(h, rows, dim) * Eigen::Map<const RowMajor>(wte, v, dim).transpose();
}

void layer_norm(const float* x, std::size_t n, std::size_t d, const float* gain, const float* bias, float eps,
                float* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const float* xi = x + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    float* oi = out + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      oi[j] = static_cast<float>((xi[j] - mean) * inv) * gain[j] + bias[j];
    }
  }
}

// tanh approximation used by GPT-2
inline float gelu(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

inline float dot(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Negative log-probability of `target` under softmax(logits).
double row_nll(std::span<const float> logits, std::int32_t target) {
  const float mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
  return std::log(sum) + mx - static_cast<double>(logits[static_cast<std::size_t>(target)]);
}

struct Capture {
  int layer = -1;
  std::vector<float>* z = nullptr;         // [seq x d_model], heads concatenated
  std::vector<float>* attn_out = nullptr;  // [seq x d_model]
};

void check_tokens(const ModelConfig& cfg, const TokenBatch& tokens) {
  if (tokens.batch == 0 || tokens.seq == 0) throw std::invalid_argument("token batch is empty");
  if (tokens.ids.size() != tokens.batch * tokens.seq) throw std::invalid_argument("token batch shape mismatch");
  if (tokens.seq > static_cast<std::size_t>(cfg.max_positions)) {
    throw std::out_of_range("sequence length " + std::to_string(tokens.seq) + " exceeds max_positions " +
                            std::to_string(cfg.max_positions));
  }
  for (auto id : tokens.ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(cfg.vocab_size));
    }
  }
}

void check_layer(const ModelConfig& cfg, int layer) {
  if (layer < 0 || layer >= cfg.n_layers) throw std::out_of_range("invalid layer " + std::to_string(layer));
}

// Runs one sequence through the decoder. Returns the post-final-norm residual
// [seq x d_model], or an empty vector when stopping early after the captured layer.
std::vector<float> run_sequence(const Model& model, std::span<const std::int32_t> tokens,
                                const AblationSpec& ablation, Capture* capture = nullptr, bool stop_at_capture = false) {
  const ModelConfig& cfg = model.config();
  const ModelWeights& w = model.weights();
  const std::size_t s = tokens.size();
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t dh = static_cast<std::size_t>(cfg.d_head);
  const std::size_t dm = static_cast<std::size_t>(cfg.d_mlp);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  std::vector<float> x(s * d);
  for (std::size_t i = 0; i < s; ++i) {
    const float* te = w.token_embedding.data() + static_cast<std::size_t>(tokens[i]) * d;
    const float* pe = w.position_embedding.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = te[j] + pe[j];
  }

  std::vector<float> h(s * d), qkv(s * 3 * d), z(s * d), attn(s * d), fc(s * dm), mlp(s * d), scores(s);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];
    layer_norm(x.data(), s, d, lw.ln1_gain.data(), lw.ln1_bias.data(), cfg.layernorm_epsilon, h.data());
    affine(h.data(), s, d, lw.qkv_weight.data(), 3 * d, lw.qkv_bias.data(), qkv.data());

    std::fill(z.begin(), z.end(), 0.0f);
    for (int head = 0; head < cfg.n_heads; ++head) {
      if (ablation.target && ablation.target->layer() == l && ablation.target->head() == head) continue;
      const std::size_t off = static_cast<std::size_t>(head) * dh;
      for (std::size_t i = 0; i < s; ++i) {
        const float* q = qkv.data() + i * 3 * d + off;
        float mx = -INFINITY;
        for (std::size_t j = 0; j < s; ++j) {
          const float* k = qkv.data() + j * 3 * d + d + off;
          scores[j] = dot(q, k, dh) * scale + (j > i ? kMaskedScore : 0.0f);
          mx = std::max(mx, scores[j]);
        }
        float denom = 0.0f;
        for (std::size_t j = 0; j < s; ++j) {
          scores[j] = std::exp(scores[j] - mx);
          denom += scores[j];
        }
        float* zi = z.data() + i * d + off;
        for (std::size_t j = 0; j < s; ++j) {
          const float p = scores[j] / denom;
          const float* v = qkv.data() + j * 3 * d + 2 * d + off;
          for (std::size_t c = 0; c < dh; ++c) zi[c] += p * v[c];
        }
      }
    }
    affine(z.data(), s, d, lw.out_weight.data(), d, lw.out_bias.data(), attn.data());

    if (capture && capture->layer == l) {
      if (capture->z) *capture->z = z;
      if (capture->attn_out) *capture->attn_out = attn;
      if (stop_at_capture) return {};
    }

    for (std::size_t i = 0; i < s * d; ++i) x[i] += attn[i];

    layer_norm(x.data(), s, d, lw.ln2_gain.data(), lw.ln2_bias.data(), cfg.layernorm_epsilon, h.data());
    affine(h.data(), s, d, lw.fc_weight.data(), dm, lw.fc_bias.data(), fc.data());
    for (auto& v : fc) v = gelu(v);
    affine(fc.data(), s, dm, lw.proj_weight.data(), d, lw.proj_bias.data(), mlp.data());
    for (std::size_t i = 0; i < s * d; ++i) x[i] += mlp[i];
  }

  std::vector<float> out(s * d);
  layer_norm(x.data(), s, d, w.final_gain.data(), w.final_bias.data(), cfg.layernorm_epsilon, out.data());
  return out;
}

void check_ablation(const ModelConfig& cfg, const AblationSpec& ablation) {
  if (ablation.target && (ablation.target->layer() >= cfg.n_layers || ablation.target->head() >= cfg.n_heads)) {
    throw std::out_of_range("ablation target " + ablation.target->label() + " outside the model");
  }
}

}  // namespace

Tensor3 final_hidden(const Model& model, const TokenBatch& tokens, const AblationSpec& ablation) {
  check_tokens(model.config(), tokens);
  check_ablation(model.config(), ablation);
  const std::size_t d = static_cast<std::size_t>(model.config().d_model);
  Tensor3 out(tokens.batch, tokens.seq, d);
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    const auto hidden = run_sequence(model, tokens.row(b), ablation);
    std::copy(hidden.begin(), hidden.end(), out.data.begin() + static_cast<std::ptrdiff_t>(b * tokens.seq * d));
  }
  return out;
}

Logits forward_logits(const Model& model, const TokenBatch& tokens, const AblationSpec& ablation) {
  const Tensor3 hidden = final_hidden(model, tokens, ablation);
  const ModelConfig& cfg = model.config();
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t v = static_cast<std::size_t>(cfg.vocab_size);
  const float* wte = model.weights().token_embedding.data();
  Logits logits(tokens.batch, tokens.seq, v);
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    unembed(hidden.row(b, 0).data(), tokens.seq, wte, v, d, logits.row(b, 0).data());
  }
  return logits;
}

Tensor3 attention_block_output(const Model& model, const TokenBatch& tokens, int layer,
                               const AblationSpec& ablation) {
  const ModelConfig& cfg = model.config();
  check_layer(cfg, layer);
  check_tokens(cfg, tokens);
  check_ablation(cfg, ablation);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  Tensor3 out(tokens.batch, tokens.seq, d);
  std::vector<float> attn;
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    Capture cap{layer, nullptr, &attn};
    run_sequence(model, tokens.row(b), ablation, &cap, true);
    std::copy(attn.begin(), attn.end(), out.data.begin() + static_cast<std::ptrdiff_t>(b * tokens.seq * d));
  }
  return out;
}

std::vector<Tensor3> per_head_contributions(const Model& model, const TokenBatch& tokens, int layer) {
  const ModelConfig& cfg = model.config();
  check_layer(cfg, layer);
  check_tokens(cfg, tokens);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t dh = static_cast<std::size_t>(cfg.d_head);
  const std::vector<float>& wo = model.weights().layers[static_cast<std::size_t>(layer)].out_weight;

  std::vector<Tensor3> out(static_cast<std::size_t>(cfg.n_heads), Tensor3(tokens.batch, tokens.seq, d));
  std::vector<float> z;
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    Capture cap{layer, &z, nullptr};
    run_sequence(model, tokens.row(b), AblationSpec::intact(), &cap, true);
    for (std::size_t head = 0; head < out.size(); ++head) {
      const std::size_t off = head * dh;
      for (std::size_t s = 0; s < tokens.seq; ++s) {
        float* dst = out[head].row(b, s).data();
        const float* zs = z.data() + s * d + off;
        for (std::size_t c = 0; c < dh; ++c) {
          const float a = zs[c];
          const float* wrow = wo.data() + (off + c) * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] += a * wrow[j];
        }
      }
    }
  }
  return out;
}

double logit_diff_metric(const Logits& logits, const MetricSpec& spec) {
  if (spec.size() != logits.dim0 || spec.correct.size() != spec.size() || spec.distractor.size() != spec.size()) {
    throw std::invalid_argument("metric spec does not match the logit batch");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < spec.size(); ++b) {
    const std::size_t pos = spec.positions[b];
    const auto c = spec.correct[b], x = spec.distractor[b];
    if (pos >= logits.dim1) throw std::out_of_range("metric position outside the sequence");
    if (c < 0 || x < 0 || static_cast<std::size_t>(c) >= logits.dim2 || static_cast<std::size_t>(x) >= logits.dim2) {
      throw std::out_of_range("metric token id outside the vocabulary");
    }
    total += static_cast<double>(logits.at(b, pos, static_cast<std::size_t>(c))) -
             static_cast<double>(logits.at(b, pos, static_cast<std::size_t>(x)));
  }
  return total / static_cast<double>(spec.size());
}

double control_cross_entropy(const Logits& logits, const TokenBatch& tokens) {
  if (tokens.seq < 2) throw std::invalid_argument("control cross-entropy needs sequences of length >= 2");
  if (logits.dim0 != tokens.batch || logits.dim1 != tokens.seq) {
    throw std::invalid_argument("logits and tokens have different shapes");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    for (std::size_t s = 0; s + 1 < tokens.seq; ++s) {
      const auto target = tokens.at(b, s + 1);
      if (target < 0 || static_cast<std::size_t>(target) >= logits.dim2) {
        throw std::out_of_range("control token outside the vocabulary");
      }
      total += row_nll(logits.row(b, s), target);
    }
  }
  return total / static_cast<double>(tokens.batch * (tokens.seq - 1));
}

double task_metric(const Model& model, const TokenBatch& tokens, const MetricSpec& spec,
                   const AblationSpec& ablation) {
  const ModelConfig& cfg = model.config();
  check_tokens(cfg, tokens);
  check_ablation(cfg, ablation);
  if (spec.size() != tokens.batch || spec.correct.size() != spec.size() || spec.distractor.size() != spec.size()) {
    throw std::invalid_argument("metric spec does not match the token batch");
  }
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const float* wte = model.weights().token_embedding.data();
  double total = 0.0;
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    const std::size_t pos = spec.positions[b];
    const auto c = spec.correct[b], x = spec.distractor[b];
    if (pos >= tokens.seq) throw std::out_of_range("metric position outside the sequence");
    if (c < 0 || x < 0 || c >= cfg.vocab_size || x >= cfg.vocab_size) {
      throw std::out_of_range("metric token id outside the vocabulary");
    }
    // Positions after the metric position cannot influence it under causal masking.
    const auto hidden = run_sequence(model, tokens.row(b).first(pos + 1), ablation);
    const float* h = hidden.data() + pos * d;
    total += static_cast<double>(dot(h, wte + static_cast<std::size_t>(c) * d, d)) -
             static_cast<double>(dot(h, wte + static_cast<std::size_t>(x) * d, d));
  }
  return total / static_cast<double>(tokens.batch);
}

double control_loss(const Model& model, const TokenBatch& tokens, const AblationSpec& ablation) {
  const ModelConfig& cfg = model.config();
  if (tokens.seq < 2) throw std::invalid_argument("control cross-entropy needs sequences of length >= 2");
  check_tokens(cfg, tokens);
  check_ablation(cfg, ablation);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t v = static_cast<std::size_t>(cfg.vocab_size);
  const float* wte = model.weights().token_embedding.data();
  const std::size_t n = tokens.seq - 1;
  std::vector<float> logits(n * v);
  double total = 0.0;
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    const auto hidden = run_sequence(model, tokens.row(b), ablation);
    unembed(hidden.data(), n, wte, v, d, logits.data());
    for (std::size_t s = 0; s < n; ++s) {
      total += row_nll(std::span<const float>(logits.data() + s * v, v), tokens.at(b, s + 1));
    }
  }
  return total / static_cast<double>(tokens.batch * (tokens.seq - 1));
}

}  // namespace circuitrl
