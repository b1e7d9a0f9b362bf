#include "test_support.hpp"

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <random>

#include "circuitrl/common.hpp"

namespace circuitrl::testing {

namespace {

double unit(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  const std::uint64_t h = mix_seed(mix_seed(a, b), c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double profile(TaskId task, int action, int n_actions) {
  struct Peak {
    int action;
    double damage;
  };
  static const Peak induction[] = {{65, 3.0}, {86, 2.2}, {81, 1.6}, {105, 1.1}};
  static const Peak ioi[] = {{106, 3.2}, {93, 2.6}, {102, 2.1}, {65, 1.2}};
  static const Peak docstring[] = {{65, 2.4}, {40, 1.9}, {106, 1.0}};
  auto look = [&](const auto& peaks) {
    for (const auto& p : peaks) {
      if (p.action % n_actions == action) return p.damage;
    }
    return 0.0;
  };
  switch (task) {
    case TaskId::Induction: return look(induction);
    case TaskId::IOI: return look(ioi);
    case TaskId::Docstring: return look(docstring);
  }
  return 0.0;
}

}  // namespace

double StubScorer::baseline_metric(std::uint64_t seed, TaskId task) const {
  return 3.0 + unit(seed, static_cast<std::uint64_t>(task) + 11, salt_);
}

double StubScorer::task_damage(std::uint64_t seed, TaskId task, int action) const {
  const double noise = unit(seed, static_cast<std::uint64_t>(task) * 1000 + static_cast<std::uint64_t>(action), salt_ + 1);
  return profile(task, action, n_actions()) + 0.4 * (noise - 0.3);
}

double StubScorer::baseline_ctrl(std::uint64_t seed) const { return 4.0 + unit(seed, 77, salt_); }

double StubScorer::general_damage(std::uint64_t seed, int action) const {
  const double u = unit(seed, static_cast<std::uint64_t>(action) + 500, salt_ + 2);
  return (action % 17 == 0 ? 1.5 : 0.0) + 0.2 * u * u;
}

double StubScorer::task_metric(const TaskBatch& batch, const AblationSpec& ablation) const {
  ++calls_;
  const double base = baseline_metric(batch.seed, batch.task);
  return ablation.target ? base - task_damage(batch.seed, batch.task, ablation.target->action()) : base;
}

double StubScorer::control_loss(const ControlBatch& batch, const AblationSpec& ablation) const {
  ++calls_;
  const std::uint64_t seed = SeedOnlyBatches::seed_of(batch);
  const double base = baseline_ctrl(seed);
  return ablation.target ? base + general_damage(seed, ablation.target->action()) : base;
}

double StubScorer::expected_reward(std::uint64_t seed, TaskId task, int action) const {
  const double m = baseline_metric(seed, task);
  const double c = baseline_ctrl(seed);
  return (m - (m - task_damage(seed, task, action))) - ((c + general_damage(seed, action)) - c);
}

TaskBatch SeedOnlyBatches::task_batch(TaskId task, std::uint64_t seed) const {
  TaskBatch b;
  b.tokens = TokenBatch(1, 2, 0);
  b.metric = {{1}, {1}, {2}};
  b.task = task;
  b.seed = seed;
  return b;
}

ControlBatch SeedOnlyBatches::control_batch(std::uint64_t seed) const {
  ControlBatch c;
  c.tokens = TokenBatch(1, 2, 0);
  std::memcpy(c.tokens.ids.data(), &seed, sizeof(seed));
  return c;
}

std::uint64_t SeedOnlyBatches::seed_of(const ControlBatch& batch) {
  std::uint64_t seed = 0;
  std::memcpy(&seed, batch.tokens.ids.data(), sizeof(seed));
  return seed;
}

TaskBatch FixedBatches::task_batch(TaskId task, std::uint64_t seed) const {
  TaskBatch b = task_;
  b.task = task;
  b.seed = seed;
  return b;
}

TaskConfig toy_task_config() {
  TaskConfig cfg;
  cfg.task_batch_size = 4;
  cfg.induction_filler_len = 6;
  cfg.n_ctrl = 2;
  cfg.ctrl_len = 12;
  cfg.vocab_size = 11;
  cfg.bos_token = 10;
  return cfg;
}

std::shared_ptr<const TaskSuite> toy_suite() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> tok(0, 9);
  std::vector<std::int32_t> corpus(400);
  for (auto& t : corpus) t = tok(rng);
  return std::make_shared<const TaskSuite>(toy_task_config(), nullptr,
                                           std::make_shared<const Corpus>(std::move(corpus)));
}

ModelWeights critical_head_weights(const ModelConfig& cfg, HeadIndex critical, std::uint64_t seed) {
  ModelWeights w = random_toy_weights(cfg, seed, 0.05f);
  const std::size_t d = static_cast<std::size_t>(cfg.d_model), dh = static_cast<std::size_t>(cfg.d_head);

  // Zero-mean unit direction e; tokens 3 and 4 embed at +/- 2e.
  std::vector<float> e(d);
  for (std::size_t i = 0; i < d; ++i) e[i] = (i % 2 == 0 ? 1.0f : -1.0f) / std::sqrt(static_cast<float>(d));
  for (std::size_t i = 0; i < d; ++i) {
    w.token_embedding[3 * d + i] = 2.0f * e[i];
    w.token_embedding[4 * d + i] = -2.0f * e[i];
  }

  // The critical head's value ignores its input and equals a fixed vector;
  // W_O maps that vector onto 40 e.
  LayerWeights& lw = w.layers.at(static_cast<std::size_t>(critical.layer()));
  const std::size_t vcol = 2 * d + static_cast<std::size_t>(critical.head()) * dh;
  for (std::size_t row = 0; row < d; ++row) {
    for (std::size_t c = 0; c < dh; ++c) lw.qkv_weight[row * 3 * d + vcol + c] = 0.0f;
  }
  for (std::size_t c = 0; c < dh; ++c) lw.qkv_bias[vcol + c] = c == 0 ? 1.0f : 0.0f;
  const std::size_t orow = static_cast<std::size_t>(critical.head()) * dh;
  for (std::size_t c = 0; c < dh; ++c) {
    for (std::size_t j = 0; j < d; ++j) lw.out_weight[(orow + c) * d + j] = c == 0 ? 40.0f * e[j] : 0.0f;
  }
  return w;
}

std::shared_ptr<const FixedBatches> critical_head_batches(const ModelConfig& cfg, std::uint64_t seed) {
  TaskBatch t;
  t.tokens = random_tokens(4, 8, cfg.vocab_size, seed);
  for (std::size_t b = 0; b < 4; ++b) {
    t.metric.positions.push_back(7);
    t.metric.correct.push_back(3);
    t.metric.distractor.push_back(4);
  }
  ControlBatch c;
  c.tokens = random_tokens(2, 10, cfg.vocab_size, seed + 1);
  return std::make_shared<const FixedBatches>(std::move(t), std::move(c));
}

std::shared_ptr<const Model> toy_model(std::uint64_t seed) {
  const ModelConfig cfg = toy_config();
  return std::make_shared<const Model>(cfg, random_toy_weights(cfg, seed));
}

TokenBatch random_tokens(std::size_t batch, std::size_t seq, int vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  TokenBatch t(batch, seq);
  for (auto& id : t.ids) id = tok(rng);
  return t;
}

std::filesystem::path data_dir() { return CIRCUITRL_DATA_DIR; }
std::filesystem::path test_data_dir() { return CIRCUITRL_TEST_DATA_DIR; }

std::shared_ptr<const Tokenizer> gpt2_tokenizer() {
  static const auto tok = std::make_shared<const Tokenizer>(
      Tokenizer::from_files(data_dir() / "tokenizer" / "vocab.json", data_dir() / "tokenizer" / "merges.txt"));
  return tok;
}

std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto p = std::filesystem::temp_directory_path() /
                 ("circuitrl_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace circuitrl::testing
