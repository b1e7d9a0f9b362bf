#include "circuitrl/tasks/task_suite.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "circuitrl/common.hpp"

namespace circuitrl {

namespace {

std::uint64_t task_stream(TaskId task) {
  return seed_tag::kTaskBatch + static_cast<std::uint64_t>(task);
}

template <typename T>
const T& pick(const std::vector<T>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

std::vector<std::string> read_string_array(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open word pool " + path.string());
  try {
    return nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("word pool " + path.string() + " is not a JSON array of strings: " + e.what());
  }
}

// Right-pads rows to a common length with `pad`. Padding sits after every
// metric position, so causal masking keeps it from affecting the metric.
TokenBatch pack_rows(const std::vector<std::vector<std::int32_t>>& rows, std::int32_t pad) {
  std::size_t len = 0;
  for (const auto& r : rows) len = std::max(len, r.size());
  TokenBatch batch(rows.size(), len, pad);
  for (std::size_t b = 0; b < rows.size(); ++b) std::copy(rows[b].begin(), rows[b].end(), batch.row(b).begin());
  return batch;
}

std::int32_t single_token(const Tokenizer& tok, const std::string& word) {
  auto id = tok.single_token_id(" " + word);
  if (!id) throw std::invalid_argument("pool entry '" + word + "' is not a single token with a leading space");
  return *id;
}

}  // namespace

std::string_view task_name(TaskId task) {
  switch (task) {
    case TaskId::Induction:
      return "induction";
    case TaskId::IOI:
      return "ioi";
    case TaskId::Docstring:
      return "docstring";
  }
  return "unknown";
}

TaskId parse_task(std::string_view name) {
  if (name == "induction") return TaskId::Induction;
  if (name == "ioi") return TaskId::IOI;
  if (name == "docstring") return TaskId::Docstring;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

std::array<double, 2> task_onehot(TaskId task) {
  switch (task) {
    case TaskId::Induction:
      return {1.0, 0.0};
    case TaskId::IOI:
      return {0.0, 1.0};
    default:
      return {0.0, 0.0};
  }
}

WordPools WordPools::load(const std::filesystem::path& dir) {
  WordPools p;
  p.names = read_string_array(dir / "ioi_names.json");
  p.objects = read_string_array(dir / "ioi_objects.json");
  p.places = read_string_array(dir / "ioi_places.json");
  p.doc_params = read_string_array(dir / "docstring_params.json");
  p.doc_functions = read_string_array(dir / "docstring_functions.json");
  p.doc_descriptions = read_string_array(dir / "docstring_descriptions.json");
  p.doc_summaries = read_string_array(dir / "docstring_summaries.json");
  return p;
}

void TaskConfig::validate(const Tokenizer* tokenizer) const {
  if (task_batch_size == 0) throw std::invalid_argument("task_batch_size must be positive");
  if (ctrl_len < 2) throw std::invalid_argument("ctrl_len must be at least 2");
  if (n_ctrl == 0) throw std::invalid_argument("n_ctrl must be positive");
  if (vocab_size < 4) throw std::invalid_argument("induction needs at least 3 non-BOS tokens");
  if (bos_token < 0 || bos_token >= vocab_size) throw std::invalid_argument("bos_token outside the vocabulary");
  if (!tokenizer) return;
  for (const auto* pool : {&pools.names, &pools.objects, &pools.places, &pools.doc_params}) {
    for (const auto& w : *pool) single_token(*tokenizer, w);
  }
}

TaskBatch gen_induction(std::uint64_t seed, const TaskConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, task_stream(TaskId::Induction)));
  // Non-BOS tokens: [0, vocab_size) minus bos_token, drawn by index.
  std::uniform_int_distribution<std::int32_t> dist(0, cfg.vocab_size - 2);
  auto draw = [&] {
    const std::int32_t t = dist(rng);
    return t >= cfg.bos_token ? t + 1 : t;
  };

  const std::size_t len = 3 + cfg.induction_filler_len + 1;
  TaskBatch out;
  out.task = TaskId::Induction;
  out.seed = seed;
  out.tokens = TokenBatch(cfg.task_batch_size, len);
  for (std::size_t b = 0; b < cfg.task_batch_size; ++b) {
    const std::int32_t a = draw();
    std::int32_t bb = draw();
    while (bb == a) bb = draw();
    auto row = out.tokens.row(b);
    row[0] = cfg.bos_token;
    row[1] = a;
    row[2] = bb;
    for (std::size_t f = 0; f < cfg.induction_filler_len; ++f) row[3 + f] = draw();
    row[len - 1] = a;
    std::int32_t distractor = draw();
    while (distractor == a || distractor == bb) distractor = draw();
    out.metric.positions.push_back(len - 1);
    out.metric.correct.push_back(bb);
    out.metric.distractor.push_back(distractor);
  }
  return out;
}

TaskBatch gen_ioi(std::uint64_t seed, const TaskConfig& cfg, const Tokenizer& tokenizer) {
  cfg.validate();
  if (cfg.task_batch_size % 2 != 0) {
    throw std::invalid_argument("IOI batch size must be even to balance ABBA/BABA orderings");
  }
  const WordPools& p = cfg.pools;
  if (p.names.size() < 2 || p.objects.empty() || p.places.empty()) {
    throw std::invalid_argument("IOI needs at least two names, one object and one place");
  }
  std::mt19937_64 rng(mix_seed(seed, task_stream(TaskId::IOI)));

  std::vector<std::vector<std::int32_t>> rows;
  TaskBatch out;
  out.task = TaskId::IOI;
  out.seed = seed;
  for (std::size_t b = 0; b < cfg.task_batch_size; ++b) {
    const std::string& io = pick(p.names, rng);
    std::string subject = pick(p.names, rng);
    while (subject == io) subject = pick(p.names, rng);
    const std::string& place = pick(p.places, rng);
    const std::string& object = pick(p.objects, rng);
    const bool abba = b % 2 == 0;
    const std::string& first = abba ? io : subject;
    const std::string& second = abba ? subject : io;
    const std::string prompt =
        "When " + first + " and " + second + " went to the " + place + ", " + subject + " gave a " + object + " to";

    std::vector<std::int32_t> row{cfg.bos_token};
    const auto ids = tokenizer.encode(prompt);
    row.insert(row.end(), ids.begin(), ids.end());
    out.metric.positions.push_back(row.size() - 1);
    out.metric.correct.push_back(single_token(tokenizer, io));
    out.metric.distractor.push_back(single_token(tokenizer, subject));
    rows.push_back(std::move(row));
  }
  out.tokens = pack_rows(rows, cfg.bos_token);
  return out;
}

TaskBatch gen_docstring(std::uint64_t seed, const TaskConfig& cfg, const Tokenizer& tokenizer) {
  cfg.validate();
  constexpr std::size_t kParams = 5;
  const WordPools& p = cfg.pools;
  std::vector<std::string> unique_params = p.doc_params;
  std::sort(unique_params.begin(), unique_params.end());
  unique_params.erase(std::unique(unique_params.begin(), unique_params.end()), unique_params.end());
  if (unique_params.size() < kParams) {
    throw std::invalid_argument("docstring parameter pool needs at least 5 distinct identifiers");
  }
  if (p.doc_functions.empty() || p.doc_descriptions.empty() || p.doc_summaries.empty()) {
    throw std::invalid_argument("docstring function, description and summary pools must be non-empty");
  }
  std::mt19937_64 rng(mix_seed(seed, task_stream(TaskId::Docstring)));

  std::vector<std::vector<std::int32_t>> rows;
  TaskBatch out;
  out.task = TaskId::Docstring;
  out.seed = seed;
  for (std::size_t b = 0; b < cfg.task_batch_size; ++b) {
    std::vector<std::string> params;
    std::sample(unique_params.begin(), unique_params.end(), std::back_inserter(params), kParams, rng);
    std::shuffle(params.begin(), params.end(), rng);

    std::string prompt = "def " + pick(p.doc_functions, rng) + "(";
    for (std::size_t i = 0; i < kParams; ++i) prompt += (i ? ", " : "") + params[i];
    prompt += "):\n    \"\"\"" + pick(p.doc_summaries, rng) + "\n\n";
    for (std::size_t i = 0; i + 1 < kParams; ++i) {
      prompt += "    :param " + params[i] + ": " + pick(p.doc_descriptions, rng) + "\n";
    }
    prompt += "    :param";

    std::vector<std::int32_t> row{cfg.bos_token};
    const auto ids = tokenizer.encode(prompt);
    row.insert(row.end(), ids.begin(), ids.end());
    std::uniform_int_distribution<std::size_t> which(0, kParams - 2);
    out.metric.positions.push_back(row.size() - 1);
    out.metric.correct.push_back(single_token(tokenizer, params[kParams - 1]));
    out.metric.distractor.push_back(single_token(tokenizer, params[which(rng)]));
    rows.push_back(std::move(row));
  }
  out.tokens = pack_rows(rows, cfg.bos_token);
  return out;
}

TaskSuite::TaskSuite(TaskConfig cfg, std::shared_ptr<const Tokenizer> tokenizer, std::shared_ptr<const Corpus> corpus)
    : cfg_(std::move(cfg)), tokenizer_(std::move(tokenizer)), corpus_(std::move(corpus)) {
  cfg_.validate(tokenizer_.get());
  if (!corpus_) throw std::invalid_argument("task suite needs a control corpus");
}

TaskBatch TaskSuite::task_batch(TaskId task, std::uint64_t seed) const {
  if (task == TaskId::Induction) return gen_induction(seed, cfg_);
  if (!tokenizer_) throw std::invalid_argument(std::string(task_name(task)) + " batches need a tokenizer");
  return task == TaskId::IOI ? gen_ioi(seed, cfg_, *tokenizer_) : gen_docstring(seed, cfg_, *tokenizer_);
}

ControlBatch TaskSuite::control_batch(std::uint64_t seed) const { return sample_control(*corpus_, seed, cfg_); }

}  // namespace circuitrl
