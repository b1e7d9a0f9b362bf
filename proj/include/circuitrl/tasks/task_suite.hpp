#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "circuitrl/model/forward.hpp"
#include "circuitrl/model/tensor.hpp"
#include "circuitrl/tokenizer/bpe.hpp"

namespace circuitrl {

// Induction and IOI are the training tasks; Docstring is evaluation-only.
enum class TaskId { Induction, IOI, Docstring };

std::string_view task_name(TaskId task);
TaskId parse_task(std::string_view name);

// [1,0] induction, [0,1] IOI, [0,0] for anything unseen in training.
std::array<double, 2> task_onehot(TaskId task);

struct TaskBatch {
  TokenBatch tokens;
  MetricSpec metric;
  TaskId task = TaskId::Induction;
  std::uint64_t seed = 0;
};

struct ControlBatch {
  TokenBatch tokens;
};

// Curated word lists. Every entry must be a single BPE token once prefixed
// with a space, which is how it appears in the prompts.
struct WordPools {
  std::vector<std::string> names;
  std::vector<std::string> objects;
  std::vector<std::string> places;
  std::vector<std::string> doc_params;
  std::vector<std::string> doc_functions;
  std::vector<std::string> doc_descriptions;
  std::vector<std::string> doc_summaries;

  // Reads ioi_names.json, ioi_objects.json, ioi_places.json,
  // docstring_params.json, docstring_functions.json,
  // docstring_descriptions.json and docstring_summaries.json from `dir`
  // (each a JSON array of strings).
  static WordPools load(const std::filesystem::path& dir);
};

struct TaskConfig {
  std::size_t task_batch_size = 32;
  std::size_t induction_filler_len = 20;
  std::size_t n_ctrl = 8;
  std::size_t ctrl_len = 128;
  // Induction draws tokens from [0, vocab_size) excluding bos_token.
  std::int32_t vocab_size = 50257;
  std::int32_t bos_token = Tokenizer::kEndOfText;
  WordPools pools;

  // Structural checks; with a tokenizer also checks every pool entry is a
  // single token with its leading space. Throws std::invalid_argument.
  void validate(const Tokenizer* tokenizer = nullptr) const;
};

// [BOS, A, B, fillers..., A]; predict B at the final position against a
// random distractor outside {A, B}.
TaskBatch gen_induction(std::uint64_t seed, const TaskConfig& cfg);

// "When {A} and {B} went to the {place}, {S} gave a {object} to", half the
// batch in ABBA order and half in BABA order (even rows ABBA). Correct is the
// indirect object, distractor the repeated subject.
TaskBatch gen_ioi(std::uint64_t seed, const TaskConfig& cfg, const Tokenizer& tokenizer);

// Python function with five distinct parameters whose docstring documents
// the first four with ":param" lines and ends at a fifth ":param"; predict the
// fifth parameter name against one of the first four.
TaskBatch gen_docstring(std::uint64_t seed, const TaskConfig& cfg, const Tokenizer& tokenizer);

// Pre-tokenised natural-text stream used for control batches.
class Corpus {
 public:
  explicit Corpus(std::vector<std::int32_t> tokens) : tokens_(std::move(tokens)) {}
  static Corpus from_text_file(const std::filesystem::path& path, const Tokenizer& tokenizer);

  const std::vector<std::int32_t>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::int32_t> tokens_;
};

// n_ctrl windows of ctrl_len contiguous tokens at seeded offsets.
ControlBatch sample_control(const Corpus& corpus, std::uint64_t seed, const TaskConfig& cfg);

// What an environment needs to rebuild an episode's batches from its seed.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual TaskBatch task_batch(TaskId task, std::uint64_t seed) const = 0;
  virtual ControlBatch control_batch(std::uint64_t seed) const = 0;
};

// The standard source: the three generators above plus a control corpus.
// IOI and docstring need a tokenizer; induction alone does not.
class TaskSuite : public BatchSource {
 public:
  TaskSuite(TaskConfig cfg, std::shared_ptr<const Tokenizer> tokenizer, std::shared_ptr<const Corpus> corpus);

  TaskBatch task_batch(TaskId task, std::uint64_t seed) const override;
  ControlBatch control_batch(std::uint64_t seed) const override;
  const TaskConfig& config() const { return cfg_; }

 private:
  TaskConfig cfg_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::shared_ptr<const Corpus> corpus_;
};

}  // namespace circuitrl
