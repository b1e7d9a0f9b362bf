#include <fstream>
#include <random>
#include <sstream>

#include "circuitrl/common.hpp"
#include "circuitrl/tasks/task_suite.hpp"

namespace circuitrl {

Corpus Corpus::from_text_file(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open corpus " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return Corpus(tokenizer.encode(text.str()));
}

ControlBatch sample_control(const Corpus& corpus, std::uint64_t seed, const TaskConfig& cfg) {
  if (cfg.ctrl_len < 2) throw std::invalid_argument("ctrl_len must be at least 2");
  if (corpus.size() < cfg.n_ctrl * cfg.ctrl_len) {
    throw std::invalid_argument("corpus has " + std::to_string(corpus.size()) + " tokens, need at least " +
                                std::to_string(cfg.n_ctrl * cfg.ctrl_len));
  }
  std::mt19937_64 rng(mix_seed(seed, seed_tag::kControl));
  std::uniform_int_distribution<std::size_t> offset(0, corpus.size() - cfg.ctrl_len);
  ControlBatch out{TokenBatch(cfg.n_ctrl, cfg.ctrl_len)};
  const auto& toks = corpus.tokens();
  for (std::size_t b = 0; b < cfg.n_ctrl; ++b) {
    const std::size_t start = offset(rng);
    std::copy_n(toks.begin() + static_cast<std::ptrdiff_t>(start), cfg.ctrl_len, out.tokens.row(b).begin());
  }
  return out;
}

}  // namespace circuitrl
