#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "circuitrl/env/ablation_env.hpp"
#include "circuitrl/policy/checkpoint.hpp"
#include "circuitrl/ppo/ppo.hpp"

namespace circuitrl {

struct TrainerOptions {
  PPOHyperparams ppo;
  EnvConfig env;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path output_dir;  // metrics.csv and checkpoints; empty writes nothing
  int checkpoint_every = 50;         // updates; 0 keeps only the final checkpoint
  std::filesystem::path trace_path;  // optional per-step JSONL
  std::ostream* log = nullptr;       // warnings and progress; null = std::cerr
  int progress_every = 0;            // updates between progress lines; 0 = silent
};

struct UpdateRecord {
  std::int64_t update = 0;  // 1-based
  std::int64_t env_steps = 0;
  double lr = 0.0;
  UpdateStats stats;
  double mean_runmax_induction = 0.0;  // NaN when no episode of the task finished
  double mean_runmax_ioi = 0.0;
};

struct TrainResult {
  std::vector<UpdateRecord> history;
  Checkpoint final_state;
  std::int64_t env_steps = 0;
};

inline constexpr const char* kMetricsHeader =
    "update,env_steps,lr,policy_loss,value_loss,entropy,clip_frac,approx_kl,mean_runmax_induction,mean_runmax_ioi";

// Full training loop. With `resume`, continues from a checkpoint written by
// an earlier run with the same options; when the rollout horizon is a
// multiple of max_steps the continuation is identical to an uninterrupted run.
TrainResult train(std::shared_ptr<const InterventionScorer> scorer, std::shared_ptr<const BatchSource> batches,
                  const TrainerOptions& opts, const Checkpoint* resume = nullptr);

// The JSON run configuration consumed by `circuitrl train`.
struct RunConfig {
  std::filesystem::path weights;
  bool infer_architecture = false;
  std::filesystem::path tokenizer_dir;
  std::filesystem::path pools_dir;
  std::filesystem::path corpus;
  std::filesystem::path resume;
  TaskConfig task;
  TrainerOptions trainer;
};

// Relative paths are resolved against the config file's directory. Unknown
// keys are rejected. Throws FormatError.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace circuitrl
