#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "circuitrl/env/ablation_env.hpp"

namespace circuitrl {

struct TraceRecord {
  std::uint64_t episode_seed = 0;
  TaskId task = TaskId::Induction;
  int step = 0;  // 0-based index within the episode
  RewardBreakdown reward;
};

// Appends one JSON object per step:
// {"episode_seed", "task", "step", "action", "layer", "head", "reward",
//  "task_damage", "general_damage"}
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void write(const TraceRecord& record);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace circuitrl
