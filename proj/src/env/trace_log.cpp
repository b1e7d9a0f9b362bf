#include "circuitrl/env/trace_log.hpp"

#include <json.hpp>

#include "circuitrl/common.hpp"

namespace circuitrl {

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw FormatError("cannot open trace log " + path.string());
}

void TraceWriter::write(const TraceRecord& record) {
  const nlohmann::json j = {
      {"episode_seed", record.episode_seed},
      {"task", std::string(task_name(record.task))},
      {"step", record.step},
      {"action", record.reward.action.action()},
      {"layer", record.reward.action.layer()},
      {"head", record.reward.action.head()},
      {"reward", record.reward.reward},
      {"task_damage", record.reward.task_damage},
      {"general_damage", record.reward.general_damage},
  };
  std::lock_guard lock(mutex_);
  out_ << j.dump() << '\n';
  out_.flush();
}

}  // namespace circuitrl
