#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "circuitrl/policy/adam.hpp"
#include "circuitrl/policy/policy_net.hpp"

namespace circuitrl {

// Everything needed to resume training: parameters, Adam moments and step,
// plus free-form string metadata (update counter, RNG state, seed stream
// positions, ...). Stored as safetensors with F64 tensors named
// "policy.<t>", "adam.m.<t>", "adam.v.<t>".
struct Checkpoint {
  PolicyParams params;
  AdamState adam;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace circuitrl
