#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace circuitrl {

// Raised when a caller breaks an operation's precondition (repeated action,
// step after termination, illegal candidate count, ...). The CLI maps it to a
// nonzero exit status.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or inconsistent input files (weights, tokenizer assets, pools).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (weights, gradients, losses).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finaliser; used to derive independent seeds from (seed, tag) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

// Stream tags so that each consumer of an episode seed draws from its own RNG.
namespace seed_tag {
inline constexpr std::uint64_t kTaskChoice = 0x7461736bULL;
inline constexpr std::uint64_t kTaskBatch = 0x62617463ULL;
inline constexpr std::uint64_t kControl = 0x6374726cULL;
inline constexpr std::uint64_t kEnvStream = 0x656e7673ULL;
}  // namespace seed_tag

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// processed exactly once; callers write results to slot i so the output is
// independent of scheduling.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace circuitrl
