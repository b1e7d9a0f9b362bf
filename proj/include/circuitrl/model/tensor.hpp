#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace circuitrl {

// Row-major [batch x seq] matrix of token ids.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::int32_t> ids;

  TokenBatch() = default;
  TokenBatch(std::size_t b, std::size_t s, std::int32_t fill = 0) : batch(b), seq(s), ids(b * s, fill) {}

  std::int32_t& at(std::size_t b, std::size_t s) { return ids[b * seq + s]; }
  std::int32_t at(std::size_t b, std::size_t s) const { return ids[b * seq + s]; }
  std::span<const std::int32_t> row(std::size_t b) const { return {ids.data() + b * seq, seq}; }
  std::span<std::int32_t> row(std::size_t b) { return {ids.data() + b * seq, seq}; }

  bool operator==(const TokenBatch&) const = default;
};

// Dense row-major fp32 tensor of rank 3, e.g. [batch x seq x vocab] logits or
// [batch x seq x d_model] residual activations.
struct Tensor3 {
  std::size_t dim0 = 0;
  std::size_t dim1 = 0;
  std::size_t dim2 = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c) : dim0(a), dim1(b), dim2(c), data(a * b * c, 0.0f) {}

  float& at(std::size_t i, std::size_t j, std::size_t k) { return data[(i * dim1 + j) * dim2 + k]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return data[(i * dim1 + j) * dim2 + k]; }
  std::span<float> row(std::size_t i, std::size_t j) { return {data.data() + (i * dim1 + j) * dim2, dim2}; }
  std::span<const float> row(std::size_t i, std::size_t j) const {
    return {data.data() + (i * dim1 + j) * dim2, dim2};
  }
};

using Logits = Tensor3;

}  // namespace circuitrl
