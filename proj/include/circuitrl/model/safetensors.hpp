#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace circuitrl {

enum class DType { F32, F64 };

// One tensor of a safetensors container. Exactly one of f32/f64 is populated,
// matching dtype.
struct StoredTensor {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t numel() const;

  static StoredTensor from_f32(std::vector<std::int64_t> shape, std::vector<float> values);
  static StoredTensor from_f64(std::vector<std::int64_t> shape, std::vector<double> values);
};

// The subset of the safetensors format used here: little-endian u64 header
// length, a JSON header mapping names to {dtype, shape, data_offsets} plus an
// optional "__metadata__" string map, then the packed tensor bytes. Only F32
// and F64 tensors are supported.
struct SafetensorsFile {
  std::map<std::string, StoredTensor> tensors;
  std::map<std::string, std::string> metadata;
};

// Throws FormatError on truncated files, malformed headers, unsupported
// dtypes, or offsets that do not match shapes.
SafetensorsFile read_safetensors(const std::filesystem::path& path);

// Tensors are written in name order and the header has no timestamps, so
// equal inputs produce byte-identical files.
void write_safetensors(const std::filesystem::path& path, const SafetensorsFile& file);

}  // namespace circuitrl
