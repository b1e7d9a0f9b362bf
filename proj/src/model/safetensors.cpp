#include "circuitrl/model/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "circuitrl/common.hpp"

namespace circuitrl {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

namespace {

const char* dtype_name(DType d) { return d == DType::F32 ? "F32" : "F64"; }

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

std::size_t product(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) {
    if (s < 0) throw FormatError("negative dimension in tensor shape");
    n *= static_cast<std::size_t>(s);
  }
  return n;
}

}  // namespace

std::size_t StoredTensor::numel() const { return product(shape); }

StoredTensor StoredTensor::from_f32(std::vector<std::int64_t> shape, std::vector<float> values) {
  StoredTensor t;
  t.dtype = DType::F32;
  t.shape = std::move(shape);
  t.f32 = std::move(values);
  if (t.f32.size() != t.numel()) throw std::invalid_argument("tensor values do not match shape");
  return t;
}

StoredTensor StoredTensor::from_f64(std::vector<std::int64_t> shape, std::vector<double> values) {
  StoredTensor t;
  t.dtype = DType::F64;
  t.shape = std::move(shape);
  t.f64 = std::move(values);
  if (t.f64.size() != t.numel()) throw std::invalid_argument("tensor values do not match shape");
  return t;
}

SafetensorsFile read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file: " + path.string());

  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw FormatError("truncated safetensors header length in " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  if (header_len > file_size - 8) throw FormatError("safetensors header length exceeds file size");

  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated safetensors header in " + path.string());

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed safetensors header: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("safetensors header is not a JSON object");

  const std::uint64_t data_size = file_size - 8 - header_len;
  std::vector<char> data(data_size);
  in.read(data.data(), static_cast<std::streamsize>(data_size));
  if (!in) throw FormatError("truncated safetensors data section");

  SafetensorsFile out;
  for (const auto& [name, entry] : j.items()) {
    if (name == "__metadata__") {
      for (const auto& [k, v] : entry.items()) {
        if (!v.is_string()) throw FormatError("metadata value for '" + k + "' is not a string");
        out.metadata[k] = v.get<std::string>();
      }
      continue;
    }
    StoredTensor t;
    const std::string dtype = entry.value("dtype", "");
    if (dtype == "F32") {
      t.dtype = DType::F32;
    } else if (dtype == "F64") {
      t.dtype = DType::F64;
    } else {
      throw FormatError("tensor '" + name + "' has unsupported dtype '" + dtype + "'");
    }
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > data_size) {
      throw FormatError("tensor '" + name + "' has invalid data offsets");
    }
    const std::size_t n = product(t.shape);
    if (offsets[1] - offsets[0] != n * dtype_size(t.dtype)) {
      throw FormatError("tensor '" + name + "' byte length does not match its shape");
    }
    const char* src = data.data() + offsets[0];
    if (t.dtype == DType::F32) {
      t.f32.resize(n);
      std::memcpy(t.f32.data(), src, n * 4);
    } else {
      t.f64.resize(n);
      std::memcpy(t.f64.data(), src, n * 8);
    }
    out.tensors.emplace(name, std::move(t));
  }
  return out;
}

void write_safetensors(const std::filesystem::path& path, const SafetensorsFile& file) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    const std::uint64_t bytes = t.numel() * dtype_size(t.dtype);
    header[name] = {{"dtype", dtype_name(t.dtype)}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!file.metadata.empty()) header["__metadata__"] = file.metadata;

  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : file.tensors) {
    if (t.dtype == DType::F32) {
      out.write(reinterpret_cast<const char*>(t.f32.data()), static_cast<std::streamsize>(t.f32.size() * 4));
    } else {
      out.write(reinterpret_cast<const char*>(t.f64.data()), static_cast<std::streamsize>(t.f64.size() * 8));
    }
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace circuitrl
