#include "circuitrl/policy/checkpoint.hpp"

#include <string>
#include <utility>

#include "circuitrl/common.hpp"
#include "circuitrl/model/safetensors.hpp"

namespace circuitrl {

namespace {

void store(SafetensorsFile& file, const std::string& prefix, const PolicyParams& p) {
  p.for_each([&](std::string_view name, Eigen::Map<const Eigen::VectorXd> t) {
    file.tensors[prefix + std::string(name)] =
        StoredTensor::from_f64({static_cast<std::int64_t>(t.size())}, std::vector<double>(t.begin(), t.end()));
  });
}

void restore(const SafetensorsFile& file, const std::string& prefix, PolicyParams& p) {
  p.for_each([&](std::string_view name, Eigen::Map<Eigen::VectorXd> t) {
    const std::string key = prefix + std::string(name);
    const auto it = file.tensors.find(key);
    if (it == file.tensors.end()) throw FormatError("checkpoint is missing tensor " + key);
    const StoredTensor& st = it->second;
    if (st.dtype != DType::F64) throw FormatError("checkpoint tensor " + key + " must be F64");
    if (st.numel() != static_cast<std::size_t>(t.size())) {
      throw FormatError("checkpoint tensor " + key + " has " + std::to_string(st.numel()) + " values, expected " +
                        std::to_string(t.size()));
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = st.f64[static_cast<std::size_t>(i)];
  });
}

int meta_int(const SafetensorsFile& f, const std::string& key) {
  const auto it = f.metadata.find(key);
  if (it == f.metadata.end()) throw FormatError("checkpoint metadata lacks " + key);
  return std::stoi(it->second);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  SafetensorsFile f;
  f.metadata = ckpt.metadata;
  const PolicyShape s = ckpt.params.shape();
  f.metadata["obs_dim"] = std::to_string(s.obs_dim);
  f.metadata["hidden"] = std::to_string(s.hidden);
  f.metadata["n_actions"] = std::to_string(s.n_actions);
  f.metadata["adam_step"] = std::to_string(ckpt.adam.step);
  store(f, "policy.", ckpt.params);
  store(f, "adam.m.", ckpt.adam.m);
  store(f, "adam.v.", ckpt.adam.v);
  write_safetensors(path, f);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const SafetensorsFile f = read_safetensors(path);
  const PolicyShape s{meta_int(f, "obs_dim"), meta_int(f, "hidden"), meta_int(f, "n_actions")};
  Checkpoint c;
  c.params = PolicyParams::zeros(s);
  c.adam = AdamState::zeros(s);
  restore(f, "policy.", c.params);
  restore(f, "adam.m.", c.adam.m);
  restore(f, "adam.v.", c.adam.v);
  c.adam.step = std::stoll(f.metadata.at("adam_step"));
  c.metadata = f.metadata;
  for (const auto& [name, t] : f.tensors) {
    if (name.rfind("policy.", 0) != 0 && name.rfind("adam.", 0) != 0) {
      throw FormatError("unexpected tensor in checkpoint: " + name);
    }
  }
  std::as_const(c.params).for_each([](std::string_view name, Eigen::Map<const Eigen::VectorXd> t) {
    if (!t.allFinite()) throw NumericError("checkpoint holds non-finite values in " + std::string(name));
  });
  return c;
}

}  // namespace circuitrl
