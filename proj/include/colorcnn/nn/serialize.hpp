#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "colorcnn/core/check.hpp"
#include "colorcnn/nn/layers.hpp"
#include "colorcnn/nn/tensor.hpp"

namespace colorcnn::nn {

inline constexpr char kCkptMagic[8] = {'C', 'C', 'N', 'N', 'C', 'K', 'P', 'T'};

// checkpoint layout: magic, u32 version, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rank, i32 dims, f32 payload (little endian)
inline void save_tensors(const std::string& path,
                         const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors) {
  std::ofstream f(path, std::ios::binary);
  COLORCNN_CHECK(f.good(), "cannot open checkpoint for writing: " << path);
  f.write(kCkptMagic, 8);
  uint32_t version = 1, count = uint32_t(tensors.size());
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&count), 4);
  for (auto& [name, t] : tensors) {
    uint32_t nl = uint32_t(name.size());
    f.write(reinterpret_cast<const char*>(&nl), 4);
    f.write(name.data(), nl);
    uint32_t rank = uint32_t(t->rank());
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (int d : t->shape) {
      int32_t v = d;
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
    f.write(reinterpret_cast<const char*>(t->ptr()), std::streamsize(t->numel()) * 4);
  }
  COLORCNN_CHECK(f.good(), "checkpoint write failed: " << path);
}

inline std::map<std::string, Tensor<float>> load_tensors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  COLORCNN_CHECK(f.good(), "cannot open checkpoint: " << path);
  char magic[8];
  f.read(magic, 8);
  COLORCNN_CHECK(f.good() && std::equal(magic, magic + 8, kCkptMagic),
                 "not a checkpoint file: " << path);
  uint32_t version = 0, count = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&count), 4);
  COLORCNN_CHECK(version == 1, "unsupported checkpoint version " << version);
  std::map<std::string, Tensor<float>> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t nl = 0;
    f.read(reinterpret_cast<char*>(&nl), 4);
    COLORCNN_CHECK(f.good() && nl < 4096, "corrupt checkpoint: " << path);
    std::string name(nl, '\0');
    f.read(name.data(), nl);
    uint32_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 4);
    COLORCNN_CHECK(f.good() && rank <= 8, "corrupt checkpoint: " << path);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      int32_t v = 0;
      f.read(reinterpret_cast<char*>(&v), 4);
      COLORCNN_CHECK(v > 0, "corrupt checkpoint: " << path);
      d = v;
    }
    Tensor<float> t(shape);
    f.read(reinterpret_cast<char*>(t.ptr()), std::streamsize(t.numel()) * 4);
    COLORCNN_CHECK(f.good(), "truncated checkpoint: " << path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

inline void save_module(const std::string& path, Module<float>& m) {
  std::vector<std::pair<std::string, const Tensor<float>*>> ts;
  for (auto& p : m.params()) ts.emplace_back(p.name, p.value);
  for (auto& b : m.buffers()) ts.emplace_back(b.name, b.value);
  save_tensors(path, ts);
}

inline void load_module(const std::string& path, Module<float>& m) {
  auto ts = load_tensors(path);
  size_t used = 0;
  auto apply = [&](const std::string& name, Tensor<float>* dst) {
    auto it = ts.find(name);
    COLORCNN_CHECK(it != ts.end(), "checkpoint missing tensor " << name);
    COLORCNN_CHECK(it->second.shape == dst->shape,
                   "checkpoint shape mismatch for " << name);
    *dst = it->second;
    ++used;
  };
  for (auto& p : m.params()) apply(p.name, p.value);
  for (auto& b : m.buffers()) apply(b.name, b.value);
  COLORCNN_CHECK(used == ts.size(),
                 "checkpoint has " << ts.size() << " tensors, model consumed " << used);
}

inline void write_manifest(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path);
  COLORCNN_CHECK(f.good(), "cannot open manifest for writing: " << path);
  for (auto& [k, v] : kv) f << k << " = " << v << "\n";
}

inline std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream f(path);
  COLORCNN_CHECK(f.good(), "cannot open manifest: " << path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace colorcnn::nn
