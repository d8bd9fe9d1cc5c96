#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdm/conv_denoiser.hpp"

namespace rdm {

// Versioned binary checkpoint container.
//
//   magic   "RDMK" (4 bytes)
//   version u32 LE (currently 1)
//   count   u32 LE, number of tensors, then per tensor:
//     name_len u32 LE, name bytes (UTF-8, no terminator)
//     ndim     u32 LE, dims u32 LE each
//     data     prod(dims) f64 LE
struct NamedTensor {
  std::vector<uint32_t> shape;
  std::vector<double> data;
};

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline void put_f64(std::ostream& out, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(u >> (8 * i));
  out.write(b, 8);
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path,
                         const std::map<std::string, NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_tensors: cannot open " + path);
  out.write("RDMK", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<uint32_t>(t.shape.size()));
    size_t n = 1;
    for (uint32_t d : t.shape) {
      detail::put_u32(out, d);
      n *= d;
    }
    if (n != t.data.size())
      throw std::invalid_argument("save_tensors: shape/data mismatch for " + name);
    for (double v : t.data) detail::put_f64(out, v);
  }
  if (!out) throw std::runtime_error("save_tensors: write failed for " + path);
}

inline std::map<std::string, NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tensors: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RDMK", 4) != 0)
    throw std::runtime_error("load_tensors: bad magic in " + path);
  uint32_t version = detail::get_u32(in);
  if (version != 1)
    throw std::runtime_error("load_tensors: unsupported version " +
                             std::to_string(version));
  uint32_t count = detail::get_u32(in);
  std::map<std::string, NamedTensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = detail::get_u32(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    NamedTensor t;
    uint32_t ndim = detail::get_u32(in);
    size_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(detail::get_u32(in));
      n *= t.shape.back();
    }
    t.data.resize(n);
    for (double& v : t.data) v = detail::get_f64(in);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ConvDenoiserParams& p) {
  uint32_t C = static_cast<uint32_t>(p.channels);
  uint32_t K = static_cast<uint32_t>(p.n_classes);
  std::map<std::string, NamedTensor> t;
  t["conv1.weight"] = {{C, 1, 3, 3}, p.w1};
  t["conv1.bias"] = {{C}, p.b1};
  t["conv1.sigma_embed"] = {{C}, p.e1};
  t["class_embed"] = {{K, C}, p.cls};
  t["conv2.weight"] = {{C, C, 3, 3}, p.w2};
  t["conv2.bias"] = {{C}, p.b2};
  t["conv2.sigma_embed"] = {{C}, p.e2};
  t["conv3.weight"] = {{1, C, 3, 3}, p.w3};
  t["conv3.bias"] = {{1}, p.b3};
  t["sigma_data"] = {{1}, {p.sigma_data}};
  save_tensors(path, t);
}

inline ConvDenoiserParams load_checkpoint(const std::string& path) {
  auto t = load_tensors(path);
  auto need = [&](const std::string& name) -> NamedTensor& {
    auto it = t.find(name);
    if (it == t.end())
      throw std::runtime_error("load_checkpoint: missing tensor " + name);
    return it->second;
  };
  NamedTensor& w1 = need("conv1.weight");
  if (w1.shape.size() != 4) throw std::runtime_error("load_checkpoint: bad conv1 shape");
  int C = static_cast<int>(w1.shape[0]);
  NamedTensor& cls = need("class_embed");
  int K = static_cast<int>(cls.shape.empty() ? 0 : cls.shape[0]);
  ConvDenoiserParams p = ConvDenoiserParams::zeros(C, K, need("sigma_data").data[0]);
  p.w1 = w1.data;
  p.b1 = need("conv1.bias").data;
  p.e1 = need("conv1.sigma_embed").data;
  p.cls = cls.data;
  p.w2 = need("conv2.weight").data;
  p.b2 = need("conv2.bias").data;
  p.e2 = need("conv2.sigma_embed").data;
  p.w3 = need("conv3.weight").data;
  p.b3 = need("conv3.bias").data;
  if (p.param_count() !=
      ConvDenoiserParams::zeros(C, K, p.sigma_data).param_count())
    throw std::runtime_error("load_checkpoint: inconsistent tensor sizes");
  return p;
}

}  // namespace rdm
