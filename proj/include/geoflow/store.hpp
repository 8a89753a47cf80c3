#pragma once
#include <cstdint>
#include <map>
#include <string>

#include "geoflow/rng.hpp"
#include "geoflow/tensor.hpp"

namespace geoflow {

// Named parameter tensors with per-tensor AdamW state. Names are unique and
// shapes fixed after creation. Tensors whose name starts with "z/" are
// latent feature maps and are exempt from decoupled weight decay (they carry
// an explicit L2 term instead).
template <typename T>
struct ParameterStoreT {
  struct Entry {
    TensorT<T> value;
    TensorT<T> m, v;  // AdamW moments
    int64_t step = 0;
  };

  std::map<std::string, Entry> entries;  // ordered for deterministic iteration

  TensorT<T>& create(const std::string& name, std::vector<int> shape) {
    if (entries.count(name)) throw UsageError("parameter already exists: " + name);
    Entry e;
    e.value = TensorT<T>(shape);
    e.m = TensorT<T>(shape);
    e.v = TensorT<T>(std::move(shape));
    return entries.emplace(name, std::move(e)).first->second.value;
  }

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  TensorT<T>& get(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw UsageError("no such parameter: " + name);
    return it->second.value;
  }
  const TensorT<T>& get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw UsageError("no such parameter: " + name);
    return it->second.value;
  }

  // Gaussian init scaled by 1/sqrt(fan_in); fan_in = first shape dim for
  // rank-2 weights, Cin*kh*kw for conv kernels.
  TensorT<T>& create_gaussian(const std::string& name, std::vector<int> shape, uint64_t seed) {
    TensorT<T>& t = create(name, std::move(shape));
    size_t fan_in = 1;
    if (t.rank() == 2) fan_in = size_t(t.shape[0]);
    else if (t.rank() == 4) fan_in = size_t(t.shape[1]) * t.shape[2] * t.shape[3];
    double scale = 1.0 / std::sqrt(double(fan_in));
    Rng rng(seed, 0x40);
    for (auto& x : t.data) x = T(rng.normal() * scale);
    return t;
  }
};

using ParameterStore = ParameterStoreT<float>;

template <typename T>
using GradientsT = std::map<std::string, TensorT<T>>;
using Gradients = GradientsT<float>;

}  // namespace geoflow
