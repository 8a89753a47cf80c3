#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "geoflow/errors.hpp"

namespace geoflow {

// Dense row-major tensor. Rank is small (1..3); float for training,
// double for the finite-difference shadow in tests.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> shape_) : shape(std::move(shape_)) {
    data.assign(numel_of(shape), T(0));
  }
  TensorT(std::vector<int> shape_, std::vector<T> data_) : shape(std::move(shape_)), data(std::move(data_)) {
    if (data.size() != numel_of(shape)) throw UsageError("tensor data does not match shape");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= size_t(d);
    return n;
  }

  size_t numel() const { return data.size(); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }
  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  T& at(int r, int c) { return data[size_t(r) * shape[1] + c]; }        // rank-2
  T at(int r, int c) const { return data[size_t(r) * shape[1] + c]; }
  T& at(int ch, int r, int c) {                                         // rank-3 (C,H,W)
    return data[(size_t(ch) * shape[1] + r) * shape[2] + c];
  }
  T at(int ch, int r, int c) const { return data[(size_t(ch) * shape[1] + r) * shape[2] + c]; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace geoflow
