#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "colorcnn/core/check.hpp"

namespace colorcnn::nn {

// Dense row-major tensor; activations use NCHW.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(numel()), T(0));
  }
  Tensor(std::initializer_list<int> s) : Tensor(std::vector<int>(s)) {}

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int dim(int i) const { return shape[size_t(i)]; }
  int rank() const { return int(shape.size()); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  // reinterpret without copying; element count must match
  Tensor<T> reshaped(std::vector<int> s) const {
    Tensor<T> out;
    out.shape = std::move(s);
    COLORCNN_CHECK(out.numel() == numel(), "reshape changes element count");
    out.data = data;
    return out;
  }

  // NCHW accessor for tests and slow paths
  T& at(int n, int c, int h, int w) {
    return data[((size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  T at(int n, int c, int h, int w) const {
    return data[((size_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  bool same_shape(const Tensor<T>& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape);
}

}  // namespace colorcnn::nn
