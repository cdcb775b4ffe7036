#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "spes/error.hpp"

namespace spes {

// Dense row-major tensor, rank 1 or 2 in practice.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != size_t(numel()))
      throw Error(ErrorKind::shape, "tensor data size does not match shape");
  }

  long numel() const {
    long n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }
  int rows() const { return shape[0]; }
  int cols() const { return shape[1]; }

  T& operator()(int i) { return data[size_t(i)]; }
  const T& operator()(int i) const { return data[size_t(i)]; }
  T& operator()(int r, int c) { return data[size_t(r) * shape[1] + c]; }
  const T& operator()(int r, int c) const { return data[size_t(r) * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (const T& v : data) out.data.push_back(U(v));
    return out;
  }
};

}  // namespace spes
