#pragma once

#include <string>
#include <vector>

#include "spes/tensor.hpp"

namespace spes {

// Named parameter tensors with a stable flat layout (registration order).
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  int add(std::string name, Tensor<T> init) {
    Entry e;
    e.name = std::move(name);
    e.grad = Tensor<T>(init.shape);
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    return int(entries_.size()) - 1;
  }

  Entry& entry(int i) { return entries_[size_t(i)]; }
  const Entry& entry(int i) const { return entries_[size_t(i)]; }
  int count() const { return int(entries_.size()); }

  size_t total() const {
    size_t n = 0;
    for (const auto& e : entries_) n += size_t(e.value.numel());
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_)
      std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
  }

  std::vector<T> flatten_values() const {
    std::vector<T> out;
    out.reserve(total());
    for (const auto& e : entries_)
      out.insert(out.end(), e.value.data.begin(), e.value.data.end());
    return out;
  }

  std::vector<T> flatten_grads() const {
    std::vector<T> out;
    out.reserve(total());
    for (const auto& e : entries_)
      out.insert(out.end(), e.grad.data.begin(), e.grad.data.end());
    return out;
  }

  void load_flat(const std::vector<T>& flat) {
    if (flat.size() != total())
      throw Error(ErrorKind::shape, "ParamStore: flat vector size mismatch");
    size_t off = 0;
    for (auto& e : entries_) {
      std::copy_n(flat.begin() + long(off), e.value.data.size(), e.value.data.begin());
      off += e.value.data.size();
    }
  }

  // flat-index access, used by the finite-difference checks
  T get_flat(size_t i) const {
    for (const auto& e : entries_) {
      if (i < e.value.data.size()) return e.value.data[i];
      i -= e.value.data.size();
    }
    throw Error(ErrorKind::input, "ParamStore: flat index out of range");
  }
  void set_flat(size_t i, T v) {
    for (auto& e : entries_) {
      if (i < e.value.data.size()) {
        e.value.data[i] = v;
        return;
      }
      i -= e.value.data.size();
    }
    throw Error(ErrorKind::input, "ParamStore: flat index out of range");
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace spes
