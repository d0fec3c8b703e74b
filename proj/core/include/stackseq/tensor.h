#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace stackseq {

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("tensor shape has negative dim");
    n *= d;
  }
  return n;
}

// Dense row-major tensor over float or double. Rank 0 means a scalar
// (numel 1), which is how per-block alpha parameters are carried.
template <typename T>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor data length does not match shape");
  }

  static TensorT zeros(std::vector<int64_t> s) {
    TensorT t;
    int64_t n = shape_numel(s);
    t.shape = std::move(s);
    t.data.assign(static_cast<size_t>(n), T(0));
    return t;
  }

  static TensorT full(std::vector<int64_t> s, T value) {
    TensorT t = zeros(std::move(s));
    for (T& v : t.data) v = value;
    return t;
  }

  static TensorT scalar(T value) { return TensorT({}, {value}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 2-d / 3-d accessors for tests and glue code; hot loops index flat.
  T& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  const T& at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  T& at(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  const T& at(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(T value) {
    for (T& v : data) v = value;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Integer id tensor (item ids / targets). Ids are int32; 0 is the padding id.
struct IntTensor {
  std::vector<int64_t> shape;
  std::vector<int32_t> data;

  IntTensor() = default;
  IntTensor(std::vector<int64_t> s, std::vector<int32_t> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("int tensor data length does not match shape");
  }

  static IntTensor zeros(std::vector<int64_t> s) {
    IntTensor t;
    int64_t n = shape_numel(s);
    t.shape = std::move(s);
    t.data.assign(static_cast<size_t>(n), 0);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  int32_t& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  int32_t at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
};

template <typename T>
bool bit_equal(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (!(a.data[i] == b.data[i]) || std::signbit(a.data[i]) != std::signbit(b.data[i]))
      return false;
  return true;
}

template <typename T>
std::string shape_str(const TensorT<T>& t) {
  std::string s = "[";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

template <typename T>
void check_shape(const TensorT<T>& t, const std::vector<int64_t>& expect, const char* what) {
  if (t.shape != expect)
    throw std::invalid_argument(std::string(what) + ": unexpected shape " + shape_str(t));
}

}  // namespace stackseq
