#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "octnet/errors.hpp"

namespace octnet {

using Shape = std::vector<int>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

inline void check_shape_valid(const Shape& shape) {
  for (int d : shape) {
    if (d < 1) throw ShapeError("invalid shape " + shape_str(shape) + ": all entries must be >= 1");
  }
}

// Dense n-dimensional array, row-major. Images use NxHxWxC. The scalar type
// is float in normal use; double is reserved for finite-difference oracles.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    data_.assign(static_cast<size_t>(numel(shape_)), fill);
  }

  static Tensor from_vector(Shape shape, std::vector<T> data) {
    check_shape_valid(shape);
    if (numel(shape) != static_cast<int64_t>(data.size())) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // NHWC addressing.
  T& at(int n, int h, int w, int c) {
    return data_[static_cast<size_t>(((static_cast<int64_t>(n) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
  }
  const T& at(int n, int h, int w, int c) const {
    return data_[static_cast<size_t>(((static_cast<int64_t>(n) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c)];
  }
  T& at(int n, int d) { return data_[static_cast<size_t>(static_cast<int64_t>(n) * shape_[1] + d)]; }
  const T& at(int n, int d) const { return data_[static_cast<size_t>(static_cast<int64_t>(n) * shape_[1] + d)]; }
  // HWC addressing for single images.
  T& at(int h, int w, int c) {
    return data_[static_cast<size_t>((static_cast<int64_t>(h) * shape_[1] + w) * shape_[2] + c)];
  }
  const T& at(int h, int w, int c) const {
    return data_[static_cast<size_t>((static_cast<int64_t>(h) * shape_[1] + w) * shape_[2] + c)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor reshaped(Shape new_shape) const {
    check_shape_valid(new_shape);
    if (numel(new_shape) != size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " (" + std::to_string(size()) +
                       " values) to " + shape_str(new_shape));
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>::from_vector(shape_, std::move(d));
  }

private:
  Shape shape_;
  std::vector<T> data_;

  template <typename U>
  friend class Tensor;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  const T* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  }
  return true;
}

template <typename T>
int64_t first_non_finite_index(const Tensor<T>& t) {
  const T* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) return i;
  }
  return -1;
}

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace octnet
