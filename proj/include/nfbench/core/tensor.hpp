#pragma once

// Dense row-major n-d array. Plain value storage; differentiation lives in
// graph.hpp, which records operations over these.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfbench {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) n *= static_cast<std::size_t>(e);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), values_(shape_numel(shape_), T(0)) {
    validate_shape();
  }

  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    validate_shape();
    require(values_.size() == shape_numel(shape_),
            "tensor: value count " + std::to_string(values_.size()) +
                " does not match shape " + shape_str(shape_));
  }

  Tensor(Shape shape, std::initializer_list<T> values)
      : Tensor(std::move(shape), std::vector<T>(values)) {}

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // 2-d conveniences
  int rows() const { return shape_.size() >= 1 ? shape_[0] : 0; }
  int cols() const { return shape_.size() >= 2 ? shape_[1] : 1; }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  T& at(int r, int c) { return values_[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const {
    return values_[static_cast<std::size_t>(r) * cols() + c];
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }
  void zero() { fill(T(0)); }

  bool all_finite() const {
    for (const T& v : values_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i)
      out[i] = static_cast<U>(values_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  void validate_shape() const {
    for (int e : shape_)
      require(e > 0, "tensor: non-positive extent in shape " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> values_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace nfbench
