#pragma once
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "stlctl/error.hpp"

namespace stlctl {

// Dense row-major tensor of doubles. Rank 0 is a scalar (one element).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
  }

  static Tensor zeros(std::vector<std::size_t> shape_) {
    Tensor t;
    t.shape = std::move(shape_);
    t.data.assign(t.count(), 0.0);
    return t;
  }

  static Tensor vector(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    if (t.data.size() != rows * cols) throw ShapeError("matrix data size does not match rows*cols");
    return t;
  }

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  bool is_scalar() const { return shape.empty() && data.size() == 1; }

  double value() const {
    if (data.size() != 1) throw ShapeError("value() on non-scalar tensor");
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace stlctl
