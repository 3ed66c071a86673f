#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dar/common.hpp"

namespace dar {

using Scalar = double;

// Dense row-major tensor. Rank 1 (vectors) and rank 2 (matrices) cover almost
// everything in the toolkit; conv filter banks are rank 3.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Scalar> values;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    values.assign(count(shape), 0.0);
  }

  Tensor(std::vector<std::size_t> s, std::vector<Scalar> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != count(shape)) {
      throw DimensionError("tensor value count does not match shape");
    }
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor vector_of(std::vector<Scalar> v) {
    std::vector<std::size_t> s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  Scalar& at(std::size_t i) { return values[i]; }
  Scalar at(std::size_t i) const { return values[i]; }
  Scalar& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  Scalar at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  void fill(Scalar v) { std::fill(values.begin(), values.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (Scalar v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << "x";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace dar
