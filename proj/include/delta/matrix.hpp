#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "delta/common.hpp"

namespace delta {

// Dense row-major matrix of doubles. Row = sample, column = feature/channel.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_finite(const Matrix& m, const std::string& what) {
  if (!m.all_finite()) throw NumericError("non-finite values in " + what);
}

}  // namespace delta
