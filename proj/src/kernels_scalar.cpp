#include "delta/kernels.hpp"

// Scalar reference kernels. These define the semantics every SIMD variant
// must reproduce bit-for-bit: reductions walk rows in ascending order with a
// single accumulator per column.

namespace delta::kernels {
namespace {

void colwise_sum_scalar(const double* v, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

void colwise_sqdiff_sum_scalar(const double* v, std::size_t rows, std::size_t cols,
                               const double* center, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - center[c];
      out[c] += d * d;
    }
  }
}

void colwise_dot_scalar(const double* a, const double* b, std::size_t rows, std::size_t cols,
                        double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ra = a + r * cols;
    const double* rb = b + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += ra[c] * rb[c];
  }
}

void mul_columns_scalar(const double* v, std::size_t rows, std::size_t cols, const double* scale,
                        double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c] * scale[c];
  }
}

void shift_scale_columns_scalar(const double* v, std::size_t rows, std::size_t cols,
                                const double* center, const double* scale, const double* shift,
                                double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] = (src[c] - center[c]) * scale[c] + shift[c];
  }
}

void scale_shift_columns_scalar(const double* v, std::size_t rows, std::size_t cols,
                                const double* scale, const double* shift, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c] * scale[c] + shift[c];
  }
}

void matmul_bias_scalar(const double* x, std::size_t rows, std::size_t in_dim, const double* w,
                        const double* bias, std::size_t out_dim, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* dst = out + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) dst[o] = bias[o];
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double xi = xr[i];
      const double* wrow = w + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) dst[o] += xi * wrow[o];
    }
  }
}

void standardize_input_grad_scalar(const double* g, const double* vhat, std::size_t rows,
                                   std::size_t cols, const double* inv_sigma, const double* mean_g,
                                   const double* mean_gv, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * cols;
    const double* vr = vhat + r * cols;
    double* dst = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c)
      dst[c] = inv_sigma[c] * ((gr[c] - mean_g[c]) - vr[c] * mean_gv[c]);
  }
}

void relu_scalar(const double* v, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_grad_scalar(const double* g, const double* pre, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {
      "scalar",
      colwise_sum_scalar,
      colwise_sqdiff_sum_scalar,
      colwise_dot_scalar,
      mul_columns_scalar,
      shift_scale_columns_scalar,
      scale_shift_columns_scalar,
      matmul_bias_scalar,
      standardize_input_grad_scalar,
      relu_scalar,
      relu_grad_scalar,
  };
  return ops;
}

}  // namespace delta::kernels
