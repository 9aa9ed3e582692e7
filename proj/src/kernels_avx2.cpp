// AVX2 kernel variants. Vectorization is strictly across the column axis;
// each column keeps a single accumulator updated in row order, so results are
// bit-identical to the scalar reference (no FMA, no reassociation).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "delta/kernels.hpp"

namespace delta::kernels {
namespace {

constexpr std::size_t kLanes = 4;  // doubles per __m256d

void colwise_sum_avx2(const double* v, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      __m256d acc = _mm256_loadu_pd(out + c);
      acc = _mm256_add_pd(acc, _mm256_loadu_pd(row + c));
      _mm256_storeu_pd(out + c, acc);
    }
    for (; c < cols; ++c) out[c] += row[c];
  }
}

void colwise_sqdiff_sum_avx2(const double* v, std::size_t rows, std::size_t cols,
                             const double* center, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(row + c), _mm256_loadu_pd(center + c));
      __m256d acc = _mm256_loadu_pd(out + c);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
      _mm256_storeu_pd(out + c, acc);
    }
    for (; c < cols; ++c) {
      const double d = row[c] - center[c];
      out[c] += d * d;
    }
  }
}

void colwise_dot_avx2(const double* a, const double* b, std::size_t rows, std::size_t cols,
                      double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ra = a + r * cols;
    const double* rb = b + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      __m256d acc = _mm256_loadu_pd(out + c);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(ra + c), _mm256_loadu_pd(rb + c)));
      _mm256_storeu_pd(out + c, acc);
    }
    for (; c < cols; ++c) out[c] += ra[c] * rb[c];
  }
}

void mul_columns_avx2(const double* v, std::size_t rows, std::size_t cols, const double* scale,
                      double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes)
      _mm256_storeu_pd(dst + c, _mm256_mul_pd(_mm256_loadu_pd(src + c), _mm256_loadu_pd(scale + c)));
    for (; c < cols; ++c) dst[c] = src[c] * scale[c];
  }
}

void shift_scale_columns_avx2(const double* v, std::size_t rows, std::size_t cols,
                              const double* center, const double* scale, const double* shift,
                              double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const __m256d centered = _mm256_sub_pd(_mm256_loadu_pd(src + c), _mm256_loadu_pd(center + c));
      const __m256d scaled = _mm256_mul_pd(centered, _mm256_loadu_pd(scale + c));
      _mm256_storeu_pd(dst + c, _mm256_add_pd(scaled, _mm256_loadu_pd(shift + c)));
    }
    for (; c < cols; ++c) dst[c] = (src[c] - center[c]) * scale[c] + shift[c];
  }
}

void scale_shift_columns_avx2(const double* v, std::size_t rows, std::size_t cols,
                              const double* scale, const double* shift, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const __m256d scaled = _mm256_mul_pd(_mm256_loadu_pd(src + c), _mm256_loadu_pd(scale + c));
      _mm256_storeu_pd(dst + c, _mm256_add_pd(scaled, _mm256_loadu_pd(shift + c)));
    }
    for (; c < cols; ++c) dst[c] = src[c] * scale[c] + shift[c];
  }
}

void matmul_bias_avx2(const double* x, std::size_t rows, std::size_t in_dim, const double* w,
                      const double* bias, std::size_t out_dim, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* dst = out + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) dst[o] = bias[o];
    for (std::size_t i = 0; i < in_dim; ++i) {
      const __m256d xi = _mm256_set1_pd(xr[i]);
      const double* wrow = w + i * out_dim;
      std::size_t o = 0;
      for (; o + kLanes <= out_dim; o += kLanes) {
        __m256d acc = _mm256_loadu_pd(dst + o);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(xi, _mm256_loadu_pd(wrow + o)));
        _mm256_storeu_pd(dst + o, acc);
      }
      const double xs = xr[i];
      for (; o < out_dim; ++o) dst[o] += xs * wrow[o];
    }
  }
}

void standardize_input_grad_avx2(const double* g, const double* vhat, std::size_t rows,
                                 std::size_t cols, const double* inv_sigma, const double* mean_g,
                                 const double* mean_gv, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * cols;
    const double* vr = vhat + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const __m256d centered = _mm256_sub_pd(_mm256_loadu_pd(gr + c), _mm256_loadu_pd(mean_g + c));
      const __m256d proj = _mm256_mul_pd(_mm256_loadu_pd(vr + c), _mm256_loadu_pd(mean_gv + c));
      const __m256d combined = _mm256_sub_pd(centered, proj);
      _mm256_storeu_pd(dst + c, _mm256_mul_pd(_mm256_loadu_pd(inv_sigma + c), combined));
    }
    for (; c < cols; ++c) dst[c] = inv_sigma[c] * ((gr[c] - mean_g[c]) - vr[c] * mean_gv[c]);
  }
}

void relu_avx2(const double* v, std::size_t n, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(v + i), zero));
  for (; i < n; ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_grad_avx2(const double* g, const double* pre, std::size_t n, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
  }
  for (; i < n; ++i) out[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Ops* avx2_ops_impl() {
  static const Ops ops = {
      "avx2",
      colwise_sum_avx2,
      colwise_sqdiff_sum_avx2,
      colwise_dot_avx2,
      mul_columns_avx2,
      shift_scale_columns_avx2,
      scale_shift_columns_avx2,
      matmul_bias_avx2,
      standardize_input_grad_avx2,
      relu_avx2,
      relu_grad_avx2,
  };
  return &ops;
}

}  // namespace delta::kernels

#endif  // x86-64
