// NEON kernel variants (aarch64). Same discipline as the AVX2 file:
// vectorize across columns only, plain mul/add (no fused ops), so results are
// bit-identical to the scalar reference.

#if defined(__aarch64__)

#include <arm_neon.h>

#include "delta/kernels.hpp"

namespace delta::kernels {
namespace {

constexpr std::size_t kLanes = 2;  // doubles per float64x2_t

void colwise_sum_neon(const double* v, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes)
      vst1q_f64(out + c, vaddq_f64(vld1q_f64(out + c), vld1q_f64(row + c)));
    for (; c < cols; ++c) out[c] += row[c];
  }
}

void colwise_sqdiff_sum_neon(const double* v, std::size_t rows, std::size_t cols,
                             const double* center, double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const float64x2_t d = vsubq_f64(vld1q_f64(row + c), vld1q_f64(center + c));
      vst1q_f64(out + c, vaddq_f64(vld1q_f64(out + c), vmulq_f64(d, d)));
    }
    for (; c < cols; ++c) {
      const double d = row[c] - center[c];
      out[c] += d * d;
    }
  }
}

void colwise_dot_neon(const double* a, const double* b, std::size_t rows, std::size_t cols,
                      double* out) {
  for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ra = a + r * cols;
    const double* rb = b + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const float64x2_t prod = vmulq_f64(vld1q_f64(ra + c), vld1q_f64(rb + c));
      vst1q_f64(out + c, vaddq_f64(vld1q_f64(out + c), prod));
    }
    for (; c < cols; ++c) out[c] += ra[c] * rb[c];
  }
}

void mul_columns_neon(const double* v, std::size_t rows, std::size_t cols, const double* scale,
                      double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes)
      vst1q_f64(dst + c, vmulq_f64(vld1q_f64(src + c), vld1q_f64(scale + c)));
    for (; c < cols; ++c) dst[c] = src[c] * scale[c];
  }
}

void shift_scale_columns_neon(const double* v, std::size_t rows, std::size_t cols,
                              const double* center, const double* scale, const double* shift,
                              double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const float64x2_t centered = vsubq_f64(vld1q_f64(src + c), vld1q_f64(center + c));
      const float64x2_t scaled = vmulq_f64(centered, vld1q_f64(scale + c));
      vst1q_f64(dst + c, vaddq_f64(scaled, vld1q_f64(shift + c)));
    }
    for (; c < cols; ++c) dst[c] = (src[c] - center[c]) * scale[c] + shift[c];
  }
}

void scale_shift_columns_neon(const double* v, std::size_t rows, std::size_t cols,
                              const double* scale, const double* shift, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = v + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const float64x2_t scaled = vmulq_f64(vld1q_f64(src + c), vld1q_f64(scale + c));
      vst1q_f64(dst + c, vaddq_f64(scaled, vld1q_f64(shift + c)));
    }
    for (; c < cols; ++c) dst[c] = src[c] * scale[c] + shift[c];
  }
}

void matmul_bias_neon(const double* x, std::size_t rows, std::size_t in_dim, const double* w,
                      const double* bias, std::size_t out_dim, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* dst = out + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) dst[o] = bias[o];
    for (std::size_t i = 0; i < in_dim; ++i) {
      const float64x2_t xi = vdupq_n_f64(xr[i]);
      const double* wrow = w + i * out_dim;
      std::size_t o = 0;
      for (; o + kLanes <= out_dim; o += kLanes) {
        float64x2_t acc = vld1q_f64(dst + o);
        acc = vaddq_f64(acc, vmulq_f64(xi, vld1q_f64(wrow + o)));
        vst1q_f64(dst + o, acc);
      }
      const double xs = xr[i];
      for (; o < out_dim; ++o) dst[o] += xs * wrow[o];
    }
  }
}

void standardize_input_grad_neon(const double* g, const double* vhat, std::size_t rows,
                                 std::size_t cols, const double* inv_sigma, const double* mean_g,
                                 const double* mean_gv, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * cols;
    const double* vr = vhat + r * cols;
    double* dst = out + r * cols;
    std::size_t c = 0;
    for (; c + kLanes <= cols; c += kLanes) {
      const float64x2_t centered = vsubq_f64(vld1q_f64(gr + c), vld1q_f64(mean_g + c));
      const float64x2_t proj = vmulq_f64(vld1q_f64(vr + c), vld1q_f64(mean_gv + c));
      const float64x2_t combined = vsubq_f64(centered, proj);
      vst1q_f64(dst + c, vmulq_f64(vld1q_f64(inv_sigma + c), combined));
    }
    for (; c < cols; ++c) dst[c] = inv_sigma[c] * ((gr[c] - mean_g[c]) - vr[c] * mean_gv[c]);
  }
}

void relu_neon(const double* v, std::size_t n, double* out) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vmaxq_f64(vld1q_f64(v + i), zero));
  for (; i < n; ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_grad_neon(const double* g, const double* pre, std::size_t n, double* out) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(pre + i), zero);
    const uint64x2_t kept = vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), mask);
    vst1q_f64(out + i, vreinterpretq_f64_u64(kept));
  }
  for (; i < n; ++i) out[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Ops* neon_ops_impl() {
  static const Ops ops = {
      "neon",
      colwise_sum_neon,
      colwise_sqdiff_sum_neon,
      colwise_dot_neon,
      mul_columns_neon,
      shift_scale_columns_neon,
      scale_shift_columns_neon,
      matmul_bias_neon,
      standardize_input_grad_neon,
      relu_neon,
      relu_grad_neon,
  };
  return &ops;
}

}  // namespace delta::kernels

#endif  // aarch64
