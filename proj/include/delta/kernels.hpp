#pragma once

#include <cstddef>
#include <string>

namespace delta::kernels {

// Hot inner loops of the network, expressed over raw row-major buffers.
//
// Every kernel has a scalar reference implementation and may have SIMD
// variants (AVX2 on x86-64, NEON on aarch64). All variants vectorize across
// the column/channel axis only, so per-element operation order — including
// the order of every reduction over rows — is identical to the scalar
// reference. Combined with -ffp-contract=off this makes every variant
// bit-identical to the scalar path, which the test suite asserts.
struct Ops {
  const char* name;

  // out[c] = sum_r v[r,c]
  void (*colwise_sum)(const double* v, std::size_t rows, std::size_t cols, double* out);

  // out[c] = sum_r (v[r,c] - center[c])^2
  void (*colwise_sqdiff_sum)(const double* v, std::size_t rows, std::size_t cols,
                             const double* center, double* out);

  // out[c] = sum_r a[r,c] * b[r,c]
  void (*colwise_dot)(const double* a, const double* b, std::size_t rows, std::size_t cols,
                      double* out);

  // out[r,c] = v[r,c] * scale[c]
  void (*mul_columns)(const double* v, std::size_t rows, std::size_t cols, const double* scale,
                      double* out);

  // out[r,c] = (v[r,c] - center[c]) * scale[c] + shift[c]
  void (*shift_scale_columns)(const double* v, std::size_t rows, std::size_t cols,
                              const double* center, const double* scale, const double* shift,
                              double* out);

  // out[r,c] = v[r,c] * scale[c] + shift[c]
  void (*scale_shift_columns)(const double* v, std::size_t rows, std::size_t cols,
                              const double* scale, const double* shift, double* out);

  // out[r,o] = bias[o] + sum_i x[r,i] * w[i,o]   (w is in_dim x out_dim, row-major)
  void (*matmul_bias)(const double* x, std::size_t rows, std::size_t in_dim, const double* w,
                      const double* bias, std::size_t out_dim, double* out);

  // out[r,c] = inv_sigma[c] * ((g[r,c] - mean_g[c]) - vhat[r,c] * mean_gv[c])
  // Gradient of batch standardization through its mean and variance.
  void (*standardize_input_grad)(const double* g, const double* vhat, std::size_t rows,
                                 std::size_t cols, const double* inv_sigma, const double* mean_g,
                                 const double* mean_gv, double* out);

  // out[r,c] = max(v[r,c], 0)
  void (*relu)(const double* v, std::size_t n, double* out);

  // out[i] = pre[i] > 0 ? g[i] : 0
  void (*relu_grad)(const double* g, const double* pre, std::size_t n, double* out);
};

// Scalar reference implementation (always available).
const Ops& scalar_ops();

// SIMD implementation for this platform, or nullptr if the CPU lacks it.
const Ops* simd_ops();

// Variant selected at startup: the platform SIMD implementation when the CPU
// supports it, else scalar. DELTA_KERNELS=scalar|avx2|neon|auto overrides.
const Ops& active();

// Force a variant by name ("scalar", "avx2", "neon", "auto"); throws
// delta::ConfigError for unknown names or unavailable variants. Test hook and
// backing for the DELTA_KERNELS environment variable.
void force(const std::string& name);

}  // namespace delta::kernels
