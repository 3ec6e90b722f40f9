#include "lanepe/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

// NEON variants, 2 f64 lanes. Same ordering contract as the AVX2 file:
// mul + add (no fused ops), per-element accumulation over ascending k.

namespace lanepe::kernels {
namespace {

void v_add(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void v_sub(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}

void v_mul(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void v_scale(double* dst, const double* a, double alpha, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_f64(va, vld1q_f64(a + i)));
  for (; i < n; ++i) dst[i] = alpha * a[i];
}

void v_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t d = vld1q_f64(dst + i);
    d = vaddq_f64(d, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

void v_relu(double* dst, const double* a, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t x = vld1q_f64(a + i);
    const uint64x2_t gt = vcgtq_f64(x, zero);
    vst1q_f64(dst + i, vbslq_f64(gt, x, zero));
  }
  for (; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void v_relu_backward_acc(double* dst, const double* up, const double* pre,
                         std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t gt = vcgtq_f64(vld1q_f64(pre + i), zero);
    const float64x2_t gated = vbslq_f64(gt, vld1q_f64(up + i), zero);
    vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), gated));
  }
  for (; i < n; ++i) dst[i] += pre[i] > 0.0 ? up[i] : 0.0;
}

inline void row_axpy(double* crow, double av, const double* brow,
                     std::size_t n) {
  const float64x2_t va = vdupq_n_f64(av);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t cv = vld1q_f64(crow + j);
    cv = vaddq_f64(cv, vmulq_f64(va, vld1q_f64(brow + j)));
    vst1q_f64(crow + j, cv);
  }
  for (; j < n; ++j) crow[j] += av * brow[j];
}

void v_matmul_nn(double* c, const double* a, const double* b, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) row_axpy(crow, a[i * k + l], b + l * n, n);
  }
}

void v_matmul_tn(double* c, const double* a, const double* b, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < k; ++i) row_axpy(c + i * n, a[l * k + i], brow, n);
  }
}

}  // namespace

const Ops& neon_ops() {
  static const Ops table{v_add,  v_sub,  v_mul,
                         v_scale, v_axpy, v_relu,
                         v_relu_backward_acc, v_matmul_nn, v_matmul_tn};
  return table;
}

}  // namespace lanepe::kernels

#endif  // __aarch64__
