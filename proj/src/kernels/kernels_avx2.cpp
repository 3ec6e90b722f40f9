#include "lanepe/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

// AVX2 variants, 4 f64 lanes. Mul + add only (no FMA): the scalar TU is
// compiled with -ffp-contract=off, so separate rounding keeps both paths
// bit-identical. Matmuls broadcast the A element and stream rows of B/C,
// which preserves the scalar ascending-k accumulation order per element.

namespace lanepe::kernels {
namespace {

void v_add(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void v_sub(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}

void v_mul(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void v_scale(double* dst, const double* a, double alpha, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) dst[i] = alpha * a[i];
}

void v_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    d = _mm256_add_pd(d, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += alpha * x[i];
}

void v_relu(double* dst, const double* a, std::size_t n) {
  // max_pd(x, 0) returns the second operand for NaN and for -0.0 vs +0.0,
  // matching the scalar (a > 0 ? a : 0) exactly.
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  for (; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void v_relu_backward_acc(double* dst, const double* up, const double* pre,
                         std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    const __m256d gated = _mm256_and_pd(_mm256_loadu_pd(up + i), mask);
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), gated));
  }
  for (; i < n; ++i) dst[i] += pre[i] > 0.0 ? up[i] : 0.0;
}

inline void row_axpy(double* crow, double av, const double* brow,
                     std::size_t n) {
  const __m256d va = _mm256_set1_pd(av);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d cv = _mm256_loadu_pd(crow + j);
    cv = _mm256_add_pd(cv, _mm256_mul_pd(va, _mm256_loadu_pd(brow + j)));
    _mm256_storeu_pd(crow + j, cv);
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

const Ops& avx2_ops() {
  static const Ops table{v_add,  v_sub,  v_mul,
                         v_scale, v_axpy, v_relu,
                         v_relu_backward_acc, v_matmul_nn, v_matmul_tn};
  return table;
}

}  // namespace lanepe::kernels
