#include "lanepe/kernels.hpp"

#include <algorithm>

// Reference kernels. The SIMD variants must match these bit-for-bit, which
// pins down two conventions: relu_backward_acc always performs the add (so
// -0.0 + 0.0 normalization is identical on both paths), and matmuls
// accumulate over the contraction index in ascending order per element.

namespace lanepe::kernels {
namespace {

void s_add(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void s_sub(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void s_mul(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void s_scale(double* dst, const double* a, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = alpha * a[i];
}

void s_axpy(double* dst, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * x[i];
}

void s_relu(double* dst, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void s_relu_backward_acc(double* dst, const double* up, const double* pre,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += pre[i] > 0.0 ? up[i] : 0.0;
}

void s_matmul_nn(double* c, const double* a, const double* b, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[i * k + l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_matmul_tn(double* c, const double* a, const double* b, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a[l * k + i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{s_add,  s_sub,  s_mul,
                         s_scale, s_axpy, s_relu,
                         s_relu_backward_acc, s_matmul_nn, s_matmul_tn};
  return table;
}

}  // namespace lanepe::kernels
