#pragma once

#include <cstddef>
#include <string>

// f64 compute kernels behind the tensor ops. Every kernel has a scalar
// reference implementation; AVX2 (x86-64) and NEON (aarch64) variants are
// selected at runtime and can be overridden with force() or the
// LANEPE_KERNELS environment variable. SIMD variants keep the scalar
// per-element accumulation order, so all backends produce bit-identical
// results (equivalence-tested in tests/kernels_test.cpp).

namespace lanepe::kernels {

enum class Backend { scalar, avx2, neon };

struct Ops {
  // dst = a op b, elementwise
  void (*add)(double* dst, const double* a, const double* b, std::size_t n);
  void (*sub)(double* dst, const double* a, const double* b, std::size_t n);
  void (*mul)(double* dst, const double* a, const double* b, std::size_t n);
  // dst = alpha * a
  void (*scale)(double* dst, const double* a, double alpha, std::size_t n);
  // dst += alpha * x
  void (*axpy)(double* dst, double alpha, const double* x, std::size_t n);
  // dst = max(a, 0)
  void (*relu)(double* dst, const double* a, std::size_t n);
  // dst += (pre > 0) ? up : 0.0  -- relu backward, subgradient 0 at 0
  void (*relu_backward_acc)(double* dst, const double* up, const double* pre,
                            std::size_t n);
  // C (m x n) = [or +=] A (m x k) . B (k x n).
  // Accumulation into each C element runs over k in ascending order.
  void (*matmul_nn)(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate);
  // C (k x n) = [or +=] A^T . B with A (m x k), B (m x n).
  void (*matmul_tn)(double* c, const double* a, const double* b,
                    std::size_t m, std::size_t k, std::size_t n,
                    bool accumulate);
};

bool supported(Backend b);
Backend best_supported();

// Active backend: best supported unless overridden. Reads LANEPE_KERNELS
// ("scalar", "avx2", "neon") once on first use.
Backend active();
void force(Backend b);  // throws std::invalid_argument if unsupported

const char* name(Backend b);
Backend parse_backend(const std::string& s);

const Ops& ops();                // table for the active backend
const Ops& ops_for(Backend b);   // throws if unsupported

}  // namespace lanepe::kernels
