#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstring>
#include <vector>

#include "lanepe/kernels.hpp"
#include "lanepe/rng.hpp"

using namespace lanepe;
using kernels::Backend;

namespace {

std::vector<double> random_vec(SeededRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar kernels: basic correctness") {
  const auto& K = kernels::ops_for(Backend::scalar);
  std::vector<double> a{1.0, -2.0, 3.0}, b{0.5, 4.0, -1.0}, out(3);
  K.add(out.data(), a.data(), b.data(), 3);
  CHECK(out == std::vector<double>{1.5, 2.0, 2.0});
  K.mul(out.data(), a.data(), b.data(), 3);
  CHECK(out == std::vector<double>{0.5, -8.0, -3.0});
  K.relu(out.data(), a.data(), 3);
  CHECK(out == std::vector<double>{1.0, 0.0, 3.0});
  K.scale(out.data(), a.data(), -2.0, 3);
  CHECK(out == std::vector<double>{-2.0, 4.0, -6.0});

  // 2x3 . 3x2 by hand
  std::vector<double> m1{1, 2, 3, 4, 5, 6}, m2{7, 8, 9, 10, 11, 12}, c(4);
  K.matmul_nn(c.data(), m1.data(), m2.data(), 2, 3, 2, false);
  CHECK(c == std::vector<double>{58, 64, 139, 154});
  // A^T . B with A = m1 read as 3x2
  std::vector<double> ct(4);
  K.matmul_tn(ct.data(), m1.data(), m2.data(), 3, 2, 2, false);
  CHECK(ct == std::vector<double>{89, 98, 116, 128});
}

TEST_CASE("relu subgradient at zero is zero") {
  const auto& K = kernels::ops_for(Backend::scalar);
  std::vector<double> pre{-1.0, 0.0, 2.0}, up{5.0, 5.0, 5.0}, dst(3, 0.0);
  K.relu_backward_acc(dst.data(), up.data(), pre.data(), 3);
  CHECK(dst == std::vector<double>{0.0, 0.0, 5.0});
}

TEST_CASE("SIMD backends match scalar bit-for-bit") {
  std::vector<Backend> simd;
  for (Backend b : {Backend::avx2, Backend::neon})
    if (kernels::supported(b)) simd.push_back(b);
  if (simd.empty()) {
    MESSAGE("no SIMD backend on this CPU; scalar only");
    return;
  }

  SeededRng rng(7);
  const auto& S = kernels::ops_for(Backend::scalar);
  for (Backend b : simd) {
    CAPTURE(kernels::name(b));
    const auto& V = kernels::ops_for(b);
    // sizes straddling the vector width, including tails
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 64u, 129u}) {
      const auto a = random_vec(rng, n);
      const auto c = random_vec(rng, n);
      std::vector<double> r1(n), r2(n);

      S.add(r1.data(), a.data(), c.data(), n);
      V.add(r2.data(), a.data(), c.data(), n);
      CHECK(bit_equal(r1, r2));

      S.sub(r1.data(), a.data(), c.data(), n);
      V.sub(r2.data(), a.data(), c.data(), n);
      CHECK(bit_equal(r1, r2));

      S.mul(r1.data(), a.data(), c.data(), n);
      V.mul(r2.data(), a.data(), c.data(), n);
      CHECK(bit_equal(r1, r2));

      S.scale(r1.data(), a.data(), 1.7, n);
      V.scale(r2.data(), a.data(), 1.7, n);
      CHECK(bit_equal(r1, r2));

      r1 = c;
      r2 = c;
      S.axpy(r1.data(), -0.3, a.data(), n);
      V.axpy(r2.data(), -0.3, a.data(), n);
      CHECK(bit_equal(r1, r2));

      S.relu(r1.data(), a.data(), n);
      V.relu(r2.data(), a.data(), n);
      CHECK(bit_equal(r1, r2));

      r1.assign(n, 0.25);
      r2.assign(n, 0.25);
      S.relu_backward_acc(r1.data(), c.data(), a.data(), n);
      V.relu_backward_acc(r2.data(), c.data(), a.data(), n);
      CHECK(bit_equal(r1, r2));
    }

    // matmuls: odd sizes so the column loop has a tail
    for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
             {1, 1, 1}, {2, 3, 5}, {4, 4, 4}, {7, 5, 9}, {8, 16, 6}, {5, 9, 13}}) {
      const auto a = random_vec(rng, m * k);
      const auto bmat = random_vec(rng, k * n);
      std::vector<double> r1(m * n), r2(m * n);
      S.matmul_nn(r1.data(), a.data(), bmat.data(), m, k, n, false);
      V.matmul_nn(r2.data(), a.data(), bmat.data(), m, k, n, false);
      CHECK(bit_equal(r1, r2));

      // accumulate path
      auto acc1 = random_vec(rng, m * n);
      auto acc2 = acc1;
      S.matmul_nn(acc1.data(), a.data(), bmat.data(), m, k, n, true);
      V.matmul_nn(acc2.data(), a.data(), bmat.data(), m, k, n, true);
      CHECK(bit_equal(acc1, acc2));

      const auto at = random_vec(rng, m * k);
      const auto bt = random_vec(rng, m * n);
      std::vector<double> t1(k * n), t2(k * n);
      S.matmul_tn(t1.data(), at.data(), bt.data(), m, k, n, false);
      V.matmul_tn(t2.data(), at.data(), bt.data(), m, k, n, false);
      CHECK(bit_equal(t1, t2));
    }
  }
}

TEST_CASE("backend selection") {
  CHECK(kernels::supported(Backend::scalar));
  CHECK(kernels::parse_backend("scalar") == Backend::scalar);
  CHECK(kernels::parse_backend("avx2") == Backend::avx2);
  CHECK_THROWS_AS(kernels::parse_backend("sse9"), std::invalid_argument);

  const Backend before = kernels::active();
  kernels::force(Backend::scalar);
  CHECK(kernels::active() == Backend::scalar);
  kernels::force(before);
  CHECK(kernels::active() == before);
}
