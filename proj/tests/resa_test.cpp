#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lanepe/resa.hpp"
#include "test_support.hpp"

using namespace lanepe;
using namespace lanepe::testing;

namespace {

// Direct dense computation of one resa pass schedule: explicit cyclic
// shifts, explicit channel-mixing convolution along the slice, no graph.
std::vector<double> naive_resa(const std::vector<double>& input, int h, int w,
                               int d, const ResaConfig& cfg,
                               const ResaWeights& ws) {
  std::vector<double> x = input;
  const auto at = [&](const std::vector<double>& m, int r, int c, int ch) {
    return m[(static_cast<std::size_t>(r) * w + c) * d + ch];
  };
  const Direction order[4] = {Direction::up, Direction::down, Direction::left,
                              Direction::right};
  for (int k = 0; k < cfg.iterations; ++k) {
    const int stride = 1 << k;
    for (int di = 0; di < 4; ++di) {
      const Direction dir = order[di];
      const bool vertical = dir == Direction::up || dir == Direction::down;
      const int extent = vertical ? h : w;
      const int delta =
          (dir == Direction::down || dir == Direction::right) ? stride : -stride;
      // shifted(r, c) = x at the slice `delta` away, cyclically
      std::vector<double> shifted(x.size());
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          for (int ch = 0; ch < d; ++ch) {
            int sr = r, sc = c;
            if (vertical)
              sr = ((r + delta) % extent + extent) % extent;
            else
              sc = ((c + delta) % extent + extent) % extent;
            shifted[(static_cast<std::size_t>(r) * w + c) * d + ch] =
                at(x, sr, sc, ch);
          }
      const int kw = cfg.effective_kernel(dir, h, w);
      const int half = kw / 2;
      const TensorPtr& wm = ws.at(k, dir);
      std::vector<double> next = x;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          for (int co = 0; co < d; ++co) {
            double acc = 0.0;
            for (int o = -half; o <= half; ++o) {
              int sr = r, sc = c;
              if (vertical)  // conv runs along the row slice
                sc = ((c + o) % w + w) % w;
              else
                sr = ((r + o) % h + h) % h;
              for (int ci = 0; ci < d; ++ci)
                acc += at(shifted, sr, sc, ci) *
                       wm->data[static_cast<std::size_t>((o + half) * d + ci) * d + co];
            }
            if (acc > 0.0)
              next[(static_cast<std::size_t>(r) * w + c) * d + co] += acc;
          }
      x = std::move(next);
    }
  }
  return x;
}

}  // namespace

TEST_CASE("shift_slices: definition, inverse pair, full cycle, bounds") {
  SeededRng rng(3);
  ComputeGraph g;
  auto x = Tensor::create({4, 3, 2});
  fill_uniform(x, rng);

  // down stride 1: row i receives old row (i+1) mod 4
  auto down = shift_slices(g, x, Direction::down, 1);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c)
      for (int ch = 0; ch < 2; ++ch)
        CHECK(down->data[(static_cast<std::size_t>(r) * 3 + c) * 2 + ch] ==
              x->data[(static_cast<std::size_t>((r + 1) % 4) * 3 + c) * 2 + ch]);

  // inverse pair is bit-exact
  auto back = shift_slices(g, down, Direction::up, 1);
  CHECK(std::memcmp(back->data.data(), x->data.data(),
                    x->data.size() * sizeof(double)) == 0);

  // stride equal to the extent: a full cycle, the identity
  auto cycle = shift_slices(g, x, Direction::left, 3);
  CHECK(std::memcmp(cycle->data.data(), x->data.data(),
                    x->data.size() * sizeof(double)) == 0);

  CHECK_THROWS_AS(shift_slices(g, x, Direction::up, 5), std::invalid_argument);
  CHECK_THROWS_AS(shift_slices(g, x, Direction::up, 0), std::invalid_argument);
}

TEST_CASE("resa config validation") {
  ResaConfig cfg;
  cfg.iterations = 4;
  CHECK_NOTHROW(cfg.validate(16, 8));
  CHECK_THROWS_AS(cfg.validate(8, 8), std::invalid_argument);  // 2^3 == 8
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(16, 8), std::invalid_argument);
  cfg.iterations = 2;
  cfg.conv_kernel_width = 4;
  CHECK_THROWS_AS(cfg.validate(16, 8), std::invalid_argument);

  ResaConfig clip;
  clip.conv_kernel_width = 9;
  CHECK(clip.effective_kernel(Direction::up, 8, 4) == 3);    // along w=4
  CHECK(clip.effective_kernel(Direction::left, 8, 4) == 7);  // along h=8
  CHECK(clip.effective_kernel(Direction::up, 8, 16) == 9);
}

TEST_CASE("zero weights reduce resa to the identity bit-exactly") {
  SeededRng rng(7);
  ResaConfig cfg;
  cfg.iterations = 3;
  cfg.conv_kernel_width = 5;
  auto x = Tensor::create({8, 6, 3});
  fill_uniform(x, rng);
  const auto ws = zero_resa(cfg, 8, 6, 3);
  ComputeGraph g;
  auto y = resa_forward(g, x, cfg, ws);
  CHECK(y->shape == x->shape);
  CHECK(std::memcmp(y->data.data(), x->data.data(),
                    x->data.size() * sizeof(double)) == 0);
}

TEST_CASE("constant maps stay constant through resa") {
  SeededRng rng(11);
  ResaConfig cfg;
  cfg.iterations = 2;
  cfg.conv_kernel_width = 3;
  auto ws = init_resa(cfg, 4, 4, 2, rng);
  auto x = Tensor::create({4, 4, 2});
  for (int p = 0; p < 16; ++p) {
    x->data[static_cast<std::size_t>(p) * 2] = 0.7;
    x->data[static_cast<std::size_t>(p) * 2 + 1] = -0.3;
  }
  ComputeGraph g;
  auto y = resa_forward(g, x, cfg, ws);
  for (int p = 1; p < 16; ++p)
    for (int ch = 0; ch < 2; ++ch)
      CHECK(y->data[static_cast<std::size_t>(p) * 2 + ch] ==
            doctest::Approx(y->data[static_cast<std::size_t>(ch)]).epsilon(1e-15));
  // and the naive oracle agrees on the whole map
  const auto want = naive_resa(x->data, 4, 4, 2, cfg, ws);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(y->data[i] == doctest::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("resa matches the naive unrolled oracle") {
  SeededRng rng(13);
  // K=1 on a 2x2 map: the four-pass hand-unrolled case
  {
    ResaConfig cfg;
    cfg.iterations = 1;
    cfg.conv_kernel_width = 1;
    auto ws = init_resa(cfg, 2, 2, 2, rng);
    auto x = Tensor::create({2, 2, 2});
    fill_uniform(x, rng);
    ComputeGraph g;
    auto y = resa_forward(g, x, cfg, ws);
    const auto want = naive_resa(x->data, 2, 2, 2, cfg, ws);
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(std::abs(y->data[i] - want[i]) < 1e-12);
  }
  // larger cases, shared and unshared weights
  for (int trial = 0; trial < 10; ++trial) {
    ResaConfig cfg;
    cfg.iterations = 1 + static_cast<int>(rng.uniform_int(0, 2));
    cfg.conv_kernel_width = 1 + 2 * static_cast<int>(rng.uniform_int(0, 2));
    cfg.share_weights_per_direction = trial % 2 == 0;
    const int h = 5, w = 6, d = 3;
    auto ws = init_resa(cfg, h, w, d, rng);
    auto x = Tensor::create({h, w, d});
    fill_uniform(x, rng);
    ComputeGraph g;
    auto y = resa_forward(g, x, cfg, ws);
    const auto want = naive_resa(x->data, h, w, d, cfg, ws);
    REQUIRE(y->data.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(std::abs(y->data[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("resa gradients match finite differences") {
  SeededRng rng(17);
  ResaConfig cfg;
  cfg.iterations = 2;
  cfg.conv_kernel_width = 3;
  const int h = 5, w = 6, d = 2;
  auto ws = init_resa(cfg, h, w, d, rng);
  auto x = Tensor::create({h, w, d}, true);
  fill_uniform(x, rng);

  std::vector<TensorPtr> params = ws.conv;
  params.push_back(x);
  const auto fwd = [&] {
    ComputeGraph g(false);
    auto y = resa_forward(g, x, cfg, ws);
    return g.sum(g.mul(y, y))->data[0];
  };
  const auto bwd = [&] {
    for (const auto& t : params) t->zero_grad();
    ComputeGraph g;
    auto y = resa_forward(g, x, cfg, ws);
    g.backward(g.sum(g.mul(y, y)));
  };
  CHECK(check_gradients(params, fwd, bwd).max_rel_err < 1e-4);
}

TEST_CASE("information reaches every position pair") {
  // positive input and positive weights keep every relu active, so the
  // dependency graph is visible in the gradients
  SeededRng rng(19);
  ResaConfig cfg;
  cfg.iterations = 3;
  cfg.conv_kernel_width = 3;
  const int h = 6, w = 5, d = 1;
  auto ws = zero_resa(cfg, h, w, d);
  for (const auto& t : ws.conv)
    for (double& v : t->data) v = rng.uniform(0.02, 0.05);
  auto x = Tensor::create({h, w, d}, true);
  fill_uniform(x, rng, 0.5, 1.0);

  for (int p = 0; p < h * w; ++p) {
    x->zero_grad();
    ComputeGraph g;
    auto y = resa_forward(g, x, cfg, ws);
    auto flat = g.reshape(y, {h * w, d});
    auto probe = g.slice(flat, 0, p, 1);
    g.backward(g.sum(probe));
    for (int q = 0; q < h * w; ++q) {
      CAPTURE(p);
      CAPTURE(q);
      CHECK(x->grad[static_cast<std::size_t>(q)] != 0.0);
    }
  }
}
