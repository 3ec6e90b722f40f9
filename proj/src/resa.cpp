#include "lanepe/resa.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lanepe {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool is_vertical(Direction dir) {
  return dir == Direction::up || dir == Direction::down;
}

// axis the slices move along: rows for up/down, columns for left/right
int shift_axis(Direction dir) { return is_vertical(dir) ? 0 : 1; }

// the direction names where the source slice sits: a down shift replaces
// row i with row i+stride (the slice below), an up shift with row i-stride
int signed_delta(Direction dir, int stride) {
  switch (dir) {
    case Direction::up: return -stride;
    case Direction::down: return stride;
    case Direction::left: return -stride;
    case Direction::right: return stride;
  }
  return 0;
}

int clip_odd(int k, int extent) {
  if (k > extent) k = extent % 2 == 0 ? extent - 1 : extent;
  return k;
}

constexpr Direction kOrder[4] = {Direction::up, Direction::down,
                                 Direction::left, Direction::right};

}  // namespace

void ResaConfig::validate(int h, int w) const {
  check(iterations >= 1, "ResaConfig: iterations must be positive");
  check(conv_kernel_width >= 1 && conv_kernel_width % 2 == 1,
        "ResaConfig: conv_kernel_width must be odd and positive");
  const int max_extent = std::max(h, w);
  check((1 << (iterations - 1)) < max_extent,
        "ResaConfig: 2^(K-1) = " + std::to_string(1 << (iterations - 1)) +
            " must stay below max(h, w) = " + std::to_string(max_extent));
}

int ResaConfig::effective_kernel(Direction dir, int h, int w) const {
  // the conv runs along the slice, i.e. across the axis the shift does not move
  const int lateral = is_vertical(dir) ? w : h;
  return clip_odd(conv_kernel_width, lateral);
}

const TensorPtr& ResaWeights::at(int iteration, Direction dir) const {
  const std::size_t d = static_cast<std::size_t>(dir);
  return shared ? conv[d] : conv[static_cast<std::size_t>(iteration) * 4 + d];
}

namespace {

ResaWeights make_weights(const ResaConfig& cfg, int h, int w, int d,
                         SeededRng* rng) {
  cfg.validate(h, w);
  check(d > 0, "resa weights: channel count must be positive");
  ResaWeights ws;
  ws.shared = cfg.share_weights_per_direction;
  ws.iterations = cfg.iterations;
  const int copies = ws.shared ? 1 : cfg.iterations;
  for (int it = 0; it < copies; ++it)
    for (Direction dir : kOrder) {
      const int k = cfg.effective_kernel(dir, h, w);
      auto t = Tensor::create({k * d, d}, /*requires_grad=*/true);
      if (rng) {
        // 4K residual passes compound; the 0.1 keeps the initial forward
        // near the identity so activations stay at the encoder's scale
        const double std = 0.1 * std::sqrt(1.0 / (k * d));
        for (double& v : t->data) v = rng->gaussian(0.0, std);
      }
      ws.conv.push_back(std::move(t));
    }
  return ws;
}

}  // namespace

ResaWeights init_resa(const ResaConfig& cfg, int h, int w, int d,
                      SeededRng& rng) {
  return make_weights(cfg, h, w, d, &rng);
}

ResaWeights zero_resa(const ResaConfig& cfg, int h, int w, int d) {
  return make_weights(cfg, h, w, d, nullptr);
}

TensorPtr shift_slices(ComputeGraph& g, const TensorPtr& x, Direction dir,
                       int stride) {
  check(x->shape.size() == 3,
        "shift_slices: expects h x w x d, got " + shape_str(x->shape));
  const int h = x->dim(0), w = x->dim(1), d = x->dim(2);
  const int axis = shift_axis(dir);
  const int extent = axis == 0 ? h : w;
  check(stride >= 1 && stride <= extent,
        "shift_slices: stride " + std::to_string(stride) +
            " outside [1, " + std::to_string(extent) + "]");
  return g.gather(x, shift_table(h, w, d, axis, signed_delta(dir, stride)),
                  x->shape);
}

TensorPtr resa_forward(ComputeGraph& g, const TensorPtr& x,
                       const ResaConfig& cfg, const ResaWeights& weights) {
  check(x->shape.size() == 3,
        "resa_forward: expects h x w x d, got " + shape_str(x->shape));
  const int h = x->dim(0), w = x->dim(1), d = x->dim(2);
  cfg.validate(h, w);
  const std::size_t expected =
      (cfg.share_weights_per_direction ? 4u
                                       : 4u * static_cast<std::size_t>(cfg.iterations));
  check(weights.conv.size() == expected &&
            weights.shared == cfg.share_weights_per_direction,
        "resa_forward: weights do not match the config");

  TensorPtr cur = x;
  for (int k = 0; k < cfg.iterations; ++k) {
    const int stride = 1 << k;
    for (Direction dir : kOrder) {
      const int axis = shift_axis(dir);
      const int extent = axis == 0 ? h : w;
      // full cycles are the identity; reduce so strides beyond the extent
      // stay well defined on non-square maps
      const int eff = stride % extent;
      TensorPtr shifted = eff == 0 ? cur : shift_slices(g, cur, dir, eff);
      const int kw = cfg.effective_kernel(dir, h, w);
      const TensorPtr& wmat = weights.at(k, dir);
      check(wmat->dim(0) == kw * d && wmat->dim(1) == d,
            "resa_forward: conv weight shape " + shape_str(wmat->shape) +
                " does not match kernel " + std::to_string(kw) + " x " +
                std::to_string(d));
      // conv runs along the slice: lateral axis is the other one
      const int conv_axis = axis == 0 ? 1 : 0;
      const TensorPtr shifted_cols =
          g.gather(shifted, im2col_axis_cyclic(h, w, d, kw, conv_axis),
                   {h * w, kw * d});
      const TensorPtr mixed = g.matmul(shifted_cols, wmat);
      const TensorPtr activated = g.relu(mixed);
      cur = g.add(cur, g.reshape(activated, {h, w, d}));
    }
  }
  return cur;
}

}  // namespace lanepe
