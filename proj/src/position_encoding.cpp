#include "lanepe/position_encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lanepe {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void EncodingSpec::validate() const {
  check(height > 0 && width > 0, "EncodingSpec: extent must be positive");
  check(d_model > 0 && d_model % 2 == 0,
        "EncodingSpec: d_model must be a positive even integer, got " +
            std::to_string(d_model));
  if (kind == EncodingKind::sinusoidal)
    check(d_model % 4 == 0,
          "EncodingSpec: sinusoidal 2d needs d_model divisible by 4, got " +
              std::to_string(d_model));
  if (kind == EncodingKind::relative)
    check(max_rel_dist >= 1, "EncodingSpec: max_rel_dist must be >= 1");
}

int RelativeTable::clip_index(int delta) const {
  return std::clamp(delta, -max_rel_dist, max_rel_dist) + max_rel_dist;
}

TensorPtr sinusoidal_1d(int length, int d) {
  check(length > 0, "sinusoidal_1d: length must be positive");
  check(d > 0 && d % 2 == 0,
        "sinusoidal_1d: channel count must be even, got " + std::to_string(d));
  auto out = Tensor::create({length, d});
  for (int pos = 0; pos < length; ++pos) {
    double* row = out->data.data() + static_cast<std::size_t>(pos) * d;
    for (int i = 0; 2 * i < d; ++i) {
      const double angle =
          pos / std::pow(10000.0, (2.0 * i) / static_cast<double>(d));
      row[2 * i] = std::sin(angle);
      row[2 * i + 1] = std::cos(angle);
    }
  }
  return out;
}

PositionalField sinusoidal_2d(const EncodingSpec& spec) {
  check(spec.kind == EncodingKind::sinusoidal,
        "sinusoidal_2d: spec kind must be sinusoidal");
  spec.validate();
  const int h = spec.height, w = spec.width, d = spec.d_model;
  const int half = d / 2;
  const TensorPtr rows = sinusoidal_1d(h, half);
  const TensorPtr cols = sinusoidal_1d(w, half);
  auto values = Tensor::create({h, w, d});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double* v = values->data.data() +
                  (static_cast<std::size_t>(r) * w + c) * d;
      std::copy_n(rows->data.begin() + static_cast<std::size_t>(r) * half,
                  half, v);
      std::copy_n(cols->data.begin() + static_cast<std::size_t>(c) * half,
                  half, v + half);
    }
  return PositionalField{values, /*trainable=*/false};
}

TensorPtr apply_absolute(ComputeGraph& g, const TensorPtr& x,
                         const PositionalField& pe) {
  check(pe.values != nullptr, "apply_absolute: empty field");
  check(x->shape == pe.values->shape,
        "apply_absolute: shape mismatch " + shape_str(x->shape) + " vs " +
            shape_str(pe.values->shape));
  return g.add(x, pe.values);
}

PositionalField init_learned(const EncodingSpec& spec, std::uint64_t seed) {
  check(spec.kind == EncodingKind::learned_absolute,
        "init_learned: spec kind must be learned_absolute");
  spec.validate();
  SeededRng rng(seed);
  auto values = Tensor::create({spec.height, spec.width, spec.d_model},
                               /*requires_grad=*/true);
  for (double& v : values->data) v = rng.gaussian(0.0, 0.02);
  return PositionalField{values, /*trainable=*/true};
}

RelativeTable init_relative(const EncodingSpec& spec, SeededRng& rng) {
  check(spec.kind == EncodingKind::relative,
        "init_relative: spec kind must be relative");
  spec.validate();
  const int rows = 2 * spec.max_rel_dist + 1;
  RelativeTable t;
  t.max_rel_dist = spec.max_rel_dist;
  t.row_emb = Tensor::create({rows, spec.d_model}, /*requires_grad=*/true);
  t.col_emb = Tensor::create({rows, spec.d_model}, /*requires_grad=*/true);
  for (double& v : t.row_emb->data) v = rng.gaussian(0.0, 0.02);
  for (double& v : t.col_emb->data) v = rng.gaussian(0.0, 0.02);
  return t;
}

RelativeTable zero_relative(int max_rel_dist, int d_head) {
  check(max_rel_dist >= 1, "zero_relative: max_rel_dist must be >= 1");
  RelativeTable t;
  t.max_rel_dist = max_rel_dist;
  t.row_emb =
      Tensor::create({2 * max_rel_dist + 1, d_head}, /*requires_grad=*/true);
  t.col_emb =
      Tensor::create({2 * max_rel_dist + 1, d_head}, /*requires_grad=*/true);
  return t;
}

std::vector<double> relative_lookup(const RelativeTable& table, int d_row,
                                    int d_col) {
  const int d = table.row_emb->dim(1);
  const std::size_t r = static_cast<std::size_t>(table.clip_index(d_row));
  const std::size_t c = static_cast<std::size_t>(table.clip_index(d_col));
  std::vector<double> out(static_cast<std::size_t>(d));
  const double* re = table.row_emb->data.data() + r * d;
  const double* ce = table.col_emb->data.data() + c * d;
  for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(t)] = re[t] + ce[t];
  return out;
}

}  // namespace lanepe
