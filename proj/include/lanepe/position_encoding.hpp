#pragma once

#include <cstdint>
#include <vector>

#include "lanepe/rng.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe {

enum class EncodingKind { sinusoidal, learned_absolute, relative };

struct EncodingSpec {
  EncodingKind kind = EncodingKind::sinusoidal;
  int d_model = 16;  // even; divisible by 4 for the sinusoidal 2d lift
  int height = 8;
  int width = 8;
  int max_rel_dist = 7;  // relative kind only; clipping radius >= 1

  void validate() const;
};

// Per-position vectors added onto a feature map. Sinusoidal fields are fixed
// (values in [-1, 1], not trainable); learned fields train with the network.
struct PositionalField {
  TensorPtr values;  // height x width x d_model
  bool trainable = false;
};

// Factorized relative offsets: a lookup for an offset pair (dr, dc) is
// row_emb[clip(dr)] + col_emb[clip(dc)], keeping memory linear in the
// clipping radius instead of quadratic in the map size.
struct RelativeTable {
  TensorPtr row_emb;  // (2*max_rel_dist + 1) x d_head
  TensorPtr col_emb;
  int max_rel_dist = 0;

  // clip(delta, -R, R) + R, always a valid row of the tables
  int clip_index(int delta) const;
};

// sin/cos pairs over one coordinate:
//   out(pos, 2i)   = sin(pos / 10000^(2i/d))
//   out(pos, 2i+1) = cos(pos / 10000^(2i/d))
TensorPtr sinusoidal_1d(int length, int d);

// First d_model/2 channels encode the row coordinate, last half the column
// coordinate; each half is constant along the other axis.
PositionalField sinusoidal_2d(const EncodingSpec& spec);

// x + pe, recorded on the graph; gradient reaches pe only when trainable.
TensorPtr apply_absolute(ComputeGraph& g, const TensorPtr& x,
                         const PositionalField& pe);

// Trainable field, entries i.i.d. Normal(0, 0.02^2) from the seeded stream.
PositionalField init_learned(const EncodingSpec& spec, std::uint64_t seed);

RelativeTable init_relative(const EncodingSpec& spec, SeededRng& rng);
RelativeTable zero_relative(int max_rel_dist, int d_head);

// row_emb[clip(d_row)] + col_emb[clip(d_col)], as plain values
std::vector<double> relative_lookup(const RelativeTable& table, int d_row,
                                    int d_col);

}  // namespace lanepe
