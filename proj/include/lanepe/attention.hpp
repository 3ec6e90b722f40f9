#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lanepe/position_encoding.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe {

// Single-head scaled dot-product self-attention over a flattened feature
// map. With a relative table present the scores pick up a key-side term:
//   e_ij = [ (x_i Wq)(x_j Wk)^T + (x_i Wq) . r_ij ] / sqrt(d_head)
struct AttentionParams {
  TensorPtr w_q, w_k, w_v;  // d_in x d_head each
  std::optional<RelativeTable> rel;
  int d_head = 0;
};

// Grid coordinates of the flattened positions. Toroidal mode wraps offsets
// to their signed canonical representative, which makes relative attention
// exactly equivariant under circular shifts (test mode).
struct AttnCoords {
  std::vector<std::pair<int, int>> pos;  // (row, col) per flattened index
  bool toroidal = false;
  int wrap_h = 0, wrap_w = 0;

  static AttnCoords grid(int h, int w);
  static AttnCoords torus(int h, int w);
  int offset_row(int i, int j) const;  // row offset of j relative to i
  int offset_col(int i, int j) const;
};

AttentionParams init_attention(int d_in, int d_head, SeededRng& rng,
                               bool with_rel, int max_rel_dist);

// h x w x d -> (h*w) x d, row-major: flattened index p sits at
// (p / w, p % w). Recorded as a reshape, so the round trip is bit-exact.
TensorPtr flatten_map(ComputeGraph& g, const TensorPtr& x);
TensorPtr unflatten_map(ComputeGraph& g, const TensorPtr& x, int h, int w);

// e (n x n) per the equation above; coords required when rel is present.
TensorPtr attention_scores(ComputeGraph& g, const TensorPtr& x,
                           const AttentionParams& params,
                           const AttnCoords* coords);

// z = softmax_rows(e) . (x Wv)
TensorPtr attention_forward(ComputeGraph& g, const TensorPtr& x,
                            const AttentionParams& params,
                            const AttnCoords* coords);

}  // namespace lanepe
