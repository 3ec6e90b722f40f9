#include "lanepe/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lanepe {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

int wrap_offset(int delta, int extent) {
  int m = ((delta % extent) + extent) % extent;
  if (2 * m > extent) m -= extent;
  return m;
}

}  // namespace

AttnCoords AttnCoords::grid(int h, int w) {
  AttnCoords c;
  c.pos.reserve(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) c.pos.emplace_back(r, col);
  return c;
}

AttnCoords AttnCoords::torus(int h, int w) {
  AttnCoords c = grid(h, w);
  c.toroidal = true;
  c.wrap_h = h;
  c.wrap_w = w;
  return c;
}

int AttnCoords::offset_row(int i, int j) const {
  const int d = pos[static_cast<std::size_t>(i)].first -
                pos[static_cast<std::size_t>(j)].first;
  return toroidal ? wrap_offset(d, wrap_h) : d;
}

int AttnCoords::offset_col(int i, int j) const {
  const int d = pos[static_cast<std::size_t>(i)].second -
                pos[static_cast<std::size_t>(j)].second;
  return toroidal ? wrap_offset(d, wrap_w) : d;
}

AttentionParams init_attention(int d_in, int d_head, SeededRng& rng,
                               bool with_rel, int max_rel_dist) {
  check(d_in > 0 && d_head > 0, "init_attention: dimensions must be positive");
  AttentionParams p;
  p.d_head = d_head;
  const double std = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (TensorPtr* w : {&p.w_q, &p.w_k, &p.w_v}) {
    *w = Tensor::create({d_in, d_head}, /*requires_grad=*/true);
    for (double& v : (*w)->data) v = rng.gaussian(0.0, std);
  }
  if (with_rel) {
    RelativeTable table = zero_relative(max_rel_dist, d_head);
    for (double& v : table.row_emb->data) v = rng.gaussian(0.0, 0.02);
    for (double& v : table.col_emb->data) v = rng.gaussian(0.0, 0.02);
    p.rel = std::move(table);
  }
  return p;
}

TensorPtr flatten_map(ComputeGraph& g, const TensorPtr& x) {
  check(x->shape.size() == 3,
        "flatten_map: expects h x w x d, got " + shape_str(x->shape));
  return g.reshape(x, {x->dim(0) * x->dim(1), x->dim(2)});
}

TensorPtr unflatten_map(ComputeGraph& g, const TensorPtr& x, int h, int w) {
  check(x->shape.size() == 2 && x->dim(0) == h * w,
        "unflatten_map: shape " + shape_str(x->shape) + " is not " +
            std::to_string(h) + "*" + std::to_string(w) + " rows");
  return g.reshape(x, {h, w, x->dim(1)});
}

namespace {

void validate_attention_inputs(const TensorPtr& x,
                               const AttentionParams& params,
                               const AttnCoords* coords) {
  check(x->shape.size() == 2,
        "attention: expects flattened n x d_in input, got " +
            shape_str(x->shape));
  check(params.w_q && params.w_k && params.w_v,
        "attention: projections missing");
  const int d_in = x->dim(1);
  for (const TensorPtr& w : {params.w_q, params.w_k, params.w_v}) {
    check(w->shape.size() == 2 && w->dim(0) == d_in &&
              w->dim(1) == params.d_head,
          "attention: projection shape " + shape_str(w->shape) +
              " does not map d_in=" + std::to_string(d_in) +
              " to d_head=" + std::to_string(params.d_head));
  }
  if (params.rel) {
    check(coords != nullptr,
          "attention: relative table present but no coordinates given");
    check(static_cast<int>(coords->pos.size()) == x->dim(0),
          "attention: " + std::to_string(coords->pos.size()) +
              " coordinates for " + std::to_string(x->dim(0)) + " positions");
    check(params.rel->row_emb->dim(1) == params.d_head,
          "attention: relative embedding width must equal d_head");
  }
}

}  // namespace

TensorPtr attention_scores(ComputeGraph& g, const TensorPtr& x,
                           const AttentionParams& params,
                           const AttnCoords* coords) {
  validate_attention_inputs(x, params, coords);
  const int n = x->dim(0);
  const TensorPtr q = g.matmul(x, params.w_q);
  const TensorPtr k = g.matmul(x, params.w_k);
  TensorPtr e = g.matmul_nt(q, k);
  if (params.rel) {
    const int nn = n;
    auto row_idx = std::make_shared<IndexTable>();
    auto col_idx = std::make_shared<IndexTable>();
    row_idx->reserve(static_cast<std::size_t>(nn) * nn);
    col_idx->reserve(static_cast<std::size_t>(nn) * nn);
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) {
        row_idx->push_back(params.rel->clip_index(coords->offset_row(i, j)));
        col_idx->push_back(params.rel->clip_index(coords->offset_col(i, j)));
      }
    const TensorPtr rel = g.relative_scores(q, params.rel->row_emb,
                                            params.rel->col_emb, row_idx,
                                            col_idx);
    e = g.add(e, rel);
  }
  return g.scale(e, 1.0 / std::sqrt(static_cast<double>(params.d_head)));
}

TensorPtr attention_forward(ComputeGraph& g, const TensorPtr& x,
                            const AttentionParams& params,
                            const AttnCoords* coords) {
  const TensorPtr e = attention_scores(g, x, params, coords);
  const TensorPtr alpha = g.softmax_rows(e);
  const TensorPtr v = g.matmul(x, params.w_v);
  return g.matmul(alpha, v);
}

}  // namespace lanepe
