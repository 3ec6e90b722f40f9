#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lanepe {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major f64 tensor. Data is mutated only by its producing op, the
// optimizer step, or explicit test setup; everything else treats tensors as
// immutable, so concurrent read-only use is safe.
class Tensor {
 public:
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // same length as data iff requires_grad
  bool requires_grad = false;
  std::string name;  // parameters are named for checkpoints

  static TensorPtr create(Shape shape, bool requires_grad = false);
  static TensorPtr from_values(Shape shape, std::vector<double> values,
                               bool requires_grad = false);
  static TensorPtr scalar(double v);
  static TensorPtr zeros(Shape shape) { return create(std::move(shape)); }
  static TensorPtr full(Shape shape, double v);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int dim(int axis) const { return shape.at(static_cast<std::size_t>(axis)); }
  void zero_grad();
  bool all_finite() const;

  // flat row-major indexing helpers (tests and small loops)
  double& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
};

// -1 entries read as 0.0 on gather and are skipped on scatter.
using IndexTable = std::vector<std::int64_t>;
using IndexTablePtr = std::shared_ptr<const IndexTable>;

// Define-by-run reverse-mode tape. Ops execute eagerly and, while recording,
// append a node whose closure accumulates input gradients from the output
// gradient. Nodes are appended in execution order, which is a topological
// order by construction; backward() walks them exactly once, in reverse.
// A graph is confined to one thread of control.
class ComputeGraph {
 public:
  explicit ComputeGraph(bool recording = true) : recording_(recording) {}

  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);  // a . b^T
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& a, double alpha);
  TensorPtr relu(const TensorPtr& a);
  TensorPtr softmax_rows(const TensorPtr& a);
  TensorPtr sum(const TensorPtr& a);
  TensorPtr slice(const TensorPtr& a, int axis, int start, int len);
  TensorPtr concat(const std::vector<TensorPtr>& parts, int axis);
  TensorPtr reshape(const TensorPtr& a, Shape shape);
  TensorPtr bilinear_upsample_2x(const TensorPtr& a);  // h x w x c
  TensorPtr gather(const TensorPtr& a, IndexTablePtr idx, Shape out_shape);
  // a (n x c) + v (c), broadcast over rows
  TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& v);
  // mean over rows of -log softmax(logits)[label]; labels in [0, c)
  TensorPtr softmax_cross_entropy(const TensorPtr& logits,
                                  const std::vector<int>& labels);
  // scores[i][j] = dot(q_i, row_emb[row_idx[i*n+j]] + col_emb[col_idx[i*n+j]])
  TensorPtr relative_scores(const TensorPtr& q, const TensorPtr& row_emb,
                            const TensorPtr& col_emb, IndexTablePtr row_idx,
                            IndexTablePtr col_idx);

  // Seeds d(loss)/d(loss) = 1 and accumulates grads for every tensor
  // (reaching leaves) that requires grad. loss must be a scalar this graph
  // produced. A graph can run backward once.
  void backward(const TensorPtr& loss);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }
  const char* op_kind(std::size_t i) const { return nodes_[i].op; }

 private:
  struct Node {
    const char* op;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backward;
  };

  TensorPtr result(const char* op, std::vector<TensorPtr> inputs,
                   TensorPtr out, std::function<void()> bwd);
  bool produced(const TensorPtr& t) const;

  std::vector<Node> nodes_;
  bool recording_;
  bool backward_done_ = false;
};

// ---- index-table builders (cached; keyed by their arguments) ----

// Patch extraction for a kh x kw / stride conv over an h x w x c map with
// zero padding pad on both sides. Output rows are out_h*out_w patches of
// kh*kw*c taps; -1 marks padded taps.
IndexTablePtr im2col_2d(int h, int w, int c, int kh, int kw, int stride,
                        int pad, int* out_h, int* out_w);

// Width-k window along `axis` (0 = rows/height, 1 = cols/width) of an
// h x w x c map with cyclic wrap. Output rows are h*w positions of k*c taps.
IndexTablePtr im2col_axis_cyclic(int h, int w, int c, int k, int axis);

// Cyclic slice shift of an h x w x c map. axis 0 shifts rows, axis 1 shifts
// columns; positive `delta` moves content from index i+delta to index i.
IndexTablePtr shift_table(int h, int w, int c, int axis, int delta);

}  // namespace lanepe
