#include "lanepe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lanepe/kernels.hpp"

namespace lanepe {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

std::int64_t checked_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    require(d > 0, "tensor dimensions must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

// outer = product of dims before axis, inner = product after
void split_at_axis(const Shape& s, int axis, std::int64_t* outer,
                   std::int64_t* inner) {
  *outer = 1;
  *inner = 1;
  for (int i = 0; i < axis; ++i) *outer *= s[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
    *inner *= s[i];
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << 'x';
    out << s[i];
  }
  out << ')';
  return out.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

TensorPtr Tensor::create(Shape shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  const std::int64_t n = checked_numel(shape);
  t->shape = std::move(shape);
  t->data.assign(static_cast<std::size_t>(n), 0.0);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

TensorPtr Tensor::from_values(Shape shape, std::vector<double> values,
                              bool requires_grad) {
  const std::int64_t n = checked_numel(shape);
  require(static_cast<std::int64_t>(values.size()) == n,
          "value count " + std::to_string(values.size()) +
              " does not match shape " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

TensorPtr Tensor::scalar(double v) { return from_values({1}, {v}); }

TensorPtr Tensor::full(Shape shape, double v) {
  auto t = create(std::move(shape));
  std::fill(t->data.begin(), t->data.end(), v);
  return t;
}

void Tensor::zero_grad() {
  if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// graph plumbing

TensorPtr ComputeGraph::result(const char* op, std::vector<TensorPtr> inputs,
                               TensorPtr out, std::function<void()> bwd) {
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in->requires_grad;
  if (recording_ && needs_grad) {
    out->requires_grad = true;
    out->grad.assign(out->data.size(), 0.0);
    nodes_.push_back(Node{op, std::move(inputs), out, std::move(bwd)});
  }
  return out;
}

bool ComputeGraph::produced(const TensorPtr& t) const {
  for (const auto& n : nodes_)
    if (n.output == t) return true;
  return false;
}

void ComputeGraph::backward(const TensorPtr& loss) {
  require(loss != nullptr, "backward: null loss");
  require(loss->numel() == 1, "backward: loss must be a scalar, got shape " +
                                  shape_str(loss->shape));
  require(!backward_done_, "backward: graph already ran backward");
  require(produced(loss),
          "backward: loss was not produced by this graph (did you record?)");
  backward_done_ = true;
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->output->requires_grad) it->backward();
}

// ---------------------------------------------------------------------------
// ops

TensorPtr ComputeGraph::matmul(const TensorPtr& a, const TensorPtr& b) {
  require(a->shape.size() == 2 && b->shape.size() == 2,
          "matmul: expects 2-d tensors, got " + shape_str(a->shape) + " . " +
              shape_str(b->shape));
  const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
  require(b->dim(0) == k, "matmul: inner dimensions disagree: " +
                              shape_str(a->shape) + " . " +
                              shape_str(b->shape));
  auto out = Tensor::create({m, n});
  kernels::ops().matmul_nn(out->data.data(), a->data.data(), b->data.data(),
                           static_cast<std::size_t>(m),
                           static_cast<std::size_t>(k),
                           static_cast<std::size_t>(n), false);
  return result("matmul", {a, b}, out, [a, b, out, m, k, n] {
    const auto& K = kernels::ops();
    if (a->requires_grad) {
      // dA += dC . B^T; computed as nn against a transposed copy so the
      // accumulation order matches the scalar reference exactly.
      std::vector<double> bt(static_cast<std::size_t>(k) * n);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) bt[static_cast<std::size_t>(j) * k + i] = b->data[static_cast<std::size_t>(i) * n + j];
      K.matmul_nn(a->grad.data(), out->grad.data(), bt.data(),
                  static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                  static_cast<std::size_t>(k), true);
    }
    if (b->requires_grad)
      K.matmul_tn(b->grad.data(), a->data.data(), out->grad.data(),
                  static_cast<std::size_t>(m), static_cast<std::size_t>(k),
                  static_cast<std::size_t>(n), true);
  });
}

TensorPtr ComputeGraph::matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  require(a->shape.size() == 2 && b->shape.size() == 2,
          "matmul_nt: expects 2-d tensors, got " + shape_str(a->shape) +
              " . " + shape_str(b->shape) + "^T");
  const int m = a->dim(0), k = a->dim(1), n = b->dim(0);
  require(b->dim(1) == k, "matmul_nt: inner dimensions disagree: " +
                              shape_str(a->shape) + " . " +
                              shape_str(b->shape) + "^T");
  auto out = Tensor::create({m, n});
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      bt[static_cast<std::size_t>(j) * n + i] = b->data[static_cast<std::size_t>(i) * k + j];
  kernels::ops().matmul_nn(out->data.data(), a->data.data(), bt.data(),
                           static_cast<std::size_t>(m),
                           static_cast<std::size_t>(k),
                           static_cast<std::size_t>(n), false);
  return result("matmul_nt", {a, b}, out, [a, b, out, m, k, n] {
    const auto& K = kernels::ops();
    if (a->requires_grad)
      K.matmul_nn(a->grad.data(), out->grad.data(), b->data.data(),
                  static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                  static_cast<std::size_t>(k), true);
    if (b->requires_grad)
      K.matmul_tn(b->grad.data(), out->grad.data(), a->data.data(),
                  static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                  static_cast<std::size_t>(k), true);
  });
}

TensorPtr ComputeGraph::add(const TensorPtr& a, const TensorPtr& b) {
  require(a->shape == b->shape, "add: shape mismatch " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
  auto out = Tensor::create(a->shape);
  kernels::ops().add(out->data.data(), a->data.data(), b->data.data(),
                     out->data.size());
  return result("add", {a, b}, out, [a, b, out] {
    const auto& K = kernels::ops();
    if (a->requires_grad)
      K.axpy(a->grad.data(), 1.0, out->grad.data(), a->grad.size());
    if (b->requires_grad)
      K.axpy(b->grad.data(), 1.0, out->grad.data(), b->grad.size());
  });
}

TensorPtr ComputeGraph::mul(const TensorPtr& a, const TensorPtr& b) {
  require(a->shape == b->shape, "mul: shape mismatch " + shape_str(a->shape) +
                                    " vs " + shape_str(b->shape));
  auto out = Tensor::create(a->shape);
  kernels::ops().mul(out->data.data(), a->data.data(), b->data.data(),
                     out->data.size());
  return result("mul", {a, b}, out, [a, b, out] {
    const std::size_t n = out->data.size();
    if (a->requires_grad)
      for (std::size_t i = 0; i < n; ++i)
        a->grad[i] += out->grad[i] * b->data[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < n; ++i)
        b->grad[i] += out->grad[i] * a->data[i];
  });
}

TensorPtr ComputeGraph::scale(const TensorPtr& a, double alpha) {
  auto out = Tensor::create(a->shape);
  kernels::ops().scale(out->data.data(), a->data.data(), alpha,
                       out->data.size());
  return result("scale", {a}, out, [a, out, alpha] {
    if (a->requires_grad)
      kernels::ops().axpy(a->grad.data(), alpha, out->grad.data(),
                          a->grad.size());
  });
}

TensorPtr ComputeGraph::relu(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  kernels::ops().relu(out->data.data(), a->data.data(), out->data.size());
  return result("relu", {a}, out, [a, out] {
    if (a->requires_grad)
      kernels::ops().relu_backward_acc(a->grad.data(), out->grad.data(),
                                       a->data.data(), a->grad.size());
  });
}

TensorPtr ComputeGraph::softmax_rows(const TensorPtr& a) {
  require(a->shape.size() == 2,
          "softmax_rows: expects a 2-d tensor, got " + shape_str(a->shape));
  for (double v : a->data)
    require(!std::isnan(v), "softmax_rows: NaN input rejected");
  const int r = a->dim(0), c = a->dim(1);
  auto out = Tensor::create(a->shape);
  for (int i = 0; i < r; ++i) {
    const double* row = a->data.data() + static_cast<std::size_t>(i) * c;
    double* po = out->data.data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      po[j] = std::exp(row[j] - mx);
      denom += po[j];
    }
    for (int j = 0; j < c; ++j) po[j] /= denom;
  }
  return result("softmax_rows", {a}, out, [a, out, r, c] {
    if (!a->requires_grad) return;
    for (int i = 0; i < r; ++i) {
      const double* p = out->data.data() + static_cast<std::size_t>(i) * c;
      const double* go = out->grad.data() + static_cast<std::size_t>(i) * c;
      double* gi = a->grad.data() + static_cast<std::size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += go[j] * p[j];
      for (int j = 0; j < c; ++j) gi[j] += p[j] * (go[j] - dot);
    }
  });
}

TensorPtr ComputeGraph::sum(const TensorPtr& a) {
  double s = 0.0;
  for (double v : a->data) s += v;
  auto out = Tensor::scalar(s);
  return result("sum", {a}, out, [a, out] {
    if (!a->requires_grad) return;
    const double g = out->grad[0];
    for (double& v : a->grad) v += g;
  });
}

TensorPtr ComputeGraph::slice(const TensorPtr& a, int axis, int start,
                              int len) {
  require(axis >= 0 && axis < static_cast<int>(a->shape.size()),
          "slice: axis " + std::to_string(axis) + " out of range for " +
              shape_str(a->shape));
  const int extent = a->dim(axis);
  require(start >= 0 && len > 0 && start + len <= extent,
          "slice: range [" + std::to_string(start) + ", " +
              std::to_string(start + len) + ") exceeds axis extent " +
              std::to_string(extent));
  Shape out_shape = a->shape;
  out_shape[static_cast<std::size_t>(axis)] = len;
  auto out = Tensor::create(out_shape);
  std::int64_t outer, inner;
  split_at_axis(a->shape, axis, &outer, &inner);
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy_n(a->data.begin() + (o * extent + start) * inner, len * inner,
                out->data.begin() + o * len * inner);
  return result("slice", {a}, out, [a, out, axis, start, len, extent] {
    if (!a->requires_grad) return;
    std::int64_t outer, inner;
    split_at_axis(a->shape, axis, &outer, &inner);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = out->grad.data() + o * len * inner;
      double* dst = a->grad.data() + (o * extent + start) * inner;
      for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

TensorPtr ComputeGraph::concat(const std::vector<TensorPtr>& parts, int axis) {
  require(!parts.empty(), "concat: needs at least one tensor");
  const auto& first = parts.front();
  require(axis >= 0 && axis < static_cast<int>(first->shape.size()),
          "concat: axis " + std::to_string(axis) + " out of range for " +
              shape_str(first->shape));
  int total = 0;
  for (const auto& p : parts) {
    require(p->shape.size() == first->shape.size(),
            "concat: rank mismatch " + shape_str(p->shape) + " vs " +
                shape_str(first->shape));
    for (std::size_t d = 0; d < first->shape.size(); ++d)
      require(static_cast<int>(d) == axis || p->shape[d] == first->shape[d],
              "concat: shape mismatch off-axis: " + shape_str(p->shape) +
                  " vs " + shape_str(first->shape));
    total += p->dim(axis);
  }
  Shape out_shape = first->shape;
  out_shape[static_cast<std::size_t>(axis)] = total;
  auto out = Tensor::create(out_shape);
  std::int64_t outer, inner;
  split_at_axis(out_shape, axis, &outer, &inner);
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const int len = p->dim(axis);
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(p->data.begin() + o * len * inner, len * inner,
                  out->data.begin() + (o * total + offset) * inner);
    offset += len;
  }
  return result("concat", parts, out, [parts, out, axis, total] {
    std::int64_t outer, inner;
    split_at_axis(out->shape, axis, &outer, &inner);
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      const int len = p->dim(axis);
      if (p->requires_grad)
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* src = out->grad.data() + (o * total + offset) * inner;
          double* dst = p->grad.data() + o * len * inner;
          for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      offset += len;
    }
  });
}

TensorPtr ComputeGraph::reshape(const TensorPtr& a, Shape shape) {
  const std::int64_t n = checked_numel(shape);
  require(n == a->numel(), "reshape: element count mismatch " +
                               shape_str(a->shape) + " -> " +
                               shape_str(shape));
  auto out = Tensor::from_values(std::move(shape), a->data);
  return result("reshape", {a}, out, [a, out] {
    if (a->requires_grad)
      kernels::ops().axpy(a->grad.data(), 1.0, out->grad.data(),
                          a->grad.size());
  });
}

namespace {

struct LerpAxis {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

// half-pixel sampling for 2x upscale: source v = (y + 0.5)/2 - 0.5, clamped
LerpAxis upsample_axis(int in_extent) {
  LerpAxis ax;
  const int out_extent = in_extent * 2;
  ax.i0.resize(static_cast<std::size_t>(out_extent));
  ax.i1.resize(static_cast<std::size_t>(out_extent));
  ax.frac.resize(static_cast<std::size_t>(out_extent));
  for (int y = 0; y < out_extent; ++y) {
    const double v = (y + 0.5) / 2.0 - 0.5;
    const double fl = std::floor(v);
    int i0 = static_cast<int>(fl);
    double f = v - fl;
    int i1 = i0 + 1;
    i0 = std::clamp(i0, 0, in_extent - 1);
    i1 = std::clamp(i1, 0, in_extent - 1);
    ax.i0[static_cast<std::size_t>(y)] = i0;
    ax.i1[static_cast<std::size_t>(y)] = i1;
    ax.frac[static_cast<std::size_t>(y)] = f;
  }
  return ax;
}

}  // namespace

TensorPtr ComputeGraph::bilinear_upsample_2x(const TensorPtr& a) {
  require(a->shape.size() == 3, "bilinear_upsample_2x: expects h x w x c, got " +
                                    shape_str(a->shape));
  const int h = a->dim(0), w = a->dim(1), c = a->dim(2);
  auto out = Tensor::create({2 * h, 2 * w, c});
  const LerpAxis ay = upsample_axis(h);
  const LerpAxis axx = upsample_axis(w);
  const auto in_at = [&](int r, int col, int ch) {
    return a->data[(static_cast<std::size_t>(r) * w + col) * c + ch];
  };
  for (int y = 0; y < 2 * h; ++y) {
    const int r0 = ay.i0[static_cast<std::size_t>(y)], r1 = ay.i1[static_cast<std::size_t>(y)];
    const double fy = ay.frac[static_cast<std::size_t>(y)];
    for (int x = 0; x < 2 * w; ++x) {
      const int c0 = axx.i0[static_cast<std::size_t>(x)], c1 = axx.i1[static_cast<std::size_t>(x)];
      const double fx = axx.frac[static_cast<std::size_t>(x)];
      double* po = out->data.data() +
                   (static_cast<std::size_t>(y) * (2 * w) + x) * c;
      for (int ch = 0; ch < c; ++ch) {
        // lerp form so constant maps reproduce bit-exactly
        const double top = in_at(r0, c0, ch) + fx * (in_at(r0, c1, ch) - in_at(r0, c0, ch));
        const double bot = in_at(r1, c0, ch) + fx * (in_at(r1, c1, ch) - in_at(r1, c0, ch));
        po[ch] = top + fy * (bot - top);
      }
    }
  }
  return result("bilinear_upsample_2x", {a}, out, [a, out, h, w, c] {
    if (!a->requires_grad) return;
    const LerpAxis ay = upsample_axis(h);
    const LerpAxis axx = upsample_axis(w);
    for (int y = 0; y < 2 * h; ++y) {
      const int r0 = ay.i0[static_cast<std::size_t>(y)], r1 = ay.i1[static_cast<std::size_t>(y)];
      const double fy = ay.frac[static_cast<std::size_t>(y)];
      for (int x = 0; x < 2 * w; ++x) {
        const int c0 = axx.i0[static_cast<std::size_t>(x)], c1 = axx.i1[static_cast<std::size_t>(x)];
        const double fx = axx.frac[static_cast<std::size_t>(x)];
        const double* go = out->grad.data() +
                           (static_cast<std::size_t>(y) * (2 * w) + x) * c;
        for (int ch = 0; ch < c; ++ch) {
          const double g = go[ch];
          a->grad[(static_cast<std::size_t>(r0) * w + c0) * c + ch] += g * (1 - fy) * (1 - fx);
          a->grad[(static_cast<std::size_t>(r0) * w + c1) * c + ch] += g * (1 - fy) * fx;
          a->grad[(static_cast<std::size_t>(r1) * w + c0) * c + ch] += g * fy * (1 - fx);
          a->grad[(static_cast<std::size_t>(r1) * w + c1) * c + ch] += g * fy * fx;
        }
      }
    }
  });
}

TensorPtr ComputeGraph::gather(const TensorPtr& a, IndexTablePtr idx,
                               Shape out_shape) {
  const std::int64_t n = checked_numel(out_shape);
  require(static_cast<std::int64_t>(idx->size()) == n,
          "gather: index table size " + std::to_string(idx->size()) +
              " does not match output shape " + shape_str(out_shape));
  const std::int64_t an = a->numel();
  auto out = Tensor::create(std::move(out_shape));
  const auto& ix = *idx;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t s = ix[static_cast<std::size_t>(i)];
    require(s < an, "gather: index out of range");
    out->data[static_cast<std::size_t>(i)] =
        s >= 0 ? a->data[static_cast<std::size_t>(s)] : 0.0;
  }
  return result("gather", {a}, out, [a, out, idx] {
    if (!a->requires_grad) return;
    const auto& ix = *idx;
    for (std::size_t i = 0; i < ix.size(); ++i)
      if (ix[i] >= 0) a->grad[static_cast<std::size_t>(ix[i])] += out->grad[i];
  });
}

TensorPtr ComputeGraph::add_rowvec(const TensorPtr& a, const TensorPtr& v) {
  require(a->shape.size() == 2 && v->shape.size() == 1 &&
              a->dim(1) == v->dim(0),
          "add_rowvec: shape mismatch " + shape_str(a->shape) + " + " +
              shape_str(v->shape));
  const int r = a->dim(0), c = a->dim(1);
  auto out = Tensor::create(a->shape);
  for (int i = 0; i < r; ++i)
    kernels::ops().add(out->data.data() + static_cast<std::size_t>(i) * c,
                       a->data.data() + static_cast<std::size_t>(i) * c,
                       v->data.data(), static_cast<std::size_t>(c));
  return result("add_rowvec", {a, v}, out, [a, v, out, r, c] {
    if (a->requires_grad)
      kernels::ops().axpy(a->grad.data(), 1.0, out->grad.data(),
                          a->grad.size());
    if (v->requires_grad)
      for (int i = 0; i < r; ++i)
        kernels::ops().axpy(v->grad.data(), 1.0,
                            out->grad.data() + static_cast<std::size_t>(i) * c,
                            static_cast<std::size_t>(c));
  });
}

TensorPtr ComputeGraph::softmax_cross_entropy(const TensorPtr& logits,
                                              const std::vector<int>& labels) {
  require(logits->shape.size() == 2,
          "softmax_cross_entropy: expects n x c logits, got " +
              shape_str(logits->shape));
  const int n = logits->dim(0), c = logits->dim(1);
  require(static_cast<int>(labels.size()) == n,
          "softmax_cross_entropy: " + std::to_string(labels.size()) +
              " labels for " + std::to_string(n) + " rows");
  for (int lbl : labels)
    require(lbl >= 0 && lbl < c, "softmax_cross_entropy: label " +
                                     std::to_string(lbl) +
                                     " out of range [0, " +
                                     std::to_string(c) + ")");
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n) * c);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits->data.data() + static_cast<std::size_t>(i) * c;
    double* p = probs->data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      p[j] = std::exp(row[j] - mx);
      denom += p[j];
    }
    for (int j = 0; j < c; ++j) p[j] /= denom;
    total += std::log(denom) + mx - row[labels[static_cast<std::size_t>(i)]];
  }
  auto out = Tensor::scalar(total / n);
  return result("softmax_cross_entropy", {logits}, out,
                [logits, out, probs, labels, n, c] {
                  if (!logits->requires_grad) return;
                  const double g = out->grad[0] / n;
                  for (int i = 0; i < n; ++i) {
                    const double* p = probs->data() + static_cast<std::size_t>(i) * c;
                    double* gi = logits->grad.data() + static_cast<std::size_t>(i) * c;
                    for (int j = 0; j < c; ++j) gi[j] += g * p[j];
                    gi[labels[static_cast<std::size_t>(i)]] -= g;
                  }
                });
}

TensorPtr ComputeGraph::relative_scores(const TensorPtr& q,
                                        const TensorPtr& row_emb,
                                        const TensorPtr& col_emb,
                                        IndexTablePtr row_idx,
                                        IndexTablePtr col_idx) {
  require(q->shape.size() == 2 && row_emb->shape.size() == 2 &&
              col_emb->shape.size() == 2,
          "relative_scores: expects 2-d tensors");
  const int n = q->dim(0), d = q->dim(1);
  require(row_emb->dim(1) == d && col_emb->dim(1) == d,
          "relative_scores: embedding width mismatch");
  require(static_cast<std::int64_t>(row_idx->size()) ==
                  static_cast<std::int64_t>(n) * n &&
              row_idx->size() == col_idx->size(),
          "relative_scores: index tables must be n x n");
  auto out = Tensor::create({n, n});
  const auto& ri = *row_idx;
  const auto& ci = *col_idx;
  for (int i = 0; i < n; ++i) {
    const double* qi = q->data.data() + static_cast<std::size_t>(i) * d;
    double* so = out->data.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* re = row_emb->data.data() +
                         static_cast<std::size_t>(ri[static_cast<std::size_t>(i) * n + j]) * d;
      const double* ce = col_emb->data.data() +
                         static_cast<std::size_t>(ci[static_cast<std::size_t>(i) * n + j]) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += qi[t] * (re[t] + ce[t]);
      so[j] = s;
    }
  }
  return result(
      "relative_scores", {q, row_emb, col_emb}, out,
      [q, row_emb, col_emb, out, row_idx, col_idx, n, d] {
        const auto& ri = *row_idx;
        const auto& ci = *col_idx;
        for (int i = 0; i < n; ++i) {
          const double* qi = q->data.data() + static_cast<std::size_t>(i) * d;
          const double* go = out->grad.data() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) {
            const double g = go[j];
            if (g == 0.0) continue;
            const std::size_t r = static_cast<std::size_t>(ri[static_cast<std::size_t>(i) * n + j]);
            const std::size_t cc = static_cast<std::size_t>(ci[static_cast<std::size_t>(i) * n + j]);
            if (q->requires_grad) {
              double* gq = q->grad.data() + static_cast<std::size_t>(i) * d;
              const double* re = row_emb->data.data() + r * d;
              const double* ce = col_emb->data.data() + cc * d;
              for (int t = 0; t < d; ++t) gq[t] += g * (re[t] + ce[t]);
            }
            if (row_emb->requires_grad) {
              double* gr = row_emb->grad.data() + r * d;
              for (int t = 0; t < d; ++t) gr[t] += g * qi[t];
            }
            if (col_emb->requires_grad) {
              double* gc = col_emb->grad.data() + cc * d;
              for (int t = 0; t < d; ++t) gc[t] += g * qi[t];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// index-table builders

namespace {

using CacheKey = std::array<std::int64_t, 7>;

IndexTablePtr cached(std::map<CacheKey, IndexTablePtr>& cache,
                     const CacheKey& key,
                     const std::function<IndexTable()>& build) {
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<IndexTable>(build());
  cache.emplace(key, table);
  return table;
}

}  // namespace

IndexTablePtr im2col_2d(int h, int w, int c, int kh, int kw, int stride,
                        int pad, int* out_h, int* out_w) {
  require(h > 0 && w > 0 && c > 0 && kh > 0 && kw > 0 && stride > 0 && pad >= 0,
          "im2col_2d: invalid geometry");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  require(oh > 0 && ow > 0, "im2col_2d: kernel larger than padded input");
  if (out_h) *out_h = oh;
  if (out_w) *out_w = ow;
  static std::map<CacheKey, IndexTablePtr> cache;
  return cached(cache, {h, w, c, kh, kw, stride, pad}, [=] {
    IndexTable t;
    t.reserve(static_cast<std::size_t>(oh) * ow * kh * kw * c);
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const int iy = oy * stride + ky - pad;
            const int ix = ox * stride + kx - pad;
            const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
            for (int ch = 0; ch < c; ++ch)
              t.push_back(inside
                              ? (static_cast<std::int64_t>(iy) * w + ix) * c + ch
                              : -1);
          }
    return t;
  });
}

IndexTablePtr im2col_axis_cyclic(int h, int w, int c, int k, int axis) {
  require(axis == 0 || axis == 1, "im2col_axis_cyclic: axis must be 0 or 1");
  require(k > 0 && k % 2 == 1, "im2col_axis_cyclic: kernel width must be odd");
  const int extent = axis == 0 ? h : w;
  require(k <= extent, "im2col_axis_cyclic: kernel width " +
                           std::to_string(k) + " exceeds axis extent " +
                           std::to_string(extent));
  static std::map<CacheKey, IndexTablePtr> cache;
  return cached(cache, {h, w, c, k, axis, 0, 0}, [=] {
    const int half = k / 2;
    IndexTable t;
    t.reserve(static_cast<std::size_t>(h) * w * k * c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int o = -half; o <= half; ++o) {
          int iy = y, ix = x;
          if (axis == 0)
            iy = ((y + o) % h + h) % h;
          else
            ix = ((x + o) % w + w) % w;
          for (int ch = 0; ch < c; ++ch)
            t.push_back((static_cast<std::int64_t>(iy) * w + ix) * c + ch);
        }
    return t;
  });
}

IndexTablePtr shift_table(int h, int w, int c, int axis, int delta) {
  require(axis == 0 || axis == 1, "shift_table: axis must be 0 or 1");
  const int extent = axis == 0 ? h : w;
  const int d = ((delta % extent) + extent) % extent;
  static std::map<CacheKey, IndexTablePtr> cache;
  return cached(cache, {h, w, c, axis, d, 0, 1}, [=] {
    IndexTable t;
    t.reserve(static_cast<std::size_t>(h) * w * c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int iy = axis == 0 ? (y + d) % h : y;
        const int ix = axis == 1 ? (x + d) % w : x;
        for (int ch = 0; ch < c; ++ch)
          t.push_back((static_cast<std::int64_t>(iy) * w + ix) * c + ch);
      }
    return t;
  });
}

}  // namespace lanepe
