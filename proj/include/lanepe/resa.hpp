#pragma once

#include <vector>

#include "lanepe/rng.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe {

enum class Direction { up, down, left, right };

// Aggregation schedule: K iterations, stride doubling (2^k at iteration k),
// a fixed direction order (up, down, left, right) with sequential in-place
// updates, and cyclic wrap at the borders.
struct ResaConfig {
  int iterations = 4;
  int conv_kernel_width = 9;  // odd; clipped to the lateral extent
  bool share_weights_per_direction = true;

  void validate(int h, int w) const;
  // kernel width actually used along the lateral axis of `dir` on an
  // h x w map (clipped to the extent, kept odd)
  int effective_kernel(Direction dir, int h, int w) const;
};

// One conv per direction (vertical directions convolve along the row slice,
// horizontal ones along the column slice), shaped (k*d) x d, no bias so the
// zero-weight network reduces to the identity. When weights are not shared
// across iterations the vector holds iterations * 4 tensors, indexed
// [iter*4 + dir]; shared mode holds 4.
struct ResaWeights {
  std::vector<TensorPtr> conv;
  bool shared = true;
  int iterations = 0;

  const TensorPtr& at(int iteration, Direction dir) const;
};

ResaWeights init_resa(const ResaConfig& cfg, int h, int w, int d,
                      SeededRng& rng);
ResaWeights zero_resa(const ResaConfig& cfg, int h, int w, int d);

// Replace each slice with the slice `stride` away in `direction`, wrapping
// cyclically. stride may equal the axis extent (a full cycle, the identity);
// anything outside [1, extent] is rejected.
TensorPtr shift_slices(ComputeGraph& g, const TensorPtr& x, Direction dir,
                       int stride);

// for k = 0..K-1, for dir in (up, down, left, right):
//   x <- x + relu(conv1d(shift(x, dir, 2^k)))
// Later passes see earlier updates. Output shape equals input shape.
TensorPtr resa_forward(ComputeGraph& g, const TensorPtr& x,
                       const ResaConfig& cfg, const ResaWeights& weights);

}  // namespace lanepe
