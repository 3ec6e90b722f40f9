#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lanepe/lane_eval.hpp"
#include "lanepe/lane_net.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe {

// Desk-scale lane scenes with the highway priors: near-parallel lanes
// starting at the bottom edge and converging toward a vanishing point.
struct SceneSpec {
  int h = 32;
  int w = 64;
  int num_lanes = 3;  // 2..4
  int vp_row = 6;     // vanishing point, strictly above h/2
  int vp_col = 32;
  double curvature = 0.0;  // max lateral bow in px; 0 = straight
  double noise = 0.0;      // per-segment occlusion probability
  // All lanes share one brightness, so only absolute position can tell the
  // k-th lane from the others.
  bool position_ambiguity = false;
  std::uint64_t seed = 0;

  void validate() const;  // rejects specs whose lanes would overlap
};

// Analytic centerline: x(t) = x0 + (vp_col - x0) t + 4 c t (1 - t) with
// t = 0 at the bottom row and t = 1 at the vanishing point, so the extended
// curve passes through the vanishing point exactly.
struct LaneGeometry {
  double x0 = 0;
  double vp_r = 0, vp_c = 0;
  double curvature = 0;
  int bottom_row = 0;
  int top_row = 0;  // uppermost rendered row

  double x_at(double row) const;
};

struct Scene {
  TensorPtr image;        // h x w x 3 in [0, 1]
  std::vector<int> mask;  // h*w class ids, 0 background, k = k-th lane
  LaneLabel label;
  std::vector<LaneGeometry> geometry;
};

std::vector<int> default_h_samples(int h);

// Deterministic under spec.seed; occlusion removes image pixels but keeps
// mask and label points.
std::vector<Scene> generate(const SceneSpec& spec, int count);

// On-disk layout: scene_%04d.pgm + scene_%04d_mask.pgm + labels.jsonl
// (raw_file points at the image).
void write_scenes(const std::string& dir, const std::vector<Scene>& scenes);

struct LoadedDataset {
  std::vector<Sample> samples;
  std::vector<LaneLabel> labels;  // aligned with samples
  int h = 0, w = 0;
};

LoadedDataset load_dataset(const std::string& dir);

// key = value lines; '#' comments. Unknown keys are rejected.
SceneSpec parse_scene_spec_file(const std::string& path);

}  // namespace lanepe
