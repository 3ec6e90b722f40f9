#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lanepe {

// One annotated clip in the Tusimple labeling scheme. Every lane carries one
// x per h_samples row; -2 marks a missing point and is preserved verbatim.
struct LaneLabel {
  std::string raw_file;
  std::vector<int> h_samples;             // strictly increasing rows
  std::vector<std::vector<int>> lanes;    // each aligned with h_samples

  static constexpr int kMissing = -2;
  void validate() const;  // throws std::invalid_argument with diagnostics
};

struct ClipResult {
  std::string raw_file;
  long long correct = 0;  // C_clip
  long long total = 0;    // S_clip
};

// accuracy = sum C_clip / sum S_clip, exact integer sums, one division
struct EvalReport {
  std::vector<ClipResult> per_clip;
  bool empty_warning = false;

  long long total_correct() const;
  long long total_points() const;
  double accuracy() const;  // 1.0 (with empty_warning) when there are no points
  std::string to_json() const;
  std::string summary() const;
};

// JSON-lines parsing; malformed lines are reported with their line number.
std::vector<LaneLabel> parse_labels(std::istream& in);
std::vector<LaneLabel> parse_labels_file(const std::string& path);
std::string label_to_json(const LaneLabel& label);

// Optimal injective lane matching (each GT lane to at most one predicted
// lane and vice versa), maximizing correctly placed points; a GT point
// counts when its matched lane has |x_pred - x_gt| <= threshold_px at that
// row. Exhaustive over assignments; rejects clips with more than 6 lanes a
// side. Returns (C, S).
ClipResult clip_accuracy(const LaneLabel& pred, const LaneLabel& gt,
                         double threshold_px);

EvalReport aggregate(const std::vector<ClipResult>& clips);

}  // namespace lanepe
