#include "lanepe/lane_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lanepe {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void LaneLabel::validate() const {
  for (std::size_t i = 1; i < h_samples.size(); ++i)
    check(h_samples[i] > h_samples[i - 1],
          "label '" + raw_file + "': h_samples must be strictly increasing");
  for (std::size_t k = 0; k < lanes.size(); ++k) {
    check(lanes[k].size() == h_samples.size(),
          "label '" + raw_file + "': lane " + std::to_string(k) + " has " +
              std::to_string(lanes[k].size()) + " points for " +
              std::to_string(h_samples.size()) + " h_samples");
    for (int x : lanes[k])
      check(x >= 0 || x == kMissing,
            "label '" + raw_file + "': lane " + std::to_string(k) +
                " has invalid x " + std::to_string(x));
  }
}

std::vector<LaneLabel> parse_labels(std::istream& in) {
  std::vector<LaneLabel> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("labels line " + std::to_string(line_no) +
                                  ": bad JSON: " + e.what());
    }
    LaneLabel label;
    try {
      check(j.contains("lanes") && j.contains("h_samples"),
            "missing 'lanes' or 'h_samples'");
      label.raw_file = j.value("raw_file", "");
      for (const auto& v : j.at("h_samples")) {
        check(v.is_number_integer(), "h_samples must be integers");
        label.h_samples.push_back(v.get<int>());
      }
      for (const auto& lane : j.at("lanes")) {
        std::vector<int> xs;
        for (const auto& v : lane) {
          check(v.is_number_integer(), "lane coordinates must be integers");
          xs.push_back(v.get<int>());
        }
        label.lanes.push_back(std::move(xs));
      }
      label.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument("labels line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
    out.push_back(std::move(label));
  }
  return out;
}

std::vector<LaneLabel> parse_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open label file: " + path);
  return parse_labels(in);
}

std::string label_to_json(const LaneLabel& label) {
  nlohmann::json j;
  j["raw_file"] = label.raw_file;
  j["h_samples"] = label.h_samples;
  j["lanes"] = label.lanes;
  return j.dump();
}

namespace {

// correct points if gt lane g is served by pred lane p
long long pair_score(const std::vector<int>& pred, const std::vector<int>& gt,
                     double threshold_px) {
  long long c = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == LaneLabel::kMissing) continue;
    if (pred[i] == LaneLabel::kMissing) continue;
    if (std::abs(static_cast<double>(pred[i]) - gt[i]) <= threshold_px) ++c;
  }
  return c;
}

}  // namespace

ClipResult clip_accuracy(const LaneLabel& pred, const LaneLabel& gt,
                         double threshold_px) {
  check(threshold_px >= 0, "clip_accuracy: threshold must be non-negative");
  check(pred.h_samples == gt.h_samples,
        "clip_accuracy: prediction and ground truth h_samples differ");
  pred.validate();
  gt.validate();
  const int ng = static_cast<int>(gt.lanes.size());
  const int np = static_cast<int>(pred.lanes.size());
  check(ng <= 6 && np <= 6,
        "clip_accuracy: exhaustive matching supports at most 6 lanes, got " +
            std::to_string(ng) + " gt / " + std::to_string(np) + " pred");

  ClipResult r;
  r.raw_file = gt.raw_file;
  for (const auto& lane : gt.lanes)
    for (int x : lane)
      if (x != LaneLabel::kMissing) ++r.total;

  // scores[g][p], then max-weight injective matching by DP over the used
  // pred-lane bitmask
  std::vector<std::vector<long long>> scores(
      static_cast<std::size_t>(ng),
      std::vector<long long>(static_cast<std::size_t>(np), 0));
  for (int gi = 0; gi < ng; ++gi)
    for (int pi = 0; pi < np; ++pi)
      scores[static_cast<std::size_t>(gi)][static_cast<std::size_t>(pi)] =
          pair_score(pred.lanes[static_cast<std::size_t>(pi)],
                     gt.lanes[static_cast<std::size_t>(gi)], threshold_px);

  const int masks = 1 << np;
  std::vector<long long> best(static_cast<std::size_t>(masks),
                              std::numeric_limits<long long>::min());
  best[0] = 0;
  for (int gi = 0; gi < ng; ++gi) {
    std::vector<long long> next(static_cast<std::size_t>(masks),
                                std::numeric_limits<long long>::min());
    for (int m = 0; m < masks; ++m) {
      if (best[static_cast<std::size_t>(m)] ==
          std::numeric_limits<long long>::min())
        continue;
      const long long base = best[static_cast<std::size_t>(m)];
      // gt lane left unmatched
      next[static_cast<std::size_t>(m)] =
          std::max(next[static_cast<std::size_t>(m)], base);
      for (int pi = 0; pi < np; ++pi) {
        if (m & (1 << pi)) continue;
        const int nm = m | (1 << pi);
        next[static_cast<std::size_t>(nm)] = std::max(
            next[static_cast<std::size_t>(nm)],
            base + scores[static_cast<std::size_t>(gi)][static_cast<std::size_t>(pi)]);
      }
    }
    best = std::move(next);
  }
  r.correct = *std::max_element(best.begin(), best.end());
  return r;
}

long long EvalReport::total_correct() const {
  long long c = 0;
  for (const auto& clip : per_clip) c += clip.correct;
  return c;
}

long long EvalReport::total_points() const {
  long long s = 0;
  for (const auto& clip : per_clip) s += clip.total;
  return s;
}

double EvalReport::accuracy() const {
  const long long s = total_points();
  if (s == 0) return 1.0;
  return static_cast<double>(total_correct()) / static_cast<double>(s);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy();
  j["total_correct"] = total_correct();
  j["total_points"] = total_points();
  if (empty_warning) j["empty_warning"] = true;
  j["clips"] = nlohmann::json::array();
  for (const auto& clip : per_clip)
    j["clips"].push_back({{"raw_file", clip.raw_file},
                          {"correct", clip.correct},
                          {"total", clip.total}});
  return j.dump(2);
}

std::string EvalReport::summary() const {
  std::ostringstream out;
  out << "clips: " << per_clip.size() << "  correct: " << total_correct()
      << "/" << total_points() << "  accuracy: " << accuracy();
  if (empty_warning) out << "  (warning: no ground-truth points)";
  return out.str();
}

EvalReport aggregate(const std::vector<ClipResult>& clips) {
  EvalReport report;
  report.per_clip = clips;
  report.empty_warning = report.total_points() == 0;
  for (const auto& clip : clips) {
    if (clip.correct > clip.total)
      throw std::invalid_argument("aggregate: clip '" + clip.raw_file +
                                  "' has C > S");
  }
  return report;
}

}  // namespace lanepe
