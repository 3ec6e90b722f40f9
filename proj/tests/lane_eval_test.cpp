#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lanepe/errors.hpp"
#include "lanepe/lane_eval.hpp"
#include "lanepe/rng.hpp"

using namespace lanepe;

namespace {

// Exhaustive enumeration over injective matchings: permute the pred-lane
// index list padded with "unmatched" slots and score every prefix
// assignment. Independent of the bitmask DP inside clip_accuracy.
long long oracle_best_correct(const LaneLabel& pred, const LaneLabel& gt,
                              double threshold) {
  const int np = static_cast<int>(pred.lanes.size());
  const int ng = static_cast<int>(gt.lanes.size());
  std::vector<int> slots;
  for (int i = 0; i < np; ++i) slots.push_back(i);
  for (int i = 0; i < ng; ++i) slots.push_back(-1);
  std::sort(slots.begin(), slots.end());
  long long best = 0;
  do {
    long long total = 0;
    for (int gi = 0; gi < ng; ++gi) {
      const int pi = slots[static_cast<std::size_t>(gi)];
      if (pi < 0) continue;
      const auto& gl = gt.lanes[static_cast<std::size_t>(gi)];
      const auto& pl = pred.lanes[static_cast<std::size_t>(pi)];
      for (std::size_t r = 0; r < gl.size(); ++r) {
        if (gl[r] == LaneLabel::kMissing || pl[r] == LaneLabel::kMissing)
          continue;
        if (std::abs(static_cast<double>(pl[r]) - gl[r]) <= threshold) ++total;
      }
    }
    best = std::max(best, total);
  } while (std::next_permutation(slots.begin(), slots.end()));
  return best;
}

LaneLabel random_clip(SeededRng& rng, const std::vector<int>& h_samples,
                      int max_lanes) {
  LaneLabel label;
  label.h_samples = h_samples;
  const int lanes = static_cast<int>(rng.uniform_int(0, max_lanes));
  for (int k = 0; k < lanes; ++k) {
    std::vector<int> xs;
    for (std::size_t r = 0; r < h_samples.size(); ++r)
      xs.push_back(rng.uniform() < 0.25
                       ? LaneLabel::kMissing
                       : static_cast<int>(rng.uniform_int(0, 40)));
    label.lanes.push_back(std::move(xs));
  }
  return label;
}

}  // namespace

TEST_CASE("parse_labels: happy path, diagnostics, degenerate cases") {
  std::stringstream good;
  good << R"({"raw_file": "a.pgm", "h_samples": [10, 20], "lanes": [[3, 4], [7, -2]]})"
       << "\n";
  good << R"({"raw_file": "b.pgm", "h_samples": [5], "lanes": []})" << "\n";
  const auto labels = parse_labels(good);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].lanes.size() == 2);
  CHECK(labels[0].lanes[1][1] == LaneLabel::kMissing);
  CHECK(labels[1].lanes.empty());

  // 2 lanes x 48 h_samples
  std::stringstream wide;
  wide << R"({"raw_file": "c", "h_samples": [)";
  for (int i = 0; i < 48; ++i) wide << (i ? "," : "") << (100 + i);
  wide << R"(], "lanes": [[)";
  for (int i = 0; i < 48; ++i) wide << (i ? "," : "") << i;
  wide << "],[";
  for (int i = 0; i < 48; ++i) wide << (i ? "," : "") << (i + 1);
  wide << "]]}\n";
  const auto two = parse_labels(wide);
  REQUIRE(two.size() == 1);
  CHECK(two[0].lanes.size() == 2);
  CHECK(two[0].h_samples.size() == 48);

  std::stringstream short_lane;
  short_lane << R"({"h_samples": [1, 2, 3], "lanes": [[5, 6]]})" << "\n";
  CHECK_THROWS_WITH_AS(parse_labels(short_lane), doctest::Contains("lane 0"),
                       std::invalid_argument);

  std::stringstream non_integer;
  non_integer << R"({"h_samples": [1], "lanes": [[2.5]]})" << "\n";
  CHECK_THROWS_AS(parse_labels(non_integer), std::invalid_argument);

  std::stringstream bad_json;
  bad_json << "{}\n" << "{not json\n";
  CHECK_THROWS_WITH_AS(parse_labels(bad_json), doctest::Contains("line 1"),
                       std::invalid_argument);

  std::stringstream bad_x;
  bad_x << R"({"h_samples": [1], "lanes": [[-7]]})" << "\n";
  CHECK_THROWS_AS(parse_labels(bad_x), std::invalid_argument);

  std::stringstream decreasing;
  decreasing << R"({"h_samples": [5, 4], "lanes": []})" << "\n";
  CHECK_THROWS_AS(parse_labels(decreasing), std::invalid_argument);
}

TEST_CASE("label json round trip") {
  LaneLabel label;
  label.raw_file = "x.pgm";
  label.h_samples = {4, 8, 12};
  label.lanes = {{1, -2, 3}, {5, 6, -2}};
  std::stringstream stream(label_to_json(label) + "\n");
  const auto parsed = parse_labels(stream);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].raw_file == label.raw_file);
  CHECK(parsed[0].h_samples == label.h_samples);
  CHECK(parsed[0].lanes == label.lanes);
}

TEST_CASE("clip_accuracy: identity, empty prediction, thresholded offsets") {
  LaneLabel gt;
  gt.h_samples = {10, 20, 30};
  gt.lanes = {{5, 6, 7}, {15, 16, 17}};

  const auto same = clip_accuracy(gt, gt, 0.0);
  CHECK(same.total == 6);
  CHECK(same.correct == 6);

  LaneLabel empty;
  empty.h_samples = gt.h_samples;
  empty.lanes = {{-2, -2, -2}, {-2, -2, -2}};
  CHECK(clip_accuracy(empty, gt, 20.0).correct == 0);

  // per point offsets (0, t, t+1): two correct per lane
  const double thr = 4.0;
  LaneLabel off;
  off.h_samples = gt.h_samples;
  off.lanes = {{5, 6 + 4, 7 + 5}, {15, 16 + 4, 17 + 5}};
  const auto r = clip_accuracy(off, gt, thr);
  CHECK(r.total == 6);
  CHECK(r.correct == 4);
  CHECK(r.correct == oracle_best_correct(off, gt, thr));

  LaneLabel wrong_rows;
  wrong_rows.h_samples = {10, 20, 31};
  wrong_rows.lanes = {{1, 2, 3}};
  CHECK_THROWS_AS(clip_accuracy(wrong_rows, gt, 1.0), std::invalid_argument);

  LaneLabel seven;
  seven.h_samples = {1};
  seven.lanes.assign(7, {0});
  CHECK_THROWS_AS(clip_accuracy(seven, seven, 1.0), std::invalid_argument);
}

TEST_CASE("metric ignores lane order on both sides") {
  SeededRng rng(5);
  const std::vector<int> rows{10, 20, 30, 40};
  for (int trial = 0; trial < 30; ++trial) {
    LaneLabel gt = random_clip(rng, rows, 4);
    LaneLabel pred = random_clip(rng, rows, 4);
    const auto base = clip_accuracy(pred, gt, 6.0);
    LaneLabel gt_shuffled = gt;
    LaneLabel pred_shuffled = pred;
    for (int s = 0; s < 3; ++s) {
      if (gt_shuffled.lanes.size() > 1)
        std::swap(gt_shuffled.lanes[0],
                  gt_shuffled.lanes[static_cast<std::size_t>(rng.uniform_int(
                      0, static_cast<int>(gt_shuffled.lanes.size()) - 1))]);
      if (pred_shuffled.lanes.size() > 1)
        std::swap(pred_shuffled.lanes[0],
                  pred_shuffled.lanes[static_cast<std::size_t>(rng.uniform_int(
                      0, static_cast<int>(pred_shuffled.lanes.size()) - 1))]);
    }
    const auto shuffled = clip_accuracy(pred_shuffled, gt_shuffled, 6.0);
    CHECK(base.correct == shuffled.correct);
    CHECK(base.total == shuffled.total);
  }
}

TEST_CASE("shrinking the threshold never increases C") {
  SeededRng rng(7);
  const std::vector<int> rows{10, 20, 30};
  for (int trial = 0; trial < 25; ++trial) {
    LaneLabel gt = random_clip(rng, rows, 3);
    LaneLabel pred = random_clip(rng, rows, 3);
    long long prev = -1;
    for (double thr : {20.0, 10.0, 5.0, 2.0, 0.0}) {
      const auto r = clip_accuracy(pred, gt, thr);
      if (prev >= 0) CHECK(r.correct <= prev);
      prev = r.correct;
    }
  }
}

TEST_CASE("assignment equals exhaustive enumeration on random clips") {
  SeededRng rng(11);
  const std::vector<int> rows{10, 20, 30, 40, 50};
  for (int trial = 0; trial < 100; ++trial) {
    LaneLabel gt = random_clip(rng, rows, 4);
    LaneLabel pred = random_clip(rng, rows, 4);
    const double thr = rng.uniform(0.0, 10.0);
    const auto got = clip_accuracy(pred, gt, thr);
    CHECK(got.correct == oracle_best_correct(pred, gt, thr));
  }
}

TEST_CASE("aggregate: ratio of sums, not mean of ratios") {
  ClipResult a{"a", 3, 4};
  ClipResult b{"b", 1, 4};
  const auto report = aggregate({a, b});
  CHECK(report.accuracy() == 0.5);  // not mean(0.75, 0.25) = 0.5... distinct case below
  // a case where the two disagree: (9/10) and (0/2)
  const auto uneven = aggregate({{"a", 9, 10}, {"b", 0, 2}});
  CHECK(uneven.accuracy() == doctest::Approx(9.0 / 12.0));
  CHECK(uneven.accuracy() != doctest::Approx(0.5 * (0.9 + 0.0)));

  const auto one = aggregate({{"c", 5, 5}});
  CHECK(one.accuracy() == 1.0);

  const auto none = aggregate({});
  CHECK(none.accuracy() == 1.0);
  CHECK(none.empty_warning);

  CHECK_THROWS_AS(aggregate({{"bad", 3, 2}}), std::invalid_argument);
}

TEST_CASE("report json carries accuracy and clips") {
  const auto report = aggregate({{"a", 2, 4}, {"b", 2, 4}});
  const std::string j = report.to_json();
  CHECK(j.find("\"accuracy\": 0.5") != std::string::npos);
  CHECK(j.find("\"raw_file\": \"a\"") != std::string::npos);
  CHECK(report.summary().find("accuracy: 0.5") != std::string::npos);
}
