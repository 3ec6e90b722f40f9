#include "lanepe/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lanepe/errors.hpp"
#include "lanepe/image_io.hpp"
#include "lanepe/rng.hpp"

namespace lanepe {

namespace {

namespace fs = std::filesystem;

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// truncate lanes that get closer; centers 3.5 apart keep a one-pixel gap
// between the two-pixel-wide stripes
constexpr double kMinSeparationPx = 3.5;
constexpr int kOcclusionSegmentRows = 8;
constexpr double kPixelNoiseStd = 0.02;

std::string scene_image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d.pgm", index);
  return buf;
}

std::string scene_mask_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d_mask.pgm", index);
  return buf;
}

}  // namespace

void SceneSpec::validate() const {
  check(h >= 16 && w >= 16, "SceneSpec: image must be at least 16x16");
  check(num_lanes >= 2 && num_lanes <= 4,
        "SceneSpec: num_lanes must be in [2, 4]");
  check(vp_row >= 1 && vp_row < h / 2,
        "SceneSpec: vanishing point row must sit in the upper image region");
  check(vp_col >= 0 && vp_col < w, "SceneSpec: vanishing point column outside image");
  check(noise >= 0.0 && noise <= 1.0, "SceneSpec: noise must be in [0, 1]");
  check(curvature >= -8.0 && curvature <= 8.0,
        "SceneSpec: |curvature| beyond 8 px is not drawable at desk scale");
  // bottom-row spacing: lanes may not overlap where they start
  check(w / (num_lanes + 1) >= 8,
        "SceneSpec: " + std::to_string(num_lanes) +
            " lanes overlap at the bottom row of a " + std::to_string(w) +
            "px wide image");
}

double LaneGeometry::x_at(double row) const {
  const double t = (bottom_row - row) / (bottom_row - vp_r);
  return x0 + (vp_c - x0) * t + 4.0 * curvature * t * (1.0 - t);
}

std::vector<int> default_h_samples(int h) {
  const int step = std::max(1, h / 16);
  std::vector<int> rows;
  for (int r = step; r < h; r += step) rows.push_back(r);
  return rows;
}

std::vector<Scene> generate(const SceneSpec& spec, int count) {
  spec.validate();
  check(count >= 0, "generate: count must be non-negative");
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  const std::vector<int> h_samples = default_h_samples(spec.h);

  for (int idx = 0; idx < count; ++idx) {
    // per-scene stream so scenes are independent of each other
    SeededRng rng(spec.seed ^
                  (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(idx) + 1)));
    Scene scene;
    const int h = spec.h, w = spec.w, n = spec.num_lanes;
    const int bottom = h - 1;

    const double vp_r = std::clamp(
        spec.vp_row + static_cast<int>(rng.uniform_int(-1, 1)), 1, h / 2 - 1);
    const double vp_c = std::clamp(
        spec.vp_col + static_cast<int>(rng.uniform_int(-3, 3)), 2, w - 3);

    const double sep = static_cast<double>(w) / (n + 1);
    const double jitter = std::max(0.0, sep / 2.0 - 2.0);
    for (int k = 0; k < n; ++k) {
      LaneGeometry geom;
      geom.bottom_row = bottom;
      geom.vp_r = vp_r;
      geom.vp_c = vp_c;
      geom.x0 = sep * (k + 1) + rng.uniform(-jitter, jitter);
      geom.curvature = spec.curvature == 0.0
                           ? 0.0
                           : spec.curvature * rng.uniform(0.75, 1.25);
      scene.geometry.push_back(geom);
    }

    // render from the bottom up; stop all lanes once any pair converges
    int top_row = static_cast<int>(vp_r) + 1;
    for (int r = bottom; r >= static_cast<int>(vp_r) + 1; --r) {
      double min_sep = 1e9;
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          min_sep = std::min(min_sep, std::abs(scene.geometry[static_cast<std::size_t>(a)].x_at(r) -
                                               scene.geometry[static_cast<std::size_t>(b)].x_at(r)));
      if (min_sep < kMinSeparationPx) {
        top_row = r + 1;
        break;
      }
    }
    for (auto& geom : scene.geometry) geom.top_row = top_row;

    scene.mask.assign(static_cast<std::size_t>(h) * w, 0);
    std::vector<double> gray(static_cast<std::size_t>(h) * w, 0.0);
    for (int k = 0; k < n; ++k) {
      const auto& geom = scene.geometry[static_cast<std::size_t>(k)];
      const double brightness =
          spec.position_ambiguity
              ? 0.9
              : 0.35 + 0.55 * static_cast<double>(k) / std::max(1, n - 1);
      for (int r = bottom; r >= top_row; --r) {
        const int x = static_cast<int>(std::llround(geom.x_at(r)));
        // two pixels wide: lanes stay drawable after 4x downsampling
        for (int c = x; c <= x + 1; ++c) {
          if (c < 0 || c >= w) continue;
          scene.mask[static_cast<std::size_t>(r) * w + c] = k + 1;
          gray[static_cast<std::size_t>(r) * w + c] = brightness;
        }
      }
    }

    // occlusion wipes image segments; mask and labels keep the lane
    if (spec.noise > 0.0) {
      for (int k = 0; k < n; ++k) {
        for (int seg_start = top_row; seg_start <= bottom;
             seg_start += kOcclusionSegmentRows) {
          const bool occluded = rng.uniform() < spec.noise;
          if (!occluded) continue;
          const int seg_end =
              std::min(bottom, seg_start + kOcclusionSegmentRows - 1);
          for (int r = seg_start; r <= seg_end; ++r) {
            const int x = static_cast<int>(std::llround(
                scene.geometry[static_cast<std::size_t>(k)].x_at(r)));
            for (int c = x; c <= x + 1; ++c)
              if (c >= 0 && c < w &&
                  scene.mask[static_cast<std::size_t>(r) * w + c] == k + 1)
                gray[static_cast<std::size_t>(r) * w + c] = 0.0;
          }
        }
      }
    }

    for (double& v : gray)
      v = std::clamp(v + rng.gaussian(0.0, kPixelNoiseStd), 0.0, 1.0);

    scene.image = Tensor::create({h, w, 3});
    for (int p = 0; p < h * w; ++p)
      for (int c = 0; c < 3; ++c)
        scene.image->data[static_cast<std::size_t>(p) * 3 + c] =
            gray[static_cast<std::size_t>(p)];

    scene.label.raw_file = scene_image_name(idx);
    scene.label.h_samples = h_samples;
    for (int k = 0; k < n; ++k) {
      const auto& geom = scene.geometry[static_cast<std::size_t>(k)];
      std::vector<int> xs;
      xs.reserve(h_samples.size());
      for (int r : h_samples) {
        if (r < top_row || r > bottom) {
          xs.push_back(LaneLabel::kMissing);
          continue;
        }
        const int x = static_cast<int>(std::llround(geom.x_at(r)));
        xs.push_back(x >= 0 && x < w ? x : LaneLabel::kMissing);
      }
      scene.label.lanes.push_back(std::move(xs));
    }
    scene.label.validate();
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void write_scenes(const std::string& dir, const std::vector<Scene>& scenes) {
  fs::create_directories(dir);
  std::ofstream labels(fs::path(dir) / "labels.jsonl");
  if (!labels) throw DataError("cannot write labels in " + dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    const int h = scene.image->dim(0), w = scene.image->dim(1);
    std::vector<std::uint8_t> img(static_cast<std::size_t>(h) * w);
    std::vector<std::uint8_t> msk(static_cast<std::size_t>(h) * w);
    for (int p = 0; p < h * w; ++p) {
      img[static_cast<std::size_t>(p)] =
          quantize_unit(scene.image->data[static_cast<std::size_t>(p) * 3]);
      msk[static_cast<std::size_t>(p)] =
          static_cast<std::uint8_t>(scene.mask[static_cast<std::size_t>(p)]);
    }
    write_pgm((fs::path(dir) / scene_image_name(static_cast<int>(i))).string(),
              w, h, img);
    write_pgm((fs::path(dir) / scene_mask_name(static_cast<int>(i))).string(),
              w, h, msk);
    labels << label_to_json(scene.label) << "\n";
  }
  if (!labels) throw DataError("label write failed in " + dir);
}

LoadedDataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  LoadedDataset ds;
  ds.labels = parse_labels_file((base / "labels.jsonl").string());
  for (const auto& label : ds.labels) {
    if (label.raw_file.empty())
      throw DataError("dataset label without raw_file in " + dir);
    int w = 0, h = 0;
    const auto img = read_pgm((base / label.raw_file).string(), &w, &h);
    if (ds.h == 0) {
      ds.h = h;
      ds.w = w;
    } else if (ds.h != h || ds.w != w) {
      throw DataError("dataset images disagree on size in " + dir);
    }
    std::string mask_name = label.raw_file;
    const auto dot = mask_name.rfind('.');
    mask_name = mask_name.substr(0, dot) + "_mask.pgm";
    int mw = 0, mh = 0;
    const auto msk = read_pgm((base / mask_name).string(), &mw, &mh);
    if (mw != w || mh != h)
      throw DataError("mask size mismatch for " + label.raw_file);

    Sample sample;
    sample.image = Tensor::create({h, w, 3});
    for (int p = 0; p < h * w; ++p) {
      const double v = img[static_cast<std::size_t>(p)] / 255.0;
      for (int c = 0; c < 3; ++c)
        sample.image->data[static_cast<std::size_t>(p) * 3 + c] = v;
    }
    sample.mask.assign(msk.begin(), msk.end());
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

SceneSpec parse_scene_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene spec: " + path);
  SceneSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw DataError("scene spec line " + std::to_string(line_no) +
                      ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "h") spec.h = std::stoi(value);
      else if (key == "w") spec.w = std::stoi(value);
      else if (key == "num_lanes") spec.num_lanes = std::stoi(value);
      else if (key == "vp_row") spec.vp_row = std::stoi(value);
      else if (key == "vp_col") spec.vp_col = std::stoi(value);
      else if (key == "curvature") spec.curvature = std::stod(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "position_ambiguity")
        spec.position_ambiguity = value == "1" || value == "true";
      else if (key == "seed") spec.seed = std::stoull(value);
      else
        throw DataError("unknown key '" + key + "'");
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("scene spec line " + std::to_string(line_no) +
                      ": bad value for '" + key + "'");
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("scene spec invalid: ") + e.what());
  }
  return spec;
}

}  // namespace lanepe
