#include "lanepe/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "lanepe/errors.hpp"
#include "lanepe/image_io.hpp"
#include "lanepe/kernels.hpp"

namespace lanepe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version_string() {
#ifdef LANEPE_VERSION
  return LANEPE_VERSION;
#else
  return "0.1.0";
#endif
}

namespace {

json config_to_json(const NetworkConfig& cfg) {
  return json{{"input_h", cfg.input_h},
              {"input_w", cfg.input_w},
              {"input_channels", cfg.input_channels},
              {"encoder_channels", cfg.encoder_channels},
              {"use_resa", cfg.use_resa},
              {"resa_iterations", cfg.resa.iterations},
              {"resa_kernel_width", cfg.resa.conv_kernel_width},
              {"resa_share_weights", cfg.resa.share_weights_per_direction},
              {"variant", variant_name(cfg.variant)},
              {"num_lane_classes", cfg.num_lane_classes},
              {"seed", cfg.seed},
              {"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"momentum", cfg.momentum}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig cfg;
  cfg.input_h = j.at("input_h").get<int>();
  cfg.input_w = j.at("input_w").get<int>();
  cfg.input_channels = j.at("input_channels").get<int>();
  cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  cfg.use_resa = j.at("use_resa").get<bool>();
  cfg.resa.iterations = j.at("resa_iterations").get<int>();
  cfg.resa.conv_kernel_width = j.at("resa_kernel_width").get<int>();
  cfg.resa.share_weights_per_direction = j.at("resa_share_weights").get<bool>();
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.num_lane_classes = j.at("num_lane_classes").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.momentum = j.at("momentum").get<double>();
  return cfg;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

double wall_seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace

double evaluate_on_dataset(const Network& net, const LoadedDataset& data,
                           double threshold_px) {
  std::vector<ClipResult> clips;
  clips.reserve(data.labels.size());
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    LaneLabel pred =
        predict_lanes(net, data.samples[i].image, data.labels[i].h_samples);
    pred.raw_file = data.labels[i].raw_file;
    clips.push_back(clip_accuracy(pred, data.labels[i], threshold_px));
  }
  return aggregate(clips).accuracy();
}

TrainOutcome run_training(const NetworkConfig& cfg, const LoadedDataset& data,
                          double threshold_px, int eval_every) {
  if (data.samples.empty()) throw DataError("training dataset is empty");
  TrainOutcome out;
  out.state = make_train_state(cfg);
  for (int e = 0; e < cfg.epochs; ++e) {
    out.epoch_loss.push_back(train_epoch(out.state, data.samples));
    if (eval_every > 0 && (e + 1) % eval_every == 0 && e + 1 < cfg.epochs)
      out.eval_series.emplace_back(
          e + 1, evaluate_on_dataset(out.state.net, data, threshold_px));
  }
  out.final_accuracy = evaluate_on_dataset(out.state.net, data, threshold_px);
  out.eval_series.emplace_back(cfg.epochs, out.final_accuracy);
  return out;
}

int cmd_generate(const GenerateArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  SceneSpec spec = parse_scene_spec_file(args.spec_file);
  if (args.seed_override) spec.seed = *args.seed_override;
  if (args.count < 0) throw DataError("generate: count must be >= 0");
  const auto scenes = generate(spec, args.count);
  fs::create_directories(args.out_dir);
  write_scenes(args.out_dir, scenes);

  json manifest{{"tool", "lanepe"},
                {"version", version_string()},
                {"command", "generate"},
                {"count", args.count},
                {"scene_spec",
                 {{"h", spec.h},
                  {"w", spec.w},
                  {"num_lanes", spec.num_lanes},
                  {"vp_row", spec.vp_row},
                  {"vp_col", spec.vp_col},
                  {"curvature", spec.curvature},
                  {"noise", spec.noise},
                  {"position_ambiguity", spec.position_ambiguity},
                  {"seed", spec.seed}}},
                {"wall_clock_seconds", wall_seconds_since(start)}};
  write_text_file(fs::path(args.out_dir) / "manifest.json",
                  manifest.dump(2) + "\n");
  std::cout << "generated " << scenes.size() << " scenes in " << args.out_dir
            << "\n";
  return 0;
}

int cmd_train(const TrainArgs& args_in) {
  const auto start = std::chrono::steady_clock::now();
  TrainArgs args = args_in;

  if (!args.manifest_replay.empty()) {
    const json m = read_json_file(args.manifest_replay);
    if (m.value("command", "") != "train")
      throw DataError("manifest " + args.manifest_replay +
                      " is not a train manifest");
    args.cfg = config_from_json(m.at("config"));
    args.dataset_dir = m.at("dataset_dir").get<std::string>();
    args.threshold_px = m.at("threshold_px").get<double>();
    args.eval_every = m.at("eval_every").get<int>();
    args.kernels = m.value("kernels", "");
  }
  if (!args.kernels.empty())
    kernels::force(kernels::parse_backend(args.kernels));

  const LoadedDataset data = load_dataset(args.dataset_dir);
  args.cfg.input_h = data.h;
  args.cfg.input_w = data.w;
  args.cfg.validate();

  const TrainOutcome outcome =
      run_training(args.cfg, data, args.threshold_px, args.eval_every);

  fs::create_directories(args.out_dir);
  save_checkpoint((fs::path(args.out_dir) / "checkpoint.bin").string(),
                  outcome.state);

  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < outcome.epoch_loss.size(); ++e)
    csv << (e + 1) << "," << outcome.epoch_loss[e] << "\n";
  write_text_file(fs::path(args.out_dir) / "train_metrics.csv", csv.str());

  json manifest{{"tool", "lanepe"},
                {"version", version_string()},
                {"command", "train"},
                {"kernels", kernels::name(kernels::active())},
                {"dataset_dir", args.dataset_dir},
                {"threshold_px", args.threshold_px},
                {"eval_every", args.eval_every},
                {"config", config_to_json(args.cfg)},
                {"epoch_loss", outcome.epoch_loss},
                {"final_accuracy", outcome.final_accuracy},
                {"wall_clock_seconds", wall_seconds_since(start)}};
  json evals = json::array();
  for (const auto& [epoch, acc] : outcome.eval_series)
    evals.push_back({{"epoch", epoch}, {"accuracy", acc}});
  manifest["eval_series"] = evals;
  write_text_file(fs::path(args.out_dir) / "manifest.json",
                  manifest.dump(2) + "\n");

  std::cout << "trained " << variant_name(args.cfg.variant) << " for "
            << args.cfg.epochs << " epochs; accuracy "
            << outcome.final_accuracy << " at threshold " << args.threshold_px
            << "px\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const auto labels = parse_labels_file(args.labels_file);
  const fs::path base = fs::path(args.labels_file).parent_path();

  std::vector<ClipResult> clips;
  if (args.bypass_gt) {
    for (const auto& gt : labels)
      clips.push_back(clip_accuracy(gt, gt, args.threshold_px));
  } else {
    if (args.checkpoint.empty())
      throw DataError("eval: a checkpoint is required unless --bypass-gt");
    const TrainState state = load_checkpoint(args.checkpoint);
    for (const auto& gt : labels) {
      if (gt.raw_file.empty())
        throw DataError("eval: label without raw_file cannot be matched to an image");
      int w = 0, h = 0;
      const auto img = read_pgm((base / gt.raw_file).string(), &w, &h);
      if (h != state.net.cfg.input_h || w != state.net.cfg.input_w)
        throw DataError("eval: image " + gt.raw_file + " is " +
                        std::to_string(w) + "x" + std::to_string(h) +
                        " but the checkpoint expects " +
                        std::to_string(state.net.cfg.input_w) + "x" +
                        std::to_string(state.net.cfg.input_h));
      auto image = Tensor::create({h, w, 3});
      for (int p = 0; p < h * w; ++p) {
        const double v = img[static_cast<std::size_t>(p)] / 255.0;
        for (int c = 0; c < 3; ++c)
          image->data[static_cast<std::size_t>(p) * 3 + c] = v;
      }
      LaneLabel pred = predict_lanes(state.net, image, gt.h_samples);
      pred.raw_file = gt.raw_file;
      clips.push_back(clip_accuracy(pred, gt, args.threshold_px));
    }
  }

  const EvalReport report = aggregate(clips);
  const std::string json_text = report.to_json();
  if (!args.out_file.empty()) write_text_file(args.out_file, json_text + "\n");
  std::cout << json_text << "\n" << report.summary() << "\n";
  return 0;
}

int cmd_ablate(const AblateArgs& args) {
  if (args.seeds.empty()) throw DataError("ablate: seeds list is empty");
  const auto start = std::chrono::steady_clock::now();
  const LoadedDataset data = load_dataset(args.dataset_dir);

  struct Row {
    const char* name;
    bool use_resa;
    Variant variant;
  };
  // Table-2 shape: no aggregation, RESA alone, RESA + APE
  const Row rows[3] = {{"baseline_no_resa", false, Variant::baseline},
                       {"resa", true, Variant::baseline},
                       {"resa_ape", true, Variant::ape}};

  fs::create_directories(args.out_dir);
  std::ostringstream csv;
  csv << "config,seed,accuracy\n";
  std::ostringstream table;
  table << "config            mean      sd        seeds\n";

  json manifest{{"tool", "lanepe"},
                {"version", version_string()},
                {"command", "ablate"},
                {"kernels", kernels::name(kernels::active())},
                {"dataset_dir", args.dataset_dir},
                {"threshold_px", args.threshold_px},
                {"seeds", args.seeds},
                {"config", config_to_json(args.base_cfg)}};
  json results = json::array();

  for (const Row& row : rows) {
    std::vector<double> accs;
    for (std::uint64_t seed : args.seeds) {
      NetworkConfig cfg = args.base_cfg;
      cfg.input_h = data.h;
      cfg.input_w = data.w;
      cfg.use_resa = row.use_resa;
      cfg.variant = row.variant;
      cfg.seed = seed;
      const TrainOutcome outcome =
          run_training(cfg, data, args.threshold_px, 0);
      accs.push_back(outcome.final_accuracy);
      csv << row.name << "," << seed << "," << outcome.final_accuracy << "\n";
      results.push_back({{"config", row.name},
                         {"seed", seed},
                         {"accuracy", outcome.final_accuracy}});
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    const double sd =
        accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1))
                        : 0.0;
    char line[128];
    std::snprintf(line, sizeof(line), "%-17s %.4f    %.4f    %zu\n", row.name,
                  mean, sd, accs.size());
    table << line;
  }

  write_text_file(fs::path(args.out_dir) / "ablation.csv", csv.str());
  write_text_file(fs::path(args.out_dir) / "ablation.txt", table.str());
  manifest["results"] = results;
  manifest["wall_clock_seconds"] = wall_seconds_since(start);
  write_text_file(fs::path(args.out_dir) / "manifest.json",
                  manifest.dump(2) + "\n");
  std::cout << table.str();
  return 0;
}

namespace {

// channel mean -> min/max normalized 8-bit grayscale
std::vector<std::uint8_t> stage_image(const TensorPtr& map) {
  const int h = map->dim(0), w = map->dim(1), c = map->dim(2);
  std::vector<double> mean(static_cast<std::size_t>(h) * w, 0.0);
  for (int p = 0; p < h * w; ++p) {
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch)
      s += map->data[static_cast<std::size_t>(p) * c + ch];
    mean[static_cast<std::size_t>(p)] = s / c;
  }
  const auto [lo_it, hi_it] = std::minmax_element(mean.begin(), mean.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<std::uint8_t> px(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    px[i] = static_cast<std::uint8_t>(
        std::lround((mean[i] - lo) / span * 255.0));
  return px;
}

}  // namespace

int cmd_visualize(const VisualizeArgs& args) {
  const TrainState state = load_checkpoint(args.checkpoint);
  const Network& net = state.net;

  int w = 0, h = 0;
  const auto img = read_pgm(args.image_file, &w, &h);
  if (h != net.cfg.input_h || w != net.cfg.input_w)
    throw DataError("visualize: image size does not match the checkpoint");
  auto image = Tensor::create({h, w, 3});
  for (int p = 0; p < h * w; ++p) {
    const double v = img[static_cast<std::size_t>(p)] / 255.0;
    for (int c = 0; c < 3; ++c)
      image->data[static_cast<std::size_t>(p) * 3 + c] = v;
  }

  ComputeGraph g(/*recording=*/false);
  StageCapture stages;
  const TensorPtr logits = net.forward(g, image, &stages);

  fs::create_directories(args.out_dir);
  int emitted = 0;
  const auto emit = [&](const char* name, const TensorPtr& map) {
    if (!map) return;
    write_pgm((fs::path(args.out_dir) / name).string(), map->dim(1),
              map->dim(0), stage_image(map));
    ++emitted;
  };
  emit("stage_encoder.pgm", stages.encoder_out);
  emit("stage_resa.pgm", stages.resa_out);
  emit("stage_position.pgm", stages.pos_out);
  emit("stage_decoder.pgm", stages.decoder_feat);

  // prediction overlay: dimmed input with predicted lane pixels at full white
  const int nc = net.cfg.num_lane_classes;
  std::vector<std::uint8_t> overlay(static_cast<std::size_t>(h) * w);
  for (int p = 0; p < h * w; ++p) {
    const double* row = logits->data.data() + static_cast<std::size_t>(p) * nc;
    int best = 0;
    for (int c = 1; c < nc; ++c)
      if (row[c] > row[best]) best = c;
    overlay[static_cast<std::size_t>(p)] =
        best != 0 ? 255
                  : static_cast<std::uint8_t>(img[static_cast<std::size_t>(p)] / 2);
  }
  write_pgm((fs::path(args.out_dir) / "prediction_overlay.pgm").string(), w, h,
            overlay);
  ++emitted;

  std::cout << "wrote " << emitted << " stage images to " << args.out_dir
            << "\n";
  return 0;
}

}  // namespace lanepe::cli
