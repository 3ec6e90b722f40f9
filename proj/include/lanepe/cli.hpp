#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lanepe/lane_net.hpp"
#include "lanepe/synthetic_data.hpp"

namespace lanepe::cli {

// version string embedded at build time (git describe when available)
const char* version_string();

struct GenerateArgs {
  std::string spec_file;
  std::string out_dir;
  int count = 0;
  std::optional<std::uint64_t> seed_override;
};

struct TrainArgs {
  std::string dataset_dir;
  std::string out_dir;
  NetworkConfig cfg;
  double threshold_px = 20.0;  // final-accuracy evaluation
  int eval_every = 0;          // 0: evaluate only after the last epoch
  std::string kernels;         // backend override; empty = auto
  std::string manifest_replay; // rerun the config recorded in this manifest
};

struct EvalArgs {
  std::string checkpoint;
  std::string labels_file;
  std::string out_file;  // optional JSON report path
  double threshold_px = 20.0;
  bool bypass_gt = false;  // score ground truth against itself
};

struct AblateArgs {
  std::string dataset_dir;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  NetworkConfig base_cfg;  // variant/use_resa are overridden per row
  double threshold_px = 20.0;
};

struct VisualizeArgs {
  std::string checkpoint;
  std::string image_file;
  std::string out_dir;
};

int cmd_generate(const GenerateArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_ablate(const AblateArgs& args);
int cmd_visualize(const VisualizeArgs& args);

// Shared by train and ablate: full training run plus final Eq-7 accuracy
// over the training labels.
struct TrainOutcome {
  std::vector<double> epoch_loss;
  std::vector<std::pair<int, double>> eval_series;
  double final_accuracy = 0.0;
  TrainState state;
};

TrainOutcome run_training(const NetworkConfig& cfg, const LoadedDataset& data,
                          double threshold_px, int eval_every);

double evaluate_on_dataset(const Network& net, const LoadedDataset& data,
                           double threshold_px);

}  // namespace lanepe::cli
