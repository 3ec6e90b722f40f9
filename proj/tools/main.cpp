#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "lanepe/cli.hpp"
#include "lanepe/errors.hpp"
#include "lanepe/kernels.hpp"

namespace {

using namespace lanepe;

void add_network_options(CLI::App* sub, NetworkConfig* cfg) {
  sub->add_option("--encoder-channels", cfg->encoder_channels,
                  "channels per stride-2 encoder stage")
      ->delimiter(',');
  sub->add_flag_callback(
      "--no-resa", [cfg] { cfg->use_resa = false; },
      "disable the feature-shift aggregator");
  sub->add_option("--resa-iterations", cfg->resa.iterations,
                  "aggregation iterations (stride doubles per iteration)");
  sub->add_option("--resa-kernel", cfg->resa.conv_kernel_width,
                  "odd conv width along each slice");
  sub->add_option("--num-classes", cfg->num_lane_classes,
                  "background + maximum lane count");
  sub->add_option("--seed", cfg->seed, "run seed");
  sub->add_option("--lr", cfg->lr, "learning rate");
  sub->add_option("--epochs", cfg->epochs, "training epochs");
  sub->add_option("--batch-size", cfg->batch_size, "samples per step");
  sub->add_option("--momentum", cfg->momentum, "SGD momentum");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lanepe: lane segmentation with positional encodings, desk scale"};
  app.set_version_flag("--version", cli::version_string());
  app.require_subcommand(1);

  auto gen = std::make_shared<cli::GenerateArgs>();
  std::uint64_t gen_seed = 0;
  CLI::App* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset");
  gen_cmd->set_config("--config");
  gen_cmd->add_option("--spec", gen->spec_file, "scene spec (key = value lines)")
      ->required();
  gen_cmd->add_option("--out", gen->out_dir, "output directory")->required();
  gen_cmd->add_option("--count", gen->count, "number of scenes")->required();
  CLI::Option* gen_seed_opt =
      gen_cmd->add_option("--seed", gen_seed, "override the spec seed");

  auto train = std::make_shared<cli::TrainArgs>();
  std::string train_variant = "baseline";
  CLI::App* train_cmd = app.add_subcommand("train", "train one variant");
  train_cmd->set_config("--config");
  train_cmd->add_option("--dataset", train->dataset_dir, "dataset directory");
  train_cmd->add_option("--out", train->out_dir, "output directory")
      ->required();
  train_cmd->add_option("--variant", train_variant,
                        "baseline | sin_pe | ape | rpe | rpe_ape");
  add_network_options(train_cmd, &train->cfg);
  train_cmd->add_option("--threshold-px", train->threshold_px,
                        "point-match threshold for the final accuracy");
  train_cmd->add_option("--eval-every", train->eval_every,
                        "evaluate accuracy every N epochs (0 = final only)");
  train_cmd->add_option("--kernels", train->kernels,
                        "force kernel backend: scalar | avx2 | neon");
  train_cmd->add_option("--manifest", train->manifest_replay,
                        "replay the run recorded in a manifest.json");

  auto eval = std::make_shared<cli::EvalArgs>();
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint");
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--checkpoint", eval->checkpoint, "trained checkpoint");
  eval_cmd->add_option("--labels", eval->labels_file, "JSON-lines labels")
      ->required();
  eval_cmd->add_option("--out", eval->out_file, "write the JSON report here");
  eval_cmd->add_option("--threshold-px", eval->threshold_px,
                       "point-match threshold");
  eval_cmd->add_flag("--bypass-gt", eval->bypass_gt,
                     "score the ground truth against itself");

  auto ablate = std::make_shared<cli::AblateArgs>();
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "no-RESA / RESA / RESA+APE grid");
  ablate_cmd->set_config("--config");
  ablate_cmd->add_option("--dataset", ablate->dataset_dir, "dataset directory")
      ->required();
  ablate_cmd->add_option("--out", ablate->out_dir, "output directory")
      ->required();
  ablate_cmd->add_option("--seeds", ablate->seeds, "seeds, comma separated")
      ->required()
      ->delimiter(',');
  add_network_options(ablate_cmd, &ablate->base_cfg);
  ablate_cmd->add_option("--threshold-px", ablate->threshold_px,
                         "point-match threshold");

  auto vis = std::make_shared<cli::VisualizeArgs>();
  CLI::App* vis_cmd =
      app.add_subcommand("visualize", "export per-stage feature-map images");
  vis_cmd->set_config("--config");
  vis_cmd->add_option("--checkpoint", vis->checkpoint, "trained checkpoint")
      ->required();
  vis_cmd->add_option("--image", vis->image_file, "input PGM image")
      ->required();
  vis_cmd->add_option("--out", vis->out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) {
      if (gen_seed_opt->count() > 0) gen->seed_override = gen_seed;
      return cli::cmd_generate(*gen);
    }
    if (train_cmd->parsed()) {
      train->cfg.variant = parse_variant(train_variant);
      if (train->manifest_replay.empty() && train->dataset_dir.empty()) {
        std::cerr << "train: --dataset is required (or --manifest)\n";
        return 1;
      }
      return cli::cmd_train(*train);
    }
    if (eval_cmd->parsed()) return cli::cmd_eval(*eval);
    if (ablate_cmd->parsed()) return cli::cmd_ablate(*ablate);
    if (vis_cmd->parsed()) return cli::cmd_visualize(*vis);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
