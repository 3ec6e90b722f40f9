#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lanepe/attention.hpp"
#include "lanepe/lane_eval.hpp"
#include "lanepe/position_encoding.hpp"
#include "lanepe/resa.hpp"
#include "lanepe/rng.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe {

enum class Variant { baseline, sin_pe, ape, rpe, rpe_ape };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& s);

struct NetworkConfig {
  int input_h = 32;
  int input_w = 64;
  int input_channels = 3;
  std::vector<int> encoder_channels = {8, 16};  // 3x3 stride-2 stages
  bool use_resa = true;
  ResaConfig resa;
  Variant variant = Variant::baseline;
  int num_lane_classes = 4;  // background + lanes
  std::uint64_t seed = 0;
  double lr = 0.05;
  int epochs = 60;
  int batch_size = 12;
  double momentum = 0.9;

  int stages() const { return static_cast<int>(encoder_channels.size()); }
  int down_h() const { return input_h >> stages(); }
  int down_w() const { return input_w >> stages(); }
  int feat_channels() const { return encoder_channels.back(); }
  void validate() const;
};

struct ConvLayer {
  TensorPtr w;  // (kh*kw*in_c) x out_c
  TensorPtr b;  // out_c
  int kh = 3, kw = 3, stride = 2, pad = 1;
  int in_c = 0, out_c = 0;
};

// Intermediate maps captured by an instrumented forward (visualization and
// the stage-difference checks).
struct StageCapture {
  TensorPtr encoder_out;  // after the encoder stub
  TensorPtr resa_out;     // after RESA (== encoder_out when RESA is off)
  TensorPtr pos_out;      // after the positional stage; null for baseline
  TensorPtr decoder_feat; // upsampled features before the class projection
};

// encoder stub -> [RESA] -> positional stage (per variant) -> bilinear
// decoder -> per-pixel lane-class logits at input resolution.
struct Network {
  NetworkConfig cfg;
  std::vector<ConvLayer> encoder;
  ResaWeights resa;      // empty when cfg.use_resa is false
  PositionalField pe;    // sinusoidal (sin_pe) or learned (ape, rpe_ape)
  AttentionParams attn;  // engaged for sin_pe / rpe / rpe_ape
  TensorPtr dec_w, dec_b;

  bool has_attention() const;
  bool has_learned_pe() const;
  bool has_sinusoidal_pe() const;

  // trainable tensors in fixed, named order (checkpoint layout)
  std::vector<TensorPtr> parameters() const;
  std::int64_t parameter_count() const;

  TensorPtr forward(ComputeGraph& g, const TensorPtr& image,
                    StageCapture* capture = nullptr) const;
};

Network build_network(const NetworkConfig& cfg);

// Per lane class k in [1, num_classes): the rounded mean column of class-k
// pixels at each sampled row, or the missing sentinel when the row has none.
LaneLabel lanes_from_classes(const std::vector<int>& classes, int h, int w,
                             int num_classes,
                             const std::vector<int>& h_samples);

// argmax over the forward logits, then lanes_from_classes.
LaneLabel predict_lanes(const Network& net, const TensorPtr& image,
                        const std::vector<int>& h_samples);

struct Sample {
  TensorPtr image;        // h x w x c
  std::vector<int> mask;  // h*w class ids, row-major
};

struct TrainState {
  Network net;
  std::vector<TensorPtr> momenta;  // parallel to net.parameters()
  int epoch = 0;
  SeededRng rng;  // epoch shuffling
};

TrainState make_train_state(const NetworkConfig& cfg);

// Mean pixelwise cross-entropy over the batch, one SGD-with-momentum update.
double train_step(TrainState& state, const std::vector<const Sample*>& batch);

// One pass over the dataset in a seeded shuffled order; returns the mean
// loss. Increments state.epoch.
double train_epoch(TrainState& state, const std::vector<Sample>& data);

// Versioned little-endian binary dump of config, epoch, rng state and every
// parameter with its momentum buffer. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

}  // namespace lanepe
