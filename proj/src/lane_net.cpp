#include "lanepe/lane_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "lanepe/errors.hpp"
#include "lanepe/kernels.hpp"

namespace lanepe {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::sin_pe: return "sin_pe";
    case Variant::ape: return "ape";
    case Variant::rpe: return "rpe";
    case Variant::rpe_ape: return "rpe_ape";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "sin_pe") return Variant::sin_pe;
  if (s == "ape") return Variant::ape;
  if (s == "rpe") return Variant::rpe;
  if (s == "rpe_ape") return Variant::rpe_ape;
  throw std::invalid_argument(
      "unknown variant '" + s +
      "' (expected baseline, sin_pe, ape, rpe or rpe_ape)");
}

void NetworkConfig::validate() const {
  check(input_channels > 0 && input_h > 0 && input_w > 0,
        "NetworkConfig: input extents must be positive");
  check(!encoder_channels.empty(), "NetworkConfig: encoder needs stages");
  for (int c : encoder_channels)
    check(c > 0, "NetworkConfig: encoder channels must be positive");
  const int factor = 1 << stages();
  check(input_h % factor == 0 && input_w % factor == 0,
        "NetworkConfig: input " + std::to_string(input_h) + "x" +
            std::to_string(input_w) + " must be divisible by 2^stages = " +
            std::to_string(factor));
  check(num_lane_classes >= 2, "NetworkConfig: need background + lanes");
  if (use_resa) resa.validate(down_h(), down_w());
  if (variant == Variant::sin_pe)
    check(feat_channels() % 4 == 0,
          "NetworkConfig: sin_pe needs feature channels divisible by 4");
  check(batch_size >= 1, "NetworkConfig: batch_size must be positive");
  check(epochs >= 0, "NetworkConfig: epochs must be non-negative");
  check(lr >= 0 && momentum >= 0 && momentum < 1,
        "NetworkConfig: bad optimizer settings");
}

bool Network::has_attention() const {
  return cfg.variant == Variant::sin_pe || cfg.variant == Variant::rpe ||
         cfg.variant == Variant::rpe_ape;
}

bool Network::has_learned_pe() const {
  return cfg.variant == Variant::ape || cfg.variant == Variant::rpe_ape;
}

bool Network::has_sinusoidal_pe() const {
  return cfg.variant == Variant::sin_pe;
}

std::vector<TensorPtr> Network::parameters() const {
  std::vector<TensorPtr> out;
  for (const auto& layer : encoder) {
    out.push_back(layer.w);
    out.push_back(layer.b);
  }
  for (const auto& t : resa.conv) out.push_back(t);
  if (has_learned_pe()) out.push_back(pe.values);
  if (has_attention()) {
    out.push_back(attn.w_q);
    out.push_back(attn.w_k);
    out.push_back(attn.w_v);
    if (attn.rel) {
      out.push_back(attn.rel->row_emb);
      out.push_back(attn.rel->col_emb);
    }
  }
  out.push_back(dec_w);
  out.push_back(dec_b);
  return out;
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p->numel();
  return n;
}

Network build_network(const NetworkConfig& cfg) {
  cfg.validate();
  Network net;
  net.cfg = cfg;
  SeededRng rng(cfg.seed);

  int c_in = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    const int c_out = cfg.encoder_channels[i];
    ConvLayer layer;
    layer.in_c = c_in;
    layer.out_c = c_out;
    layer.w = Tensor::create({layer.kh * layer.kw * c_in, c_out},
                             /*requires_grad=*/true);
    const double std = std::sqrt(2.0 / (layer.kh * layer.kw * c_in));
    for (double& v : layer.w->data) v = rng.gaussian(0.0, std);
    layer.w->name = "enc" + std::to_string(i) + ".w";
    layer.b = Tensor::create({c_out}, /*requires_grad=*/true);
    layer.b->name = "enc" + std::to_string(i) + ".b";
    net.encoder.push_back(std::move(layer));
    c_in = c_out;
  }

  const int dh = cfg.down_h(), dw = cfg.down_w(), d = cfg.feat_channels();
  if (cfg.use_resa) {
    net.resa = init_resa(cfg.resa, dh, dw, d, rng);
    static const char* dir_names[4] = {"up", "down", "left", "right"};
    for (std::size_t i = 0; i < net.resa.conv.size(); ++i)
      net.resa.conv[i]->name =
          "resa.k" + std::to_string(i / 4) + "." + dir_names[i % 4];
  }

  if (net.has_learned_pe()) {
    EncodingSpec spec;
    spec.kind = EncodingKind::learned_absolute;
    spec.d_model = d;
    spec.height = dh;
    spec.width = dw;
    net.pe = init_learned(spec, rng.raw());
    net.pe.values->name = "ape.field";
  } else if (net.has_sinusoidal_pe()) {
    EncodingSpec spec;
    spec.kind = EncodingKind::sinusoidal;
    spec.d_model = d;
    spec.height = dh;
    spec.width = dw;
    net.pe = sinusoidal_2d(spec);
  }

  if (net.has_attention()) {
    const bool with_rel =
        cfg.variant == Variant::rpe || cfg.variant == Variant::rpe_ape;
    net.attn =
        init_attention(d, d, rng, with_rel, std::max(dh, dw) - 1);
    net.attn.w_q->name = "attn.w_q";
    net.attn.w_k->name = "attn.w_k";
    net.attn.w_v->name = "attn.w_v";
    if (net.attn.rel) {
      net.attn.rel->row_emb->name = "attn.rel.row";
      net.attn.rel->col_emb->name = "attn.rel.col";
    }
  }

  net.dec_w = Tensor::create({d, cfg.num_lane_classes}, /*requires_grad=*/true);
  const double std = std::sqrt(2.0 / d);
  for (double& v : net.dec_w->data) v = rng.gaussian(0.0, std);
  net.dec_w->name = "dec.w";
  net.dec_b = Tensor::create({cfg.num_lane_classes}, /*requires_grad=*/true);
  net.dec_b->name = "dec.b";
  return net;
}

namespace {

TensorPtr conv_forward(ComputeGraph& g, const TensorPtr& x,
                       const ConvLayer& layer) {
  const int h = x->dim(0), w = x->dim(1), c = x->dim(2);
  check(c == layer.in_c, "encoder: channel mismatch");
  int oh = 0, ow = 0;
  const IndexTablePtr idx =
      im2col_2d(h, w, c, layer.kh, layer.kw, layer.stride, layer.pad, &oh, &ow);
  const TensorPtr cols =
      g.gather(x, idx, {oh * ow, layer.kh * layer.kw * c});
  const TensorPtr y = g.add_rowvec(g.matmul(cols, layer.w), layer.b);
  return g.reshape(y, {oh, ow, layer.out_c});
}

}  // namespace

TensorPtr Network::forward(ComputeGraph& g, const TensorPtr& image,
                           StageCapture* capture) const {
  check(image->shape.size() == 3 && image->dim(0) == cfg.input_h &&
            image->dim(1) == cfg.input_w && image->dim(2) == cfg.input_channels,
        "forward: image shape " + shape_str(image->shape) + " does not match " +
            std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w) +
            "x" + std::to_string(cfg.input_channels));

  TensorPtr x = image;
  for (const auto& layer : encoder) x = g.relu(conv_forward(g, x, layer));
  if (capture) capture->encoder_out = x;

  if (cfg.use_resa) x = resa_forward(g, x, cfg.resa, resa);
  if (capture) capture->resa_out = x;

  const int dh = cfg.down_h(), dw = cfg.down_w();
  if (has_learned_pe() || has_sinusoidal_pe()) x = apply_absolute(g, x, pe);
  if (has_attention()) {
    const AttnCoords coords = AttnCoords::grid(dh, dw);
    const TensorPtr flat = flatten_map(g, x);
    const TensorPtr z = attention_forward(g, flat, attn, &coords);
    x = unflatten_map(g, g.add(flat, z), dh, dw);
  }
  if (capture)
    capture->pos_out = cfg.variant == Variant::baseline ? nullptr : x;

  for (int s = 0; s < cfg.stages(); ++s) x = g.bilinear_upsample_2x(x);
  if (capture) capture->decoder_feat = x;

  const TensorPtr flat = g.reshape(
      x, {cfg.input_h * cfg.input_w, cfg.feat_channels()});
  const TensorPtr logits = g.add_rowvec(g.matmul(flat, dec_w), dec_b);
  return g.reshape(logits, {cfg.input_h, cfg.input_w, cfg.num_lane_classes});
}

LaneLabel lanes_from_classes(const std::vector<int>& classes, int h, int w,
                             int num_classes,
                             const std::vector<int>& h_samples) {
  check(static_cast<std::int64_t>(classes.size()) ==
            static_cast<std::int64_t>(h) * w,
        "lanes_from_classes: class map size mismatch");
  LaneLabel label;
  label.h_samples = h_samples;
  for (int k = 1; k < num_classes; ++k) {
    std::vector<int> xs;
    xs.reserve(h_samples.size());
    for (int r : h_samples) {
      if (r < 0 || r >= h) {
        xs.push_back(LaneLabel::kMissing);
        continue;
      }
      long long sum = 0, count = 0;
      for (int c = 0; c < w; ++c)
        if (classes[static_cast<std::size_t>(r) * w + c] == k) {
          sum += c;
          ++count;
        }
      xs.push_back(count == 0 ? LaneLabel::kMissing
                              : static_cast<int>(std::llround(
                                    static_cast<double>(sum) /
                                    static_cast<double>(count))));
    }
    label.lanes.push_back(std::move(xs));
  }
  return label;
}

LaneLabel predict_lanes(const Network& net, const TensorPtr& image,
                        const std::vector<int>& h_samples) {
  ComputeGraph g(/*recording=*/false);
  const TensorPtr logits = net.forward(g, image);
  const int h = net.cfg.input_h, w = net.cfg.input_w,
            nc = net.cfg.num_lane_classes;
  std::vector<int> cls(static_cast<std::size_t>(h) * w, 0);
  for (int p = 0; p < h * w; ++p) {
    const double* row = logits->data.data() + static_cast<std::size_t>(p) * nc;
    int best = 0;
    for (int c = 1; c < nc; ++c)
      if (row[c] > row[best]) best = c;
    cls[static_cast<std::size_t>(p)] = best;
  }
  return lanes_from_classes(cls, h, w, nc, h_samples);
}

TrainState make_train_state(const NetworkConfig& cfg) {
  TrainState state;
  state.net = build_network(cfg);
  for (const auto& p : state.net.parameters())
    state.momenta.push_back(Tensor::zeros(p->shape));
  // distinct stream from parameter init
  state.rng = SeededRng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  return state;
}

double train_step(TrainState& state, const std::vector<const Sample*>& batch) {
  check(!batch.empty(), "train_step: empty batch");
  const auto& cfg = state.net.cfg;
  const int pixels = cfg.input_h * cfg.input_w;
  for (const Sample* s : batch) {
    check(s && s->image, "train_step: null sample");
    if (static_cast<int>(s->mask.size()) != pixels)
      throw DataError("train_step: mask has " + std::to_string(s->mask.size()) +
                      " pixels, expected " + std::to_string(pixels));
    for (int c : s->mask)
      if (c < 0 || c >= cfg.num_lane_classes)
        throw DataError("train_step: mask class " + std::to_string(c) +
                        " out of range [0, " +
                        std::to_string(cfg.num_lane_classes) + ")");
  }

  const auto params = state.net.parameters();
  for (const auto& p : params) p->zero_grad();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Sample* s : batch) {
    ComputeGraph g;
    const TensorPtr logits = state.net.forward(g, s->image);
    const TensorPtr flat =
        g.reshape(logits, {pixels, cfg.num_lane_classes});
    const TensorPtr loss = g.softmax_cross_entropy(flat, s->mask);
    const TensorPtr scaled = g.scale(loss, inv_b);
    g.backward(scaled);
    total += loss->data[0];
  }
  const double mean_loss = total * inv_b;
  if (!std::isfinite(mean_loss))
    throw std::runtime_error("train_step: loss is not finite");

  const auto& K = kernels::ops();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = *state.momenta[i];
    K.scale(v.data.data(), v.data.data(), cfg.momentum, v.data.size());
    K.axpy(v.data.data(), 1.0, p.grad.data(), v.data.size());
    K.axpy(p.data.data(), -cfg.lr, v.data.data(), p.data.size());
  }
  return mean_loss;
}

double train_epoch(TrainState& state, const std::vector<Sample>& data) {
  check(!data.empty(), "train_epoch: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the state rng keeps the visit order reproducible
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        state.rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t bs = static_cast<std::size_t>(state.net.cfg.batch_size);
  double weighted = 0.0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::vector<const Sample*> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
    weighted += train_step(state, batch) * static_cast<double>(batch.size());
  }
  ++state.epoch;
  return weighted / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[8] = {'L', 'A', 'N', 'E', 'P', 'E', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw DataError("checkpoint: truncated string");
  return s;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw DataError("checkpoint: truncated tensor data");
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);

  const auto& cfg = state.net.cfg;
  write_pod<std::int32_t>(out, cfg.input_h);
  write_pod<std::int32_t>(out, cfg.input_w);
  write_pod<std::int32_t>(out, cfg.input_channels);
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(cfg.encoder_channels.size()));
  for (int c : cfg.encoder_channels) write_pod<std::int32_t>(out, c);
  write_pod<std::uint8_t>(out, cfg.use_resa ? 1 : 0);
  write_pod<std::int32_t>(out, cfg.resa.iterations);
  write_pod<std::int32_t>(out, cfg.resa.conv_kernel_width);
  write_pod<std::uint8_t>(out, cfg.resa.share_weights_per_direction ? 1 : 0);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.variant));
  write_pod<std::int32_t>(out, cfg.num_lane_classes);
  write_pod<std::uint64_t>(out, cfg.seed);
  write_pod<double>(out, cfg.lr);
  write_pod<std::int32_t>(out, cfg.epochs);
  write_pod<std::int32_t>(out, cfg.batch_size);
  write_pod<double>(out, cfg.momentum);

  write_pod<std::int32_t>(out, state.epoch);
  write_string(out, state.rng.serialize());

  const auto params = state.net.parameters();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    write_string(out, p.name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) write_pod<std::int32_t>(out, d);
    write_doubles(out, p.data);
    write_doubles(out, state.momenta[i]->data);
  }
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));

  NetworkConfig cfg;
  cfg.input_h = read_pod<std::int32_t>(in);
  cfg.input_w = read_pod<std::int32_t>(in);
  cfg.input_channels = read_pod<std::int32_t>(in);
  cfg.encoder_channels.clear();
  const auto n_enc = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_enc; ++i)
    cfg.encoder_channels.push_back(read_pod<std::int32_t>(in));
  cfg.use_resa = read_pod<std::uint8_t>(in) != 0;
  cfg.resa.iterations = read_pod<std::int32_t>(in);
  cfg.resa.conv_kernel_width = read_pod<std::int32_t>(in);
  cfg.resa.share_weights_per_direction = read_pod<std::uint8_t>(in) != 0;
  cfg.variant = static_cast<Variant>(read_pod<std::uint8_t>(in));
  cfg.num_lane_classes = read_pod<std::int32_t>(in);
  cfg.seed = read_pod<std::uint64_t>(in);
  cfg.lr = read_pod<double>(in);
  cfg.epochs = read_pod<std::int32_t>(in);
  cfg.batch_size = read_pod<std::int32_t>(in);
  cfg.momentum = read_pod<double>(in);

  TrainState state = make_train_state(cfg);
  state.epoch = read_pod<std::int32_t>(in);
  state.rng.restore(read_string(in));

  const auto params = state.net.parameters();
  const auto count = read_pod<std::uint32_t>(in);
  if (count != params.size())
    throw DataError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const std::string name = read_string(in);
    if (name != p.name)
      throw DataError("checkpoint: parameter '" + name + "' where '" +
                      p.name + "' was expected");
    const auto ndim = read_pod<std::uint32_t>(in);
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(read_pod<std::int32_t>(in));
    if (shape != p.shape)
      throw DataError("checkpoint: shape mismatch for '" + name + "'");
    read_doubles(in, p.data);
    read_doubles(in, state.momenta[i]->data);
  }
  return state;
}

}  // namespace lanepe
