#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "alien/error.hpp"
#include "alien/io.hpp"
#include "alien/loss.hpp"
#include "alien/model.hpp"
#include "alien/rng.hpp"
#include "alien/scene.hpp"

namespace alien {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossWeights weights = LossWeights::ones();
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // epochs between checkpoints; 0 disables
  std::string checkpoint_path;  // prefix for checkpoint files
  bool augment = false;         // right-angle rotations/flips with co-rotated truth
  int threads = 1;              // per-batch chip parallelism (advisory)
  ArchSpec arch = ArchSpec::table1();

  void validate() const {
    if (epochs < 0) fail(Errc::bad_config, "epochs must be >= 0");
    if (batch_size < 1) fail(Errc::bad_config, "batch_size must be >= 1");
    if (!(learning_rate > 0)) fail(Errc::bad_config, "learning_rate must be > 0");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      fail(Errc::bad_config, "adam betas must lie in (0, 1)");
    if (!(epsilon > 0)) fail(Errc::bad_config, "adam epsilon must be > 0");
    weights.validate();
  }
};

struct EpochRecord {
  double mean_loss = 0;
  std::array<double, kFeaturesPerAnchor> per_feature{};
  double wall_seconds = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// Adam first/second moment accumulators, one pair per conv layer.
struct AdamState {
  std::vector<ConvParams> m;
  std::vector<ConvParams> v;
  std::int64_t step = 0;

  static AdamState init(const Model& model) {
    AdamState s;
    for (const ConvParams& p : model.params) {
      s.m.push_back(ConvParams::zeros(p.k, p.c_in, p.c_out));
      s.v.push_back(ConvParams::zeros(p.k, p.c_in, p.c_out));
    }
    return s;
  }
};

namespace detail {

inline void adam_update(std::vector<float>& param, const std::vector<float>& grad,
                        std::vector<float>& m, std::vector<float>& v,
                        double lr_t, double beta1, double beta2, double eps) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * g;
    const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    param[i] -= static_cast<float>(lr_t * mi / (std::sqrt(vi) + eps));
  }
}

}  // namespace detail

// Standard Adam with bias correction folded into the step size.
inline void adam_step(Model& model, const Grads& grads, AdamState& state,
                      const TrainConfig& cfg) {
  if (grads.layers.size() != model.params.size())
    fail(Errc::shape_mismatch, "gradient/parameter layer count mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double lr_t = cfg.learning_rate *
                      std::sqrt(1.0 - std::pow(cfg.beta2, t)) /
                      (1.0 - std::pow(cfg.beta1, t));
  for (std::size_t l = 0; l < model.params.size(); ++l) {
    if (grads.layers[l].kernels.size() != model.params[l].kernels.size())
      fail(Errc::shape_mismatch, "gradient shape mismatch at layer " + std::to_string(l));
    detail::adam_update(model.params[l].kernels, grads.layers[l].kernels,
                        state.m[l].kernels, state.v[l].kernels, lr_t, cfg.beta1,
                        cfg.beta2, cfg.epsilon);
    detail::adam_update(model.params[l].bias, grads.layers[l].bias, state.m[l].bias,
                        state.v[l].bias, lr_t, cfg.beta1, cfg.beta2, cfg.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Optimizer checkpoint sidecar: same binary layout rules as the weights file,
// magic "ALIENOPT". Stores the step count, completed epochs and the moment
// accumulators so a resumed run continues bit-for-bit.

inline constexpr char kOptimizerMagic[8] = {'A', 'L', 'I', 'E', 'N', 'O', 'P', 'T'};

inline void save_optimizer(const AdamState& state, int completed_epochs,
                           const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kOptimizerMagic, sizeof(kOptimizerMagic));
  w.u32(static_cast<std::uint32_t>(state.m.size()));
  w.u32(static_cast<std::uint32_t>(state.step));
  w.u32(static_cast<std::uint32_t>(completed_epochs));
  for (std::size_t l = 0; l < state.m.size(); ++l) {
    w.u32(static_cast<std::uint32_t>(state.m[l].k));
    w.u32(static_cast<std::uint32_t>(state.m[l].c_in));
    w.u32(static_cast<std::uint32_t>(state.m[l].c_out));
    w.floats(state.m[l].kernels);
    w.floats(state.m[l].bias);
    w.floats(state.v[l].kernels);
    w.floats(state.v[l].bias);
  }
  atomic_write(path, w.buf);
}

struct OptimizerCheckpoint {
  AdamState state;
  int completed_epochs = 0;
};

inline OptimizerCheckpoint load_optimizer(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  detail::ByteReader r{raw, 0, path.string()};
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kOptimizerMagic, sizeof(magic)) != 0)
    fail(Errc::bad_magic, path.string() + ": not an optimizer state file");
  OptimizerCheckpoint out;
  const std::uint32_t layers = r.u32();
  out.state.step = r.u32();
  out.completed_epochs = static_cast<int>(r.u32());
  for (std::uint32_t l = 0; l < layers; ++l) {
    const int k = static_cast<int>(r.u32());
    const int c_in = static_cast<int>(r.u32());
    const int c_out = static_cast<int>(r.u32());
    ConvParams m = ConvParams::zeros(k, c_in, c_out);
    ConvParams v = ConvParams::zeros(k, c_in, c_out);
    r.floats(m.kernels);
    r.floats(m.bias);
    r.floats(v.kernels);
    r.floats(v.bias);
    out.state.m.push_back(std::move(m));
    out.state.v.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation: right-angle rotations and horizontal flips of a chip with
// co-transformed truth. Raster rotation about the pixel grid center lands
// anchors one pixel left of their permuted counterparts (even-sized grid),
// hence the constant offset correction below.

namespace detail {

inline Tensor rot90cw(const Tensor& in) {
  Tensor out = Tensor::zeros(in.width, in.height, in.channels);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j)
      for (int c = 0; c < in.channels; ++c)
        out.at(i, j, c) = in.at(in.height - 1 - j, i, c);
  return out;
}

inline Tensor flip_h(const Tensor& in) {
  Tensor out = in;
  for (int i = 0; i < in.height; ++i)
    for (int j = 0; j < in.width; ++j)
      for (int c = 0; c < in.channels; ++c)
        out.at(i, j, c) = in.at(i, in.width - 1 - j, c);
  return out;
}

// new_block[perm[n]] = old_block[n]
inline void permute_truth(TruthVector& t, const std::array<int, 5>& perm, int m) {
  TruthVector out = t;
  for (int n = 0; n < 5; ++n) {
    for (int f = 0; f < m; ++f)
      out.values[static_cast<std::size_t>(perm[n]) * m + f] =
          t.values[static_cast<std::size_t>(n) * m + f];
    out.mask[perm[n]] = t.mask[n];
  }
  t = std::move(out);
}

inline void rot90_truth(TruthVector& t, const AnchorLayout& layout) {
  const int m = t.features_per_anchor();
  permute_truth(t, {1, 4, 2, 0, 3}, m);
  const double radius = layout.offset_radius;
  for (int n = 0; n < t.anchor_count(); ++n) {
    double* b = t.values.data() + static_cast<std::size_t>(n) * m;
    if (b[0] != 1.0) continue;
    const double dx = decode_offset(b[1], radius);
    const double dy = decode_offset(b[2], radius);
    b[1] = encode_offset(-dy - 1.0, radius);  // -1: pixel-grid rotation shift
    b[2] = encode_offset(dx, radius);
    const double os = b[7], oc = b[8];
    b[7] = oc;        // sin(a+90) = cos(a)
    b[8] = 1.0 - os;  // cos(a+90) = -sin(a)
  }
}

inline void flip_truth(TruthVector& t, const AnchorLayout& layout) {
  const int m = t.features_per_anchor();
  permute_truth(t, {1, 0, 2, 4, 3}, m);
  const double radius = layout.offset_radius;
  for (int n = 0; n < t.anchor_count(); ++n) {
    double* b = t.values.data() + static_cast<std::size_t>(n) * m;
    if (b[0] != 1.0) continue;
    const double dx = decode_offset(b[1], radius);
    b[1] = encode_offset(-dx - 1.0, radius);
    b[7] = 1.0 - b[7];  // sin(-a) = -sin(a), cos unchanged
  }
}

}  // namespace detail

// Applies quarter-turn clockwise rotations then an optional horizontal flip
// to both raster and encoded truth.
inline void augment_chip_sample(ChipSample& sample, int quarter_turns, bool flip,
                                const AnchorLayout& layout) {
  for (int r = 0; r < (quarter_turns & 3); ++r) {
    sample.chip = detail::rot90cw(sample.chip);
    detail::rot90_truth(sample.truth, layout);
  }
  if (flip) {
    sample.chip = detail::flip_h(sample.chip);
    detail::flip_truth(sample.truth, layout);
  }
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainResult {
  Model model;
  TrainHistory history;
};

namespace detail {

struct ChipResult {
  Grads grads;
  LossBreakdown loss;
};

inline ChipResult chip_pass(const Model& model, const ChipSample& sample,
                            const LossWeights& weights, std::uint64_t dropout_seed) {
  TapeT<float> tape;
  const Tensor out = forward_chip(model, sample.chip, RunMode::train, &tape, dropout_seed);
  ChipResult r;
  r.loss = eval_loss<float>(out.values, sample.truth, weights);
  const std::vector<float> dout = loss_gradient<float>(out.values, sample.truth, weights);
  r.grads = backward_chip(model, tape, std::span<const float>(dout));
  return r;
}

// Accumulates src into dst (dst += src * scale), layer by layer.
inline void accumulate_grads(Grads& dst, const Grads& src, float scale) {
  if (dst.layers.empty()) {
    dst = src;
    for (auto& l : dst.layers) {
      for (float& g : l.kernels) g *= scale;
      for (float& g : l.bias) g *= scale;
    }
    return;
  }
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    for (std::size_t i = 0; i < dst.layers[l].kernels.size(); ++i)
      dst.layers[l].kernels[i] += src.layers[l].kernels[i] * scale;
    for (std::size_t i = 0; i < dst.layers[l].bias.size(); ++i)
      dst.layers[l].bias[i] += src.layers[l].bias[i] * scale;
  }
}

}  // namespace detail

// Continues training from a model + optimizer state; completed_epochs names
// the first epoch index to run. Per-epoch shuffles and per-chip dropout masks
// are derived from (seed, epoch, step, slot), never from a sequential stream,
// so a resumed run reproduces the uninterrupted one bit-for-bit. Per-batch
// chip passes may run on several threads; gradients are reduced in chip
// order, which keeps the result independent of the thread count.
inline TrainResult train_resume(Model model, AdamState state, int completed_epochs,
                                const std::vector<ChipSample>& dataset,
                                const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) fail(Errc::bad_config, "training dataset is empty");
  const AnchorLayout layout = build_layout();

  TrainHistory history;
  std::vector<std::size_t> order(dataset.size());
  std::int64_t global_step = state.step;

  for (int epoch = completed_epochs; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5f, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0;
    std::array<double, kFeaturesPerAnchor> epoch_feature{};

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<detail::ChipResult> results(count);

      auto run_slot = [&](std::size_t slot) {
        const ChipSample* sample = &dataset[order[start + slot]];
        ChipSample augmented;
        const std::uint64_t chip_seed =
            mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch),
                     static_cast<std::uint64_t>(global_step),
                     static_cast<std::uint64_t>(slot));
        if (cfg.augment) {
          Rng aug_rng(mix_seed(chip_seed, 0xA46));
          augmented = *sample;
          augment_chip_sample(augmented, static_cast<int>(aug_rng.below(4)),
                              aug_rng.below(2) != 0, layout);
          sample = &augmented;
        }
        results[slot] = detail::chip_pass(model, *sample, cfg.weights, chip_seed);
      };

      const int workers = std::min<int>(std::max(1, cfg.threads), static_cast<int>(count));
      if (workers <= 1) {
        for (std::size_t slot = 0; slot < count; ++slot) run_slot(slot);
      } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < workers; ++w)
          pool.emplace_back([&] {
            for (std::size_t slot = next.fetch_add(1); slot < count;
                 slot = next.fetch_add(1))
              run_slot(slot);
          });
        for (std::thread& th : pool) th.join();
      }

      // Reduce in slot order: batch-mean gradient.
      Grads batch;
      const float inv = 1.0f / static_cast<float>(count);
      double batch_loss = 0;
      for (std::size_t slot = 0; slot < count; ++slot) {
        detail::accumulate_grads(batch, results[slot].grads, inv);
        batch_loss += results[slot].loss.total;
        epoch_loss += results[slot].loss.total;
        for (int f = 0; f < kFeaturesPerAnchor; ++f)
          epoch_feature[f] += results[slot].loss.per_feature[f];
      }
      if (std::isnan(batch_loss))
        fail(Errc::diverged, "NaN batch loss at epoch " + std::to_string(epoch));
      adam_step(model, batch, state, cfg);
      ++global_step;
    }

    EpochRecord rec;
    rec.mean_loss = epoch_loss / static_cast<double>(dataset.size());
    for (int f = 0; f < kFeaturesPerAnchor; ++f)
      rec.per_feature[f] = epoch_feature[f] / static_cast<double>(dataset.size());
    rec.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - epoch_start)
                           .count();
    history.epochs.push_back(rec);

    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
        (epoch + 1) % cfg.checkpoint_interval == 0) {
      const std::string base =
          cfg.checkpoint_path + ".epoch" + std::to_string(epoch + 1);
      save_weights(model, base + ".weights");
      save_optimizer(state, epoch + 1, base + ".opt");
    }
  }
  return {std::move(model), std::move(history)};
}

// Fresh training run: builds the model from cfg.seed and runs every epoch.
inline TrainResult train(const std::vector<ChipSample>& dataset, const TrainConfig& cfg) {
  cfg.validate();
  Model model = build_model<float>(cfg.arch, cfg.seed);
  AdamState state = AdamState::init(model);
  return train_resume(std::move(model), std::move(state), 0, dataset, cfg);
}

}  // namespace alien
