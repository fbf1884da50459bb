#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "alien/error.hpp"
#include "alien/io.hpp"
#include "alien/rng.hpp"
#include "alien/tensor.hpp"

namespace alien {

inline constexpr double kLeakyAlpha = 0.1;
inline constexpr double kDropoutRate = 0.1;
inline constexpr int kOutputCount = 45;  // 5 anchors x 9 inferences

enum class LayerKind { conv, maxpool, dropout };

struct LayerDesc {
  LayerKind kind;
  int k = 0;          // conv kernel size
  int channels = 0;   // conv output channels
  bool leaky = true;  // conv followed by leaky ReLU
  double rate = 0.0;  // dropout rate
};

struct Shape3 {
  int h = 0, w = 0, c = 0;
  bool operator==(const Shape3&) const = default;
};

// Ordered layer stack. A sigmoid closes the model and owns the final row of
// the shape trace.
struct ArchSpec {
  Shape3 input;
  std::vector<LayerDesc> layers;

  static LayerDesc conv(int k, int channels, bool leaky = true) {
    return {LayerKind::conv, k, channels, leaky, 0.0};
  }
  static LayerDesc pool() { return {LayerKind::maxpool, 0, 0, false, 0.0}; }
  static LayerDesc drop(double rate = kDropoutRate) {
    return {LayerKind::dropout, 0, 0, false, rate};
  }

  // The production stack: 14 convolutions, 4 max-pools, 3 dropouts and a
  // sigmoid, mapping an 80x80x3 chip to 45 outputs.
  static ArchSpec table1() {
    ArchSpec a;
    a.input = {80, 80, 3};
    a.layers = {
        conv(3, 16), conv(3, 16), pool(),
        conv(5, 16), conv(3, 16), conv(5, 16), pool(),
        conv(3, 32), conv(5, 32), pool(),
        conv(3, 32), pool(),
        conv(1, 256), drop(),
        conv(1, 256), drop(),
        conv(1, 256), drop(),
        conv(1, 256), conv(1, 256),
        conv(1, kOutputCount, /*leaky=*/false),
    };
    return a;
  }

  // Width-reduced stack (8 base channels, 16x16 chips, same layer kinds)
  // used where finite-difference verification over every parameter must stay
  // cheap.
  static ArchSpec reduced() {
    ArchSpec a;
    a.input = {16, 16, 3};
    a.layers = {
        conv(3, 8), conv(5, 8), pool(),
        conv(5, 8),
        conv(1, 32), drop(),
        conv(1, 32),
        conv(1, kOutputCount, /*leaky=*/false),
    };
    return a;
  }

  // Output shape after every layer plus the closing sigmoid row.
  std::vector<Shape3> shape_trace() const {
    std::vector<Shape3> trace;
    Shape3 s = input;
    for (const LayerDesc& l : layers) {
      switch (l.kind) {
        case LayerKind::conv:
          s = {s.h - l.k + 1, s.w - l.k + 1, l.channels};
          break;
        case LayerKind::maxpool:
          s = {s.h / 2, s.w / 2, s.c};
          break;
        case LayerKind::dropout:
          break;
      }
      trace.push_back(s);
    }
    trace.push_back(s);  // sigmoid preserves shape
    return trace;
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    int c = input.c;
    for (const LayerDesc& l : layers) {
      if (l.kind != LayerKind::conv) continue;
      total += static_cast<std::size_t>(l.k) * l.k * c * l.channels + l.channels;
      c = l.channels;
    }
    return total;
  }

  int output_count() const {
    const Shape3 s = shape_trace().back();
    return s.h * s.w * s.c;
  }
};

template <typename T>
struct ModelT {
  ArchSpec arch;
  std::vector<ConvParamsT<T>> params;  // one entry per conv layer, in order

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.parameter_count();
    return n;
  }

  template <typename U>
  ModelT<U> cast() const {
    ModelT<U> out;
    out.arch = arch;
    out.params.reserve(params.size());
    for (const auto& p : params) {
      ConvParamsT<U> q;
      q.k = p.k;
      q.c_in = p.c_in;
      q.c_out = p.c_out;
      q.kernels.assign(p.kernels.begin(), p.kernels.end());
      q.bias.assign(p.bias.begin(), p.bias.end());
      out.params.push_back(std::move(q));
    }
    return out;
  }
};

using Model = ModelT<float>;

// He-style initialization: kernels ~ N(0, 2/(k*k*c_in)), biases zero.
// Identical seeds produce identical parameters.
template <typename T = float>
ModelT<T> build_model(const ArchSpec& arch, std::uint64_t seed) {
  ModelT<T> m;
  m.arch = arch;
  Rng rng(mix_seed(seed, 0x1417));
  int c = arch.input.c;
  for (const LayerDesc& l : arch.layers) {
    if (l.kind != LayerKind::conv) continue;
    ConvParamsT<T> p = ConvParamsT<T>::zeros(l.k, c, l.channels);
    const double stddev = std::sqrt(2.0 / (static_cast<double>(l.k) * l.k * c));
    for (T& w : p.kernels) w = static_cast<T>(rng.normal() * stddev);
    m.params.push_back(std::move(p));
    c = l.channels;
  }
  return m;
}

inline Model build_alien(std::uint64_t seed) {
  return build_model<float>(ArchSpec::table1(), seed);
}

// Saved intermediates from a train-mode forward pass, consumed by
// backward_chip. Tapes are per-call state, so chips can run forward/backward
// concurrently against the same read-only model.
template <typename T>
struct TapeT {
  bool valid = false;
  std::vector<TensorT<T>> conv_inputs;
  std::vector<TensorT<T>> conv_preact;     // pre-activation of leaky convs
  std::vector<std::vector<int>> pool_argmax;
  std::vector<Shape3> pool_in_shapes;
  std::vector<std::vector<T>> dropout_masks;
  TensorT<T> output;  // post-sigmoid
};

using Tape = TapeT<float>;

// Runs the stack on one chip (values normalized to [0, 1]). Train mode draws
// dropout masks from dropout_seed and, when a tape is supplied, records the
// intermediates for the backward pass. Infer mode is a deterministic pure
// function of (params, chip).
template <typename T>
TensorT<T> forward_chip(const ModelT<T>& model, const TensorT<T>& chip, RunMode mode,
                        TapeT<T>* tape = nullptr, std::uint64_t dropout_seed = 0) {
  const ArchSpec& arch = model.arch;
  if (chip.height != arch.input.h || chip.width != arch.input.w ||
      chip.channels != arch.input.c)
    fail(Errc::shape_mismatch, "chip shape does not match the model input");
  if (tape) {
    *tape = TapeT<T>{};
    tape->valid = true;
  }
  TensorT<T> x = chip;
  std::size_t conv_idx = 0, drop_idx = 0;
  for (const LayerDesc& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        const ConvParamsT<T>& p = model.params[conv_idx++];
        if (tape) tape->conv_inputs.push_back(x);
        TensorT<T> pre = conv2d_valid(x, p);
        if (l.leaky) {
          if (tape) tape->conv_preact.push_back(pre);
          x = leaky_relu(pre, kLeakyAlpha);
        } else {
          if (tape) tape->conv_preact.push_back(TensorT<T>{});
          x = std::move(pre);
        }
        break;
      }
      case LayerKind::maxpool: {
        std::vector<int> argmax;
        const Shape3 in_shape{x.height, x.width, x.channels};
        x = maxpool2(x, tape ? &argmax : nullptr);
        if (tape) {
          tape->pool_argmax.push_back(std::move(argmax));
          tape->pool_in_shapes.push_back(in_shape);
        }
        break;
      }
      case LayerKind::dropout: {
        Rng rng(mix_seed(dropout_seed, 0xD0 + drop_idx));
        ++drop_idx;
        std::vector<T> mask;
        x = dropout(x, l.rate, mode, rng, tape ? &mask : nullptr);
        if (tape) tape->dropout_masks.push_back(std::move(mask));
        break;
      }
    }
  }
  x = sigmoid(x);
  if (tape) tape->output = x;
  return x;
}

template <typename T>
struct GradsT {
  std::vector<ConvParamsT<T>> layers;
  TensorT<T> input;
};

using Grads = GradsT<float>;

// Reverse traversal of the layer stack. Requires the tape of the matching
// train-mode forward pass.
template <typename T>
GradsT<T> backward_chip(const ModelT<T>& model, const TapeT<T>& tape,
                        std::span<const T> dout) {
  if (!tape.valid) fail(Errc::no_forward_state, "backward without a forward tape");
  if (dout.size() != tape.output.size())
    fail(Errc::shape_mismatch, "output gradient length mismatch");

  GradsT<T> grads;
  grads.layers.resize(model.params.size());

  TensorT<T> d = tape.output;  // shape carrier
  d.values.assign(dout.begin(), dout.end());
  d = sigmoid_backward(tape.output, d);

  std::size_t conv_idx = model.params.size();
  std::size_t pool_idx = tape.pool_argmax.size();
  std::size_t drop_idx = tape.dropout_masks.size();
  for (auto it = model.arch.layers.rbegin(); it != model.arch.layers.rend(); ++it) {
    switch (it->kind) {
      case LayerKind::conv: {
        --conv_idx;
        if (it->leaky)
          d = leaky_relu_backward(tape.conv_preact[conv_idx], d, kLeakyAlpha);
        ConvGradsT<T> g =
            conv2d_backward(tape.conv_inputs[conv_idx], model.params[conv_idx], d);
        grads.layers[conv_idx] = std::move(g.params);
        d = std::move(g.input);
        break;
      }
      case LayerKind::maxpool: {
        --pool_idx;
        const Shape3 s = tape.pool_in_shapes[pool_idx];
        d = maxpool2_backward(tape.pool_argmax[pool_idx], d, s.h, s.w);
        break;
      }
      case LayerKind::dropout: {
        --drop_idx;
        d = dropout_backward(tape.dropout_masks[drop_idx], d);
        break;
      }
    }
  }
  grads.input = std::move(d);
  return grads;
}

// ---------------------------------------------------------------------------
// Weight persistence. Binary, versioned by the magic string, little-endian
// 32-bit throughout: magic "ALIEN001", layer count, then per conv layer
// (k, c_in, c_out, kernels in (a, b, c_in, c_out) order, biases). Round-trips
// are bit-exact.

inline constexpr char kWeightsMagic[8] = {'A', 'L', 'I', 'E', 'N', '0', '0', '1'};

namespace detail {

struct ByteWriter {
  std::string buf;
  void raw(const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void floats(const std::vector<float>& v) {
    raw(v.data(), v.size() * sizeof(float));
  }
};

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string name;

  void raw(void* p, std::size_t n) {
    if (pos + n > buf.size())
      fail(Errc::truncated_file, name + ": unexpected end of file");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  void floats(std::vector<float>& v) {
    raw(v.data(), v.size() * sizeof(float));
  }
};

}  // namespace detail

inline void save_weights(const Model& model, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kWeightsMagic, sizeof(kWeightsMagic));
  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const ConvParams& p : model.params) {
    w.u32(static_cast<std::uint32_t>(p.k));
    w.u32(static_cast<std::uint32_t>(p.c_in));
    w.u32(static_cast<std::uint32_t>(p.c_out));
    w.floats(p.kernels);
    w.floats(p.bias);
  }
  atomic_write(path, w.buf);
}

// Loads weights saved by save_weights; arch supplies the expected layer
// stack and is validated against the stored shapes.
inline Model load_weights(const std::filesystem::path& path,
                          const ArchSpec& arch = ArchSpec::table1()) {
  const std::string raw = read_file(path);
  detail::ByteReader r{raw, 0, path.string()};
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0)
    fail(Errc::bad_magic, path.string() + ": not a weights file");

  Model m;
  m.arch = arch;
  const std::uint32_t n_layers = r.u32();
  std::size_t expected_convs = 0;
  for (const LayerDesc& l : arch.layers)
    if (l.kind == LayerKind::conv) ++expected_convs;
  if (n_layers != expected_convs)
    fail(Errc::shape_mismatch, path.string() + ": layer count does not match arch");

  int c = arch.input.c;
  std::size_t conv_i = 0;
  for (const LayerDesc& l : arch.layers) {
    if (l.kind != LayerKind::conv) continue;
    const std::uint32_t k = r.u32();
    const std::uint32_t c_in = r.u32();
    const std::uint32_t c_out = r.u32();
    if (k != static_cast<std::uint32_t>(l.k) ||
        c_in != static_cast<std::uint32_t>(c) ||
        c_out != static_cast<std::uint32_t>(l.channels))
      fail(Errc::shape_mismatch,
           path.string() + ": layer " + std::to_string(conv_i) + " shape mismatch");
    ConvParams p = ConvParams::zeros(static_cast<int>(k), static_cast<int>(c_in),
                                     static_cast<int>(c_out));
    r.floats(p.kernels);
    r.floats(p.bias);
    m.params.push_back(std::move(p));
    c = l.channels;
    ++conv_i;
  }
  return m;
}

}  // namespace alien
