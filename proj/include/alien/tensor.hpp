#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alien/error.hpp"
#include "alien/rng.hpp"

namespace alien {

enum class RunMode { train, infer };

// Dense (height, width, channels) tensor, row-major with channels last.
// Scalar type is a template parameter: float is the production type, the
// double instantiation backs finite-difference verification.
template <typename T>
struct TensorT {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> values;

  static TensorT zeros(int h, int w, int c) {
    TensorT t;
    t.height = h;
    t.width = w;
    t.channels = c;
    t.values.assign(static_cast<std::size_t>(h) * w * c, T(0));
    return t;
  }

  T& at(int i, int j, int k) {
    return values[(static_cast<std::size_t>(i) * width + j) * channels + k];
  }
  const T& at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(i) * width + j) * channels + k];
  }
  std::size_t size() const { return values.size(); }
  bool same_shape(const TensorT& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

using Tensor = TensorT<float>;

// Square-kernel convolution parameters, kernels laid out (a, b, c_in, c_out)
// so the output-channel loop is contiguous.
template <typename T>
struct ConvParamsT {
  int k = 0;
  int c_in = 0;
  int c_out = 0;
  std::vector<T> kernels;  // k * k * c_in * c_out
  std::vector<T> bias;     // c_out

  static ConvParamsT zeros(int k, int c_in, int c_out) {
    ConvParamsT p;
    p.k = k;
    p.c_in = c_in;
    p.c_out = c_out;
    p.kernels.assign(static_cast<std::size_t>(k) * k * c_in * c_out, T(0));
    p.bias.assign(c_out, T(0));
    return p;
  }

  std::size_t parameter_count() const { return kernels.size() + bias.size(); }
};

using ConvParams = ConvParamsT<float>;

// Valid-padding convolution: output (H-k+1, W-k+1, c_out).
template <typename T>
TensorT<T> conv2d_valid(const TensorT<T>& input, const ConvParamsT<T>& p) {
  if (input.channels != p.c_in)
    fail(Errc::shape_mismatch, "conv input channels " + std::to_string(input.channels) +
                                   " != kernel c_in " + std::to_string(p.c_in));
  if (input.height < p.k || input.width < p.k)
    fail(Errc::shape_mismatch, "conv input smaller than kernel");
  const int oh = input.height - p.k + 1;
  const int ow = input.width - p.k + 1;
  TensorT<T> out = TensorT<T>::zeros(oh, ow, p.c_out);
  const int cin = p.c_in, cout = p.c_out, k = p.k;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      T* op = &out.at(i, j, 0);
      for (int o = 0; o < cout; ++o) op[o] = p.bias[o];
      for (int a = 0; a < k; ++a) {
        const T* row = &input.at(i + a, j, 0);
        const T* krow = p.kernels.data() + static_cast<std::size_t>(a) * k * cin * cout;
        for (int b = 0; b < k; ++b) {
          const T* px = row + static_cast<std::size_t>(b) * cin;
          const T* kk = krow + static_cast<std::size_t>(b) * cin * cout;
          for (int c = 0; c < cin; ++c) {
            const T x = px[c];
            const T* kr = kk + static_cast<std::size_t>(c) * cout;
            for (int o = 0; o < cout; ++o) op[o] += x * kr[o];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGradsT {
  TensorT<T> input;
  ConvParamsT<T> params;
};

// Gradients w.r.t. input, kernels and bias given the output gradient.
template <typename T>
ConvGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& p,
                              const TensorT<T>& dout) {
  const int oh = input.height - p.k + 1;
  const int ow = input.width - p.k + 1;
  if (dout.height != oh || dout.width != ow || dout.channels != p.c_out)
    fail(Errc::shape_mismatch, "conv backward gradient shape mismatch");
  ConvGradsT<T> g;
  g.input = TensorT<T>::zeros(input.height, input.width, input.channels);
  g.params = ConvParamsT<T>::zeros(p.k, p.c_in, p.c_out);
  const int cin = p.c_in, cout = p.c_out, k = p.k;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const T* dop = &dout.at(i, j, 0);
      for (int o = 0; o < cout; ++o) g.params.bias[o] += dop[o];
      for (int a = 0; a < k; ++a) {
        const T* irow = &input.at(i + a, j, 0);
        T* dirow = &g.input.at(i + a, j, 0);
        const std::size_t koff = static_cast<std::size_t>(a) * k * cin * cout;
        for (int b = 0; b < k; ++b) {
          const T* px = irow + static_cast<std::size_t>(b) * cin;
          T* dpx = dirow + static_cast<std::size_t>(b) * cin;
          const std::size_t kboff = koff + static_cast<std::size_t>(b) * cin * cout;
          for (int c = 0; c < cin; ++c) {
            const T x = px[c];
            const T* kr = p.kernels.data() + kboff + static_cast<std::size_t>(c) * cout;
            T* dkr = g.params.kernels.data() + kboff + static_cast<std::size_t>(c) * cout;
            T acc = T(0);
            for (int o = 0; o < cout; ++o) {
              const T d = dop[o];
              dkr[o] += x * d;
              acc += kr[o] * d;
            }
            dpx[c] += acc;
          }
        }
      }
    }
  }
  return g;
}

// 2x2 non-overlapping max pooling. argmax (flat input index per output
// element, first occurrence on ties) feeds the backward route.
template <typename T>
TensorT<T> maxpool2(const TensorT<T>& input, std::vector<int>* argmax = nullptr) {
  if (input.height % 2 != 0 || input.width % 2 != 0)
    fail(Errc::odd_dimension, "maxpool2 requires even spatial dimensions");
  const int oh = input.height / 2;
  const int ow = input.width / 2;
  TensorT<T> out = TensorT<T>::zeros(oh, ow, input.channels);
  if (argmax) argmax->assign(out.size(), 0);
  const int c = input.channels;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      for (int ch = 0; ch < c; ++ch) {
        T best = input.at(2 * i, 2 * j, ch);
        int best_idx = ((2 * i) * input.width + 2 * j) * c + ch;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            if (a == 0 && b == 0) continue;
            const T v = input.at(2 * i + a, 2 * j + b, ch);
            if (v > best) {
              best = v;
              best_idx = ((2 * i + a) * input.width + 2 * j + b) * c + ch;
            }
          }
        }
        out.at(i, j, ch) = best;
        if (argmax)
          (*argmax)[(static_cast<std::size_t>(i) * ow + j) * c + ch] = best_idx;
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> maxpool2_backward(const std::vector<int>& argmax, const TensorT<T>& dout,
                             int in_h, int in_w) {
  TensorT<T> din = TensorT<T>::zeros(in_h, in_w, dout.channels);
  for (std::size_t idx = 0; idx < dout.values.size(); ++idx)
    din.values[argmax[idx]] += dout.values[idx];
  return din;
}

// x > 0 ? x : alpha * x. The subgradient at 0 takes the else branch.
template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& input, double alpha) {
  TensorT<T> out = input;
  const T a = static_cast<T>(alpha);
  for (T& v : out.values) v = v > T(0) ? v : a * v;
  return out;
}

template <typename T>
TensorT<T> leaky_relu_backward(const TensorT<T>& preact, const TensorT<T>& dout,
                               double alpha) {
  TensorT<T> din = dout;
  const T a = static_cast<T>(alpha);
  for (std::size_t i = 0; i < din.values.size(); ++i)
    din.values[i] = preact.values[i] > T(0) ? dout.values[i] : a * dout.values[i];
  return din;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& input) {
  TensorT<T> out = input;
  for (T& v : out.values) v = T(1) / (T(1) + std::exp(-v));
  return out;
}

// Backward from the forward *output* (sigma * (1 - sigma)).
template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& output, const TensorT<T>& dout) {
  TensorT<T> din = dout;
  for (std::size_t i = 0; i < din.values.size(); ++i)
    din.values[i] = dout.values[i] * output.values[i] * (T(1) - output.values[i]);
  return din;
}

// Inverted dropout: each element is zeroed with probability rate and the
// survivors are scaled by 1/(1-rate), so inference is a bit-exact identity.
// mask_out records the applied factors for the backward pass.
template <typename T>
TensorT<T> dropout(const TensorT<T>& input, double rate, RunMode mode, Rng& rng,
                   std::vector<T>* mask_out = nullptr) {
  if (rate < 0 || rate >= 1) fail(Errc::bad_config, "dropout rate must be in [0, 1)");
  if (mode == RunMode::infer || rate == 0.0) {
    if (mask_out) mask_out->assign(input.size(), T(1));
    return input;
  }
  TensorT<T> out = input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  if (mask_out) mask_out->assign(input.size(), T(0));
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (rng.uniform() < rate) {
      out.values[i] = T(0);
    } else {
      out.values[i] *= scale;
      if (mask_out) (*mask_out)[i] = scale;
    }
  }
  return out;
}

template <typename T>
TensorT<T> dropout_backward(const std::vector<T>& mask, const TensorT<T>& dout) {
  TensorT<T> din = dout;
  for (std::size_t i = 0; i < din.values.size(); ++i) din.values[i] *= mask[i];
  return din;
}

// Compares an analytic gradient against central finite differences of a
// scalar-valued map, returning the worst relative error over all components.
// The map must be deterministic (run dropout in infer mode or with a frozen
// mask).
template <typename T, typename F>
double grad_check(F&& function, const TensorT<T>& point,
                  const TensorT<T>& analytic_grad, double epsilon) {
  if (epsilon <= 0) fail(Errc::bad_config, "grad_check epsilon must be positive");
  TensorT<T> x = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const T saved = x.values[i];
    x.values[i] = saved + static_cast<T>(epsilon);
    const double f_plus = function(x);
    x.values[i] = saved - static_cast<T>(epsilon);
    const double f_minus = function(x);
    x.values[i] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
    const double analytic = static_cast<double>(analytic_grad.values[i]);
    const double denom =
        std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace alien
