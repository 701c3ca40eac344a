// Copyright 2026 The rangeseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "rangeseg/nn/tensor.hpp"

// Forward and hand-written backward passes of the layers the segmentation
// backbone is built from. Everything is instantiated for float (training and
// inference) and double (gradient checks).

namespace rangeseg::nn {

enum class WidthPadding { kZeros, kCyclic };

/// Padding along height is always zeros; along width it is zeros or cyclic
/// (columns copied from the opposite edge of the 360 degree image).
struct PadSpec {
  int rows = 0;
  int cols = 0;
  WidthPadding width_mode = WidthPadding::kZeros;

  /// Output keeps the input size for an odd kh x kw kernel at stride 1.
  static PadSpec same(int kh, int kw, WidthPadding mode) { return {kh / 2, kw / 2, mode}; }
};

/// Semi-local convolution kernel. Logical weight shape is
/// [kh, kw, in_channels, out_channels, alpha] and bias shape is
/// [out_channels, alpha], both stored row-major in that order. Output row h of
/// an H-row output uses component floor(h * alpha / H). alpha == 1 is an
/// ordinary convolution kernel.
template <typename T>
struct BasicSlcKernel {
  int kh = 1;
  int kw = 1;
  int in_channels = 1;
  int out_channels = 1;
  int alpha = 1;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicSlcKernel() : weights(1, T{0}), bias(1, T{0}) {}
  BasicSlcKernel(int kh_, int kw_, int in, int out, int alpha_ = 1)
      : kh(kh_), kw(kw_), in_channels(in), out_channels(out), alpha(alpha_) {
    if (kh < 1 || kw < 1 || in < 1 || out < 1 || alpha < 1) {
      throw ShapeError("kernel dimensions must be positive");
    }
    weights.assign(static_cast<std::size_t>(kh) * kw * in * out * alpha, T{0});
    bias.assign(static_cast<std::size_t>(out) * alpha, T{0});
  }

  std::size_t weight_index(int i, int j, int ci, int co, int a) const {
    return ((((static_cast<std::size_t>(i) * kw + j) * in_channels + ci) * out_channels + co) *
            alpha) +
           a;
  }
  T& w(int i, int j, int ci, int co, int a = 0) { return weights[weight_index(i, j, ci, co, a)]; }
  const T& w(int i, int j, int ci, int co, int a = 0) const {
    return weights[weight_index(i, j, ci, co, a)];
  }
  T& b(int co, int a = 0) { return bias[static_cast<std::size_t>(co) * alpha + a]; }
  const T& b(int co, int a = 0) const { return bias[static_cast<std::size_t>(co) * alpha + a]; }

  /// kh*kw*in*out*alpha + out*alpha.
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

using SlcKernel = BasicSlcKernel<float>;

/// Component used by output row h of an H-row output.
inline int alpha_component(int h, int height, int alpha) {
  return static_cast<int>((static_cast<long long>(h) * alpha) / height);
}

/// Uniform in +-sqrt(6 / (fan_in + fan_out)); bias zero.
void glorot_uniform(SlcKernel& k, std::mt19937_64& rng);

template <typename T>
BasicTensor<T> pad(const BasicTensor<T>& x, const PadSpec& spec);

/// Folds a gradient w.r.t. the padded tensor back onto the unpadded input;
/// cyclic copies accumulate onto their source columns.
template <typename T>
BasicTensor<T> pad_backward(const BasicTensor<T>& grad_padded, const PadSpec& spec,
                            const Shape4& input_shape);

/// y[b,h,w,o] = bias[o,a_h] + sum_{i,j,c} k[i,j,c,o,a_h] * xpad[b, h+i, w*stride_w+j, c]
///
/// Cross-correlation orientation: kernel tap i sits at vertical offset
/// i - kh/2 from the output row. Width stride only; height is preserved when
/// `pad` is PadSpec::same.
template <typename T>
BasicTensor<T> slc_forward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, const PadSpec& pad,
                           int stride_w = 1);

template <typename T>
struct SlcGradients {
  BasicTensor<T> grad_x;
  BasicSlcKernel<T> grad_kernel;  // weights and bias gradients
};

template <typename T>
SlcGradients<T> slc_backward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k,
                             const PadSpec& pad, const BasicTensor<T>& grad_y, int stride_w = 1);

/// Plain convolution; `k.alpha` must be 1.
template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, int stride_w,
                            const PadSpec& pad);
template <typename T>
SlcGradients<T> conv_backward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, int stride_w,
                              const PadSpec& pad, const BasicTensor<T>& grad_y);

/// Nearest-neighbour upsampling along width: [a, b] -> [a, a, b, b] for 2.
template <typename T>
BasicTensor<T> upsample_width(const BasicTensor<T>& x, int factor);
template <typename T>
BasicTensor<T> upsample_width_backward(const BasicTensor<T>& grad_y, int factor);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
/// `x` is the forward input.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_y);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Rotates columns: out[.., w, ..] = x[.., (w - shift) mod W, ..].
template <typename T>
BasicTensor<T> roll_width(const BasicTensor<T>& x, int shift);

/// Per-channel normalization with learned scale and shift.
template <typename T>
struct BatchNormState {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNormState() = default;
  explicit BatchNormState(int channels)
      : gamma(channels, T{1}), beta(channels, T{0}), running_mean(channels, T{0}),
        running_var(channels, T{1}) {}
  int channels() const { return static_cast<int>(gamma.size()); }
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
struct BatchNormGradients {
  BasicTensor<T> grad_x;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
};

/// Normalizes with the statistics of this batch (over B, H, W) and folds
/// them into the running estimates. `cache` may be null.
template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x, BatchNormState<T>& state,
                                BatchNormCache<T>* cache, bool update_running = true);
/// Normalizes with the running estimates.
template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BatchNormState<T>& state);
template <typename T>
BatchNormGradients<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                          const BatchNormState<T>& state,
                                          const BasicTensor<T>& grad_y);

}  // namespace rangeseg::nn
