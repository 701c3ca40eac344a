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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rangeseg/nn/ops.hpp"
#include "rangeseg/nn/tensor.hpp"

namespace rangeseg::nn {

inline constexpr int kStages = 6;

/// Residual encoder-decoder backbone description.
///
/// Stage 0 runs at full resolution; stages 1..5 each halve the width with a
/// stride-2 convolution. The decoder mirrors them with nearest-neighbour
/// width upsampling and additive skip connections.
struct NetworkConfig {
  std::array<int, kStages> filters{32, 32, 32, 32, 32, 32};
  std::array<int, kStages> blocks{1, 1, 2, 2, 2, 2};
  int default_alpha = 1;
  std::map<std::string, int> alpha;  // per-layer override, keyed by layer name
  WidthPadding padding = WidthPadding::kCyclic;
  int in_channels = 3;  // depth, reflectance, mask
  int n_classes = 20;   // logits, including unlabeled
  bool width_strides = true;  // false: stride-1 variant, no up/downsampling
  std::uint64_t seed = 1;

  /// "A", "B", "C", "D" or "R*" ("R" accepted).
  static NetworkConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();

  int alpha_for(const std::string& layer) const;
  /// Throws ConfigError.
  void validate() const;
  /// Total width reduction of the encoder.
  int width_divisor() const { return width_strides ? 1 << (kStages - 1) : 1; }
};

enum class Mode { kTrain, kInfer };

struct ParamRef {
  std::string name;
  std::vector<int> shape;
  std::span<float> value;
  std::span<float> grad;
};

struct BufferRef {
  std::string name;
  std::vector<int> shape;
  std::span<float> value;
};

class Conv {
 public:
  Conv() = default;
  Conv(std::string name, int kernel, int in, int out, int alpha, int stride, WidthPadding mode);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_y);
  void collect(std::vector<ParamRef>& out);
  void init(std::mt19937_64& rng) { glorot_uniform(kernel_, rng); }

  const std::string& name() const { return name_; }
  const SlcKernel& kernel() const { return kernel_; }
  SlcKernel& kernel() { return kernel_; }

 private:
  std::string name_;
  SlcKernel kernel_;
  SlcKernel grad_;
  PadSpec pad_;
  int stride_ = 1;
  Tensor input_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, int channels) : name_(std::move(name)), state_(channels) {}

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_y);
  void collect(std::vector<ParamRef>& out);
  void collect(std::vector<BufferRef>& out);

 private:
  std::string name_;
  BatchNormState<float> state_;
  std::vector<float> grad_gamma_, grad_beta_;
  BatchNormCache<float> cache_;
};

/// conv -> batch norm -> optional ReLU
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, int kernel, int in, int out, int alpha, int stride,
             WidthPadding mode, bool relu = true);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_y);
  void collect(std::vector<ParamRef>& out);
  void collect(std::vector<BufferRef>& out);
  void init(std::mt19937_64& rng) { conv_.init(rng); }
  const Conv& conv() const { return conv_; }

 private:
  Conv conv_;
  BatchNorm bn_;
  bool relu_ = true;
  Tensor pre_;
};

/// y = relu(bn(conv(relu(bn(conv(x))))) + x)
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int channels, const NetworkConfig& cfg);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_y);
  void collect(std::vector<ParamRef>& out);
  void collect(std::vector<BufferRef>& out);
  void init(std::mt19937_64& rng);
  void convs(std::vector<const Conv*>& out) const;

 private:
  ConvBnRelu first_;
  ConvBnRelu second_;  // without ReLU; applied after the sum
  Tensor sum_;
};

class Network {
 public:
  explicit Network(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }

  /// Logits [B, H, W, n_classes] for input [B, H, W, in_channels].
  Tensor forward(const Tensor& x, Mode mode);
  /// Sets every parameter gradient from d(loss)/d(logits) of the last
  /// training-mode forward pass.
  void backward(const Tensor& grad_logits);

  /// Throws ConfigError when the encoder cannot process this input.
  void check_input(const Shape4& shape) const;

  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();
  std::vector<const Conv*> convs() const;

 private:
  NetworkConfig config_;
  ConvBnRelu stem_;
  std::vector<ConvBnRelu> down_;                  // stages 1..5
  std::vector<std::vector<ResidualBlock>> blocks_;  // stages 0..5
  std::vector<Conv> match_;                       // decoder 1x1, index k-1 for stage k
  std::vector<ConvBnRelu> fuse_;                  // decoder 3x3, index k-1 for stage k
  Conv head_;
};

/// Number of trainable values (convolution weights and biases, normalization
/// scales and shifts).
std::size_t count_params(Network& net);
/// Trainable values inside convolution kernels only.
std::size_t count_conv_params(const Network& net);

// Weight container, little-endian:
//   char[4] "RSWT" | u32 version (=1) | u32 count
//   count x { u32 name_len | name | u32 rank | rank x u32 dims | float32 data }
// Holds every parameter and normalization buffer by name.
void save_weights(Network& net, const std::filesystem::path& path);
std::vector<std::byte> encode_weights(Network& net);
/// Throws FormatError for malformed files and ShapeError naming every
/// missing, unexpected or differently shaped entry.
void load_weights(Network& net, const std::filesystem::path& path);
void decode_weights(Network& net, std::span<const std::byte> bytes);

}  // namespace rangeseg::nn
