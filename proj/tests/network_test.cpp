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


#include "rangeseg/nn/network.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <algorithm>
#include <random>
#include <set>

#include <unistd.h>

#include "rangeseg/common.hpp"
#include "test_support.hpp"

namespace rangeseg::nn {
namespace {

using rangeseg::testing::max_abs_diff;
using rangeseg::testing::random_tensor;

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.filters = {4, 4, 6, 6, 8, 8};
  c.blocks = {1, 1, 0, 1, 0, 1};
  c.n_classes = 4;
  return c;
}

Tensor random_input(const NetworkConfig& c, int b, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor<float>({b, h, w, c.in_channels}, rng);
}

TEST(NetworkConfig, PresetsAndErrors) {
  EXPECT_EQ(NetworkConfig::preset_names(), (std::vector<std::string>{"A", "B", "C", "D", "R*"}));
  EXPECT_EQ(NetworkConfig::preset("R").filters, NetworkConfig::preset("R*").filters);
  EXPECT_EQ(NetworkConfig::preset("D").filters[5], 512);
  EXPECT_THROW(NetworkConfig::preset("E"), ConfigError);
  NetworkConfig c = tiny_config();
  c.filters[2] = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.alpha["stem"] = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.alpha["stem"] = 4;
  EXPECT_EQ(c.alpha_for("stem"), 4);
  EXPECT_EQ(c.alpha_for("head"), 1);
}

TEST(Network, OutputShapeMatchesInput) {
  Network net(tiny_config());
  for (Mode m : {Mode::kTrain, Mode::kInfer}) {
    const Tensor y = net.forward(random_input(net.config(), 2, 5, 64, 1), m);
    EXPECT_EQ(y.shape(), (Shape4{2, 5, 64, 4}));
  }
}

TEST(Network, InputChecks) {
  Network net(tiny_config());
  EXPECT_THROW(net.forward(random_input(net.config(), 1, 4, 48, 2), Mode::kInfer), ConfigError);
  EXPECT_THROW(net.forward(random_input(net.config(), 1, 4, 16, 2), Mode::kInfer), ConfigError);
  std::mt19937_64 rng(3);
  EXPECT_THROW(net.forward(random_tensor<float>({1, 4, 32, 2}, rng), Mode::kInfer), ConfigError);
  NetworkConfig tall = tiny_config();
  tall.default_alpha = 8;
  Network tall_net(tall);
  EXPECT_THROW(tall_net.check_input({1, 4, 32, 3}), ConfigError);
  EXPECT_NO_THROW(tall_net.check_input({1, 8, 32, 3}));
}

TEST(Network, SeededInitialisationIsDeterministic) {
  Network a(tiny_config()), b(tiny_config());
  const Tensor x = random_input(a.config(), 1, 4, 32, 4);
  EXPECT_EQ(a.forward(x, Mode::kInfer), b.forward(x, Mode::kInfer));
  NetworkConfig other = tiny_config();
  other.seed = 2;
  Network c(other);
  EXPECT_NE(a.forward(x, Mode::kInfer), c.forward(x, Mode::kInfer));
}

TEST(Network, LayerNaming) {
  Network net(tiny_config());
  std::vector<std::string> names;
  for (const auto& p : net.parameters()) names.push_back(p.name);
  auto has = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
  };
  EXPECT_TRUE(has("stem.weight"));
  EXPECT_TRUE(has("stem.bn.gamma"));
  EXPECT_TRUE(has("enc1.down.weight"));
  EXPECT_TRUE(has("enc0.block0.conv1.weight"));
  EXPECT_TRUE(has("enc5.block0.conv2.bn.beta"));
  EXPECT_TRUE(has("dec3.match.bias"));
  EXPECT_TRUE(has("dec1.fuse.weight"));
  EXPECT_TRUE(has("head.weight"));
  EXPECT_FALSE(has("enc2.block0.conv1.weight"));
  std::set<std::string> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), names.size());
}

TEST(Network, ParameterCountsGrowAcrossPresets) {
  std::size_t prev = 0;
  for (const auto& name : NetworkConfig::preset_names()) {
    Network net(NetworkConfig::preset(name));
    const std::size_t n = count_params(net);
    EXPECT_GT(n, prev) << name;
    prev = n;
  }
  EXPECT_GT(prev, 50.4e6 * 0.5);
  EXPECT_LT(prev, 50.4e6 * 1.5);
}

TEST(Network, AlphaScalesConvolutionParameters) {
  NetworkConfig one = NetworkConfig::preset("A");
  NetworkConfig two = one;
  two.default_alpha = 2;
  Network a(one), b(two);
  EXPECT_EQ(count_conv_params(b), 2 * count_conv_params(a));
  EXPECT_EQ(count_params(b) - count_params(a), count_conv_params(a));
}

TEST(Network, LogitsFiniteForEveryPreset) {
  for (const auto& name : NetworkConfig::preset_names()) {
    NetworkConfig c = NetworkConfig::preset(name);
    c.n_classes = 4;
    Network net(c);
    const Tensor y = net.forward(random_input(c, 1, 2, 32, 5), Mode::kInfer);
    for (float v : y.data()) ASSERT_TRUE(std::isfinite(v)) << name;
  }
}

TEST(Network, StrideOneCyclicNetworkIsShiftEquivariant) {
  NetworkConfig c = tiny_config();
  c.width_strides = false;
  c.default_alpha = 2;
  Network net(c);
  const Tensor x = random_input(c, 1, 4, 20, 6);
  const Tensor y = net.forward(x, Mode::kInfer);
  for (int s : {1, 7, 10}) {
    EXPECT_LT(max_abs_diff(net.forward(roll_width(x, s), Mode::kInfer), roll_width(y, s)), 1e-5);
  }
}

TEST(Network, BackwardAgreesWithFiniteDifferences) {
  // Float, whole network: a few coordinates sit near ReLU kinks at any step.
  NetworkConfig c = tiny_config();
  c.default_alpha = 2;
  Network net(c);
  const Tensor x = random_input(c, 2, 2, 32, 7);
  std::mt19937_64 rng(8);
  const Tensor probe = random_tensor<float>({2, 2, 32, 4}, rng);
  auto loss = [&] {
    const Tensor y = net.forward(x, Mode::kTrain);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data()[i]) * probe.data()[i];
    return s;
  };
  loss();
  net.backward(probe);

  std::size_t total = 0, agree_total = 0;
  for (auto& p : net.parameters()) {
    const std::vector<float> analytic(p.grad.begin(), p.grad.end());
    std::size_t agree = 0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float saved = p.value[i];
      const float h = 1e-3f;
      p.value[i] = saved + h;
      const double up = loss();
      p.value[i] = saved - h;
      const double down = loss();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      agree += std::abs(numeric - analytic[i]) <= 0.05 * std::abs(analytic[i]) + 0.05;
    }
    if (p.value.size() >= 8) {
      EXPECT_GE(static_cast<double>(agree) / p.value.size(), 0.75) << p.name;
    }
    total += p.value.size();
    agree_total += agree;
  }
  EXPECT_GE(static_cast<double>(agree_total) / total, 0.95);
}

class WeightsFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("rangeseg_weights_" + std::to_string(::getpid()) + ".rswt");
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

TEST_F(WeightsFile, RoundTripRestoresOutputs) {
  NetworkConfig c = tiny_config();
  Network a(c);
  const Tensor x = random_input(c, 2, 4, 32, 9);
  a.forward(x, Mode::kTrain);  // move the running statistics off their defaults
  save_weights(a, path_);
  c.seed = 99;
  Network b(c);
  ASSERT_NE(a.forward(x, Mode::kInfer), b.forward(x, Mode::kInfer));
  load_weights(b, path_);
  EXPECT_EQ(a.forward(x, Mode::kInfer), b.forward(x, Mode::kInfer));
  EXPECT_EQ(encode_weights(a), encode_weights(b));
}

TEST_F(WeightsFile, TruncatedAndCorruptFiles) {
  Network net(tiny_config());
  auto bytes = encode_weights(net);
  EXPECT_THROW(decode_weights(net, std::span(bytes).first(bytes.size() - 3)), FormatError);
  auto bad = bytes;
  bad[0] = std::byte{'X'};
  EXPECT_THROW(decode_weights(net, bad), FormatError);
  bytes.push_back(std::byte{0});
  EXPECT_THROW(decode_weights(net, bytes), FormatError);
  EXPECT_THROW(load_weights(net, path_), std::runtime_error);
}

TEST_F(WeightsFile, MismatchNamesTheOffendingEntries) {
  Network small(tiny_config());
  NetworkConfig wider = tiny_config();
  wider.filters[5] = 10;
  Network big(wider);
  try {
    decode_weights(big, encode_weights(small));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("enc5.down.weight"), std::string::npos) << msg;
    EXPECT_NE(msg.find("file [3,3,8,8,1]"), std::string::npos) << msg;
  }
  NetworkConfig deeper = tiny_config();
  deeper.blocks[2] = 1;
  Network d(deeper);
  try {
    decode_weights(d, encode_weights(small));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("enc2.block0.conv1.weight (missing)"), std::string::npos);
  }
}

}  // namespace
}  // namespace rangeseg::nn
