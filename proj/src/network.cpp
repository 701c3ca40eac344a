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

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "rangeseg/byte_io.hpp"
#include "rangeseg/cloud_io.hpp"

namespace rangeseg::nn {

namespace {

std::span<float> as_span(std::vector<float>& v) { return {v.data(), v.size()}; }

}  // namespace

// ---------------------------------------------------------------------------
// NetworkConfig

NetworkConfig NetworkConfig::preset(std::string_view name) {
  NetworkConfig c;
  if (name == "A") {
    c.filters = {32, 32, 32, 32, 32, 32};
  } else if (name == "B") {
    c.filters = {32, 48, 64, 64, 64, 64};
  } else if (name == "C") {
    c.filters = {32, 48, 64, 96, 128, 256};
  } else if (name == "D") {
    c.filters = {32, 48, 64, 128, 256, 512};
  } else if (name == "R*" || name == "R") {
    c.filters = {32, 64, 128, 256, 512, 1024};
  } else {
    throw ConfigError("unknown network preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> NetworkConfig::preset_names() { return {"A", "B", "C", "D", "R*"}; }

int NetworkConfig::alpha_for(const std::string& layer) const {
  auto it = alpha.find(layer);
  return it == alpha.end() ? default_alpha : it->second;
}

void NetworkConfig::validate() const {
  for (int f : filters) {
    if (f < 1) throw ConfigError("network: channel counts must be positive");
  }
  for (int b : blocks) {
    if (b < 0) throw ConfigError("network: negative block count");
  }
  if (default_alpha < 1) throw ConfigError("network: alpha must be >= 1");
  for (const auto& [name, a] : alpha) {
    if (a < 1) throw ConfigError("network: alpha for '" + name + "' must be >= 1");
  }
  if (in_channels < 1 || n_classes < 1) throw ConfigError("network: bad channel counts");
}

// ---------------------------------------------------------------------------
// Layers

Conv::Conv(std::string name, int kernel, int in, int out, int alpha, int stride, WidthPadding mode)
    : name_(std::move(name)),
      kernel_(kernel, kernel, in, out, alpha),
      grad_(kernel, kernel, in, out, alpha),
      pad_(PadSpec::same(kernel, kernel, mode)),
      stride_(stride) {}

Tensor Conv::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::kTrain) input_ = x;
  return slc_forward(x, kernel_, pad_, stride_);
}

Tensor Conv::backward(const Tensor& grad_y) {
  auto g = slc_backward(input_, kernel_, pad_, grad_y, stride_);
  grad_ = std::move(g.grad_kernel);
  input_ = Tensor();
  return std::move(g.grad_x);
}

void Conv::collect(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight",
                 {kernel_.kh, kernel_.kw, kernel_.in_channels, kernel_.out_channels, kernel_.alpha},
                 as_span(kernel_.weights),
                 as_span(grad_.weights)});
  out.push_back({name_ + ".bias",
                 {kernel_.out_channels, kernel_.alpha},
                 as_span(kernel_.bias),
                 as_span(grad_.bias)});
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::kInfer) return batch_norm_infer(x, state_);
  return batch_norm_train(x, state_, &cache_);
}

Tensor BatchNorm::backward(const Tensor& grad_y) {
  auto g = batch_norm_backward(cache_, state_, grad_y);
  grad_gamma_ = std::move(g.grad_gamma);
  grad_beta_ = std::move(g.grad_beta);
  cache_ = {};
  return std::move(g.grad_x);
}

void BatchNorm::collect(std::vector<ParamRef>& out) {
  const int c = state_.channels();
  grad_gamma_.resize(c, 0.f);
  grad_beta_.resize(c, 0.f);
  out.push_back({name_ + ".gamma", {c}, as_span(state_.gamma), as_span(grad_gamma_)});
  out.push_back({name_ + ".beta", {c}, as_span(state_.beta), as_span(grad_beta_)});
}

void BatchNorm::collect(std::vector<BufferRef>& out) {
  const int c = state_.channels();
  out.push_back({name_ + ".running_mean", {c}, as_span(state_.running_mean)});
  out.push_back({name_ + ".running_var", {c}, as_span(state_.running_var)});
}

ConvBnRelu::ConvBnRelu(const std::string& name, int kernel, int in, int out, int alpha, int stride,
                       WidthPadding mode, bool relu)
    : conv_(name, kernel, in, out, alpha, stride, mode), bn_(name + ".bn", out), relu_(relu) {}

Tensor ConvBnRelu::forward(const Tensor& x, Mode mode) {
  Tensor y = bn_.forward(conv_.forward(x, mode), mode);
  if (!relu_) return y;
  if (mode == Mode::kTrain) pre_ = y;
  return relu(y);
}

Tensor ConvBnRelu::backward(const Tensor& grad_y) {
  Tensor g = relu_ ? relu_backward(pre_, grad_y) : grad_y;
  pre_ = Tensor();
  return conv_.backward(bn_.backward(g));
}

void ConvBnRelu::collect(std::vector<ParamRef>& out) {
  conv_.collect(out);
  bn_.collect(out);
}

void ConvBnRelu::collect(std::vector<BufferRef>& out) { bn_.collect(out); }

ResidualBlock::ResidualBlock(const std::string& name, int channels, const NetworkConfig& cfg)
    : first_(name + ".conv1", 3, channels, channels, cfg.alpha_for(name + ".conv1"), 1,
             cfg.padding),
      second_(name + ".conv2", 3, channels, channels, cfg.alpha_for(name + ".conv2"), 1,
              cfg.padding, false) {}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
  Tensor s = add(second_.forward(first_.forward(x, mode), mode), x);
  Tensor y = relu(s);
  if (mode == Mode::kTrain) sum_ = std::move(s);
  return y;
}

Tensor ResidualBlock::backward(const Tensor& grad_y) {
  Tensor gs = relu_backward(sum_, grad_y);
  sum_ = Tensor();
  Tensor gx = first_.backward(second_.backward(gs));
  return add(gx, gs);
}

void ResidualBlock::collect(std::vector<ParamRef>& out) {
  first_.collect(out);
  second_.collect(out);
}

void ResidualBlock::collect(std::vector<BufferRef>& out) {
  first_.collect(out);
  second_.collect(out);
}

void ResidualBlock::init(std::mt19937_64& rng) {
  first_.init(rng);
  second_.init(rng);
}

void ResidualBlock::convs(std::vector<const Conv*>& out) const {
  out.push_back(&first_.conv());
  out.push_back(&second_.conv());
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const NetworkConfig& config) : config_(config) {
  config_.validate();
  const auto& f = config_.filters;
  const auto mode = config_.padding;
  const int stride = config_.width_strides ? 2 : 1;

  stem_ = ConvBnRelu("stem", 3, config_.in_channels, f[0], config_.alpha_for("stem"), 1, mode);
  blocks_.resize(kStages);
  for (int k = 0; k < kStages; ++k) {
    const std::string stage = "enc" + std::to_string(k);
    if (k > 0) {
      down_.emplace_back(stage + ".down", 3, f[k - 1], f[k], config_.alpha_for(stage + ".down"),
                         stride, mode);
    }
    for (int b = 0; b < config_.blocks[k]; ++b) {
      blocks_[k].emplace_back(stage + ".block" + std::to_string(b), f[k], config_);
    }
  }
  for (int k = 1; k < kStages; ++k) {
    const std::string stage = "dec" + std::to_string(k);
    match_.emplace_back(stage + ".match", 1, f[k], f[k - 1], config_.alpha_for(stage + ".match"), 1,
                        mode);
    fuse_.emplace_back(stage + ".fuse", 3, f[k - 1], f[k - 1], config_.alpha_for(stage + ".fuse"),
                       1, mode);
  }
  head_ = Conv("head", 1, f[0], config_.n_classes, config_.alpha_for("head"), 1, mode);

  std::mt19937_64 rng(config_.seed);
  stem_.init(rng);
  for (int k = 0; k < kStages; ++k) {
    if (k > 0) down_[k - 1].init(rng);
    for (auto& b : blocks_[k]) b.init(rng);
  }
  for (int k = 1; k < kStages; ++k) {
    match_[k - 1].init(rng);
    fuse_[k - 1].init(rng);
  }
  head_.init(rng);
}

void Network::check_input(const Shape4& shape) const {
  if (shape[3] != config_.in_channels) {
    throw ConfigError("network expects " + std::to_string(config_.in_channels) +
                      " input channels, got " + std::to_string(shape[3]));
  }
  const int div = config_.width_divisor();
  if (shape[2] < div || shape[2] % div != 0) {
    throw ConfigError("input width " + std::to_string(shape[2]) + " must be a positive multiple of " +
                      std::to_string(div) + " for the encoder strides");
  }
  if (shape[1] < 1) throw ConfigError("input height must be at least 1");
  std::vector<int> alphas{config_.default_alpha};
  for (const auto& [name, a] : config_.alpha) alphas.push_back(a);
  for (int a : alphas) {
    if (a > shape[1]) {
      throw ConfigError("alpha " + std::to_string(a) + " exceeds input height " +
                        std::to_string(shape[1]));
    }
  }
}

Tensor Network::forward(const Tensor& x, Mode mode) {
  check_input(x.shape());
  const int up = config_.width_strides ? 2 : 1;
  std::vector<Tensor> skips(kStages);
  Tensor h = stem_.forward(x, mode);
  for (int k = 0; k < kStages; ++k) {
    if (k > 0) h = down_[k - 1].forward(h, mode);
    for (auto& b : blocks_[k]) h = b.forward(h, mode);
    skips[k] = h;
  }
  for (int k = kStages - 1; k >= 1; --k) {
    Tensor m = upsample_width(match_[k - 1].forward(h, mode), up);
    h = fuse_[k - 1].forward(add(m, skips[k - 1]), mode);
  }
  return head_.forward(h, mode);
}

void Network::backward(const Tensor& grad_logits) {
  const int up = config_.width_strides ? 2 : 1;
  std::vector<Tensor> skip_grads(kStages);
  Tensor g = head_.backward(grad_logits);
  for (int k = 1; k < kStages; ++k) {
    Tensor gs = fuse_[k - 1].backward(g);
    skip_grads[k - 1] = gs;
    g = match_[k - 1].backward(upsample_width_backward(gs, up));
  }
  // g is now the gradient w.r.t. the deepest encoder output.
  for (int k = kStages - 1; k >= 0; --k) {
    if (k < kStages - 1) g = add(g, skip_grads[k]);
    for (auto it = blocks_[k].rbegin(); it != blocks_[k].rend(); ++it) g = it->backward(g);
    if (k > 0) g = down_[k - 1].backward(g);
  }
  stem_.backward(g);
}

std::vector<ParamRef> Network::parameters() {
  std::vector<ParamRef> out;
  stem_.collect(out);
  for (int k = 0; k < kStages; ++k) {
    if (k > 0) down_[k - 1].collect(out);
    for (auto& b : blocks_[k]) b.collect(out);
  }
  for (int k = 1; k < kStages; ++k) {
    match_[k - 1].collect(out);
    fuse_[k - 1].collect(out);
  }
  head_.collect(out);
  return out;
}

std::vector<BufferRef> Network::buffers() {
  std::vector<BufferRef> out;
  stem_.collect(out);
  for (int k = 0; k < kStages; ++k) {
    if (k > 0) down_[k - 1].collect(out);
    for (auto& b : blocks_[k]) b.collect(out);
  }
  for (int k = 1; k < kStages; ++k) fuse_[k - 1].collect(out);
  return out;
}

std::vector<const Conv*> Network::convs() const {
  std::vector<const Conv*> out{&stem_.conv()};
  for (int k = 0; k < kStages; ++k) {
    if (k > 0) out.push_back(&down_[k - 1].conv());
    for (const auto& b : blocks_[k]) b.convs(out);
  }
  for (int k = 1; k < kStages; ++k) {
    out.push_back(&match_[k - 1]);
    out.push_back(&fuse_[k - 1].conv());
  }
  out.push_back(&head_);
  return out;
}

std::size_t count_params(Network& net) {
  std::size_t n = 0;
  for (const auto& p : net.parameters()) n += p.value.size();
  return n;
}

std::size_t count_conv_params(const Network& net) {
  std::size_t n = 0;
  for (const Conv* c : net.convs()) n += c->kernel().param_count();
  return n;
}

// ---------------------------------------------------------------------------
// Weight container

namespace {

constexpr std::uint32_t kWeightsVersion = 1;

struct NamedSlot {
  std::vector<int> shape;
  std::span<float> value;
};

std::vector<std::pair<std::string, NamedSlot>> named_slots(Network& net) {
  std::vector<std::pair<std::string, NamedSlot>> out;
  for (auto& p : net.parameters()) out.push_back({p.name, {p.shape, p.value}});
  for (auto& b : net.buffers()) out.push_back({b.name, {b.shape, b.value}});
  return out;
}

std::string shape_text(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

std::vector<std::byte> encode_weights(Network& net) {
  const auto slots = named_slots(net);
  ByteWriter out;
  out.raw("RSWT");
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(slots.size()));
  for (const auto& [name, slot] : slots) {
    out.u32(static_cast<std::uint32_t>(name.size()));
    out.raw(name);
    out.u32(static_cast<std::uint32_t>(slot.shape.size()));
    for (int d : slot.shape) out.u32(static_cast<std::uint32_t>(d));
    for (float v : slot.value) out.f32(v);
  }
  return out.take();
}

void decode_weights(Network& net, std::span<const std::byte> bytes) {
  ByteReader in(bytes, "weights");
  if (in.raw(4) != "RSWT") in.fail("bad magic");
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion) in.fail("unsupported version " + std::to_string(version));
  const std::uint32_t count = in.u32();

  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, Entry> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t len = in.u32();
    if (len > 4096) in.fail("implausible name length");
    std::string name = in.raw(len);
    const std::uint32_t rank = in.u32();
    if (rank > 8) in.fail("implausible rank for '" + name + "'");
    Entry entry;
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      entry.shape.push_back(static_cast<int>(in.u32()));
      n *= static_cast<std::size_t>(entry.shape.back());
    }
    in.need(n * 4);
    entry.data.resize(n);
    for (auto& v : entry.data) v = in.f32();
    entries[std::move(name)] = std::move(entry);
  }
  if (in.remaining() != 0) in.fail("trailing bytes");

  auto slots = named_slots(net);
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& [name, slot] : slots) {
    expected.insert(name);
    auto it = entries.find(name);
    if (it == entries.end()) {
      problems.push_back(name + " (missing)");
    } else if (it->second.shape != slot.shape) {
      problems.push_back(name + " (file " + shape_text(it->second.shape) + ", network " +
                         shape_text(slot.shape) + ")");
    }
  }
  for (const auto& [name, entry] : entries) {
    if (!expected.count(name)) problems.push_back(name + " (unexpected)");
  }
  if (!problems.empty()) {
    constexpr std::size_t kShown = 12;
    std::string msg = "weights do not fit the network (" + std::to_string(problems.size()) +
                      " entries):";
    for (std::size_t i = 0; i < std::min(kShown, problems.size()); ++i) msg += "\n  " + problems[i];
    if (problems.size() > kShown) {
      msg += "\n  ... and " + std::to_string(problems.size() - kShown) + " more";
    }
    throw ShapeError(msg);
  }
  for (auto& [name, slot] : slots) {
    const auto& data = entries.at(name).data;
    std::copy(data.begin(), data.end(), slot.value.begin());
  }
}

void save_weights(Network& net, const std::filesystem::path& path) {
  write_file_bytes(path, encode_weights(net));
}

void load_weights(Network& net, const std::filesystem::path& path) {
  decode_weights(net, read_file_bytes(path));
}

}  // namespace rangeseg::nn
