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

#include "rangeseg/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rangeseg {

namespace nn {

namespace {

template <typename T>
std::size_t check_targets(const BasicTensor<T>& probs, std::span<const std::uint16_t> targets) {
  const std::size_t pixels = probs.size() / std::max(probs.channels(), 1);
  if (targets.size() != pixels) {
    throw ShapeError("loss: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(pixels) + " pixels");
  }
  for (auto t : targets) {
    if (t >= probs.channels()) {
      throw std::out_of_range("loss: target class " + std::to_string(t) + " >= " +
                              std::to_string(probs.channels()));
    }
  }
  return pixels;
}

bool scored(std::uint16_t t, const LossOptions& opts) {
  return !opts.ignore_index || t != *opts.ignore_index;
}

}  // namespace

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const int c = logits.channels();
  BasicTensor<T> p(logits.shape());
  const std::size_t n = logits.size() / std::max(c, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data().data() + i * c;
    T* out = p.data().data() + i * c;
    const T m = *std::max_element(z, z + c);
    T sum{0};
    for (int k = 0; k < c; ++k) {
      out[k] = std::exp(z[k] - m);
      sum += out[k];
    }
    for (int k = 0; k < c; ++k) out[k] /= sum;
  }
  return p;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs) {
  require_same_shape(probs, grad_probs, "softmax_backward");
  const int c = probs.channels();
  BasicTensor<T> gz(probs.shape());
  const std::size_t n = probs.size() / std::max(c, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const T* p = probs.data().data() + i * c;
    const T* g = grad_probs.data().data() + i * c;
    T* out = gz.data().data() + i * c;
    T dot{0};
    for (int k = 0; k < c; ++k) dot += p[k] * g[k];
    for (int k = 0; k < c; ++k) out[k] = p[k] * (g[k] - dot);
  }
  return gz;
}

template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& probs, std::span<const std::uint16_t> targets,
                            const LossOptions& opts) {
  const std::size_t pixels = check_targets(probs, targets);
  const int c = probs.channels();
  if (!opts.class_weights.empty() && static_cast<int>(opts.class_weights.size()) != c) {
    throw ShapeError("cross_entropy: class weight count does not match channels");
  }
  auto weight = [&](int k) { return opts.class_weights.empty() ? 1.0 : opts.class_weights[k]; };

  LossResult<T> r{T{0}, BasicTensor<T>(probs.shape()), BasicTensor<T>(probs.shape()), 0, false};
  for (std::size_t i = 0; i < pixels; ++i) r.n_scored += scored(targets[i], opts);
  if (r.n_scored == 0) {
    r.degenerate = true;
    return r;
  }
  const double inv_n = 1.0 / static_cast<double>(r.n_scored);
  double sum = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) {
    const int t = targets[i];
    if (!scored(targets[i], opts)) continue;
    const T* p = probs.data().data() + i * c;
    const double w = weight(t);
    const double pt = std::max(static_cast<double>(p[t]), 1e-12);
    sum -= w * std::log(pt);
    r.grad_probs.data()[i * c + t] = static_cast<T>(-w * inv_n / pt);
    T* gz = r.grad_logits.data().data() + i * c;
    for (int k = 0; k < c; ++k) gz[k] = static_cast<T>(w * inv_n * p[k]);
    gz[t] -= static_cast<T>(w * inv_n);
  }
  r.value = static_cast<T>(sum * inv_n);
  return r;
}

template <typename T>
LossResult<T> dice_loss(const BasicTensor<T>& probs, std::span<const std::uint16_t> targets,
                        const LossOptions& opts) {
  const std::size_t pixels = check_targets(probs, targets);
  const int c = probs.channels();
  std::vector<double> inter(c, 0.0), sum_t(c, 0.0), sum_p(c, 0.0);
  LossResult<T> r{T{0}, BasicTensor<T>(probs.shape()), BasicTensor<T>(probs.shape()), 0, false};
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!scored(targets[i], opts)) continue;
    ++r.n_scored;
    const T* p = probs.data().data() + i * c;
    const int t = targets[i];
    inter[t] += p[t];
    sum_t[t] += 1.0;
    for (int k = 0; k < c; ++k) sum_p[k] += static_cast<double>(p[k]) * p[k];
  }

  const double eps = opts.dice_epsilon;
  std::vector<bool> included(c, false);
  int n_included = 0;
  for (int k = 0; k < c; ++k) {
    if (opts.ignore_index && k == *opts.ignore_index) continue;
    if (r.n_scored == 0) continue;
    if (eps > 0 || sum_t[k] + sum_p[k] > 0) {
      included[k] = true;
      ++n_included;
    }
  }
  if (n_included == 0) {
    r.degenerate = true;
    return r;
  }

  double mean_ratio = 0.0;
  std::vector<double> a_coef(c, 0.0), b_coef(c, 0.0);
  for (int k = 0; k < c; ++k) {
    if (!included[k]) continue;
    const double num = 2.0 * inter[k] + eps;
    const double den = sum_t[k] + sum_p[k] + eps;
    mean_ratio += num / den;
    // d(num/den)/dp_ik = 2 t_ik / den - num * 2 p_ik / den^2
    a_coef[k] = 2.0 / den;
    b_coef[k] = 2.0 * num / (den * den);
  }
  r.value = static_cast<T>(1.0 - mean_ratio / n_included);

  const double scale = -1.0 / n_included;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!scored(targets[i], opts)) continue;
    const T* p = probs.data().data() + i * c;
    T* g = r.grad_probs.data().data() + i * c;
    const int t = targets[i];
    for (int k = 0; k < c; ++k) {
      if (!included[k]) continue;
      const double d = (k == t ? a_coef[k] : 0.0) - b_coef[k] * p[k];
      g[k] = static_cast<T>(scale * d);
    }
  }
  r.grad_logits = softmax_backward(probs, r.grad_probs);
  return r;
}

template <typename T>
std::vector<std::uint16_t> argmax_channels(const BasicTensor<T>& scores) {
  const int c = scores.channels();
  const std::size_t n = scores.size() / std::max(c, 1);
  std::vector<std::uint16_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* s = scores.data().data() + i * c;
    out[i] = static_cast<std::uint16_t>(std::max_element(s, s + c) - s);
  }
  return out;
}

#define RANGESEG_INSTANTIATE_LOSSES(T)                                                           \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                         \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template LossResult<T> cross_entropy(const BasicTensor<T>&, std::span<const std::uint16_t>,     \
                                       const LossOptions&);                                       \
  template LossResult<T> dice_loss(const BasicTensor<T>&, std::span<const std::uint16_t>,         \
                                   const LossOptions&);                                           \
  template std::vector<std::uint16_t> argmax_channels(const BasicTensor<T>&);

RANGESEG_INSTANTIATE_LOSSES(float)
RANGESEG_INSTANTIATE_LOSSES(double)

#undef RANGESEG_INSTANTIATE_LOSSES

}  // namespace nn

ConfusionMatrix::ConfusionMatrix(int n_classes)
    : n_(n_classes), counts_(static_cast<std::size_t>(std::max(n_classes, 0)) * std::max(n_classes, 0), 0) {
  if (n_classes < 0) throw std::invalid_argument("confusion matrix: negative class count");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

void ConfusionMatrix::accumulate(std::span<const std::uint16_t> preds,
                                 std::span<const std::uint16_t> targets,
                                 std::optional<int> ignore_index) {
  if (preds.size() != targets.size()) {
    throw std::invalid_argument("confusion matrix: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(targets.size()) + " targets");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (ignore_index && targets[i] == *ignore_index) continue;
    if (targets[i] >= n_ || preds[i] >= n_) {
      throw std::out_of_range("confusion matrix: class id " +
                              std::to_string(std::max(targets[i], preds[i])) + " >= " +
                              std::to_string(n_));
    }
    ++counts_[static_cast<std::size_t>(targets[i]) * n_ + preds[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw std::invalid_argument("confusion matrix: merging different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IouReport miou(const ConfusionMatrix& cm, std::optional<int> exclude_class) {
  const int n = cm.n_classes();
  IouReport r;
  r.per_class.assign(n, std::nullopt);
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < n; ++c) {
    if (exclude_class && c == *exclude_class) continue;
    std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int k = 0; k < n; ++k) {
      if (k == c) continue;
      fp += cm.at(k, c);
      fn += cm.at(c, k);
    }
    const std::uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class[c] = iou;
    sum += iou;
    ++defined;
  }
  if (defined > 0) r.mean = sum / defined;
  return r;
}

}  // namespace rangeseg
