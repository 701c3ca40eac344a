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
#include <optional>
#include <span>
#include <vector>

#include "rangeseg/nn/tensor.hpp"

namespace rangeseg {

inline constexpr int kUnlabeled = 0;

namespace nn {

struct LossOptions {
  /// Pixels with this target are left out of every sum; the class itself is
  /// also left out of the Dice class mean. nullopt scores every pixel.
  std::optional<int> ignore_index = kUnlabeled;
  /// Per-class cross-entropy weights; empty means uniform.
  std::vector<double> class_weights;
  /// Dice smoothing. 0 keeps the exact form and drops classes whose
  /// denominator vanishes instead.
  double dice_epsilon = 0.0;
};

template <typename T>
struct LossResult {
  T value = T{0};
  BasicTensor<T> grad_probs;
  BasicTensor<T> grad_logits;
  std::size_t n_scored = 0;
  bool degenerate = false;  // nothing to score; value defined as 0
};

/// Max-shifted softmax over the channel axis.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs);

/// CE = -(1/n) sum_i w[t_i] log max(p[i, t_i], 1e-12) over the n scored
/// pixels. `targets` holds one class id per pixel in B, H, W order.
template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& probs, std::span<const std::uint16_t> targets,
                            const LossOptions& opts = {});

/// DL = 1 - (1/C') sum_c 2 sum_i t_ic p_ic / (sum_i t_ic^2 + sum_i p_ic^2)
/// over the C' classes with a non-zero denominator.
template <typename T>
LossResult<T> dice_loss(const BasicTensor<T>& probs, std::span<const std::uint16_t> targets,
                        const LossOptions& opts = {});

/// Per-pixel argmax over channels (first maximum wins).
template <typename T>
std::vector<std::uint16_t> argmax_channels(const BasicTensor<T>& scores);

}  // namespace nn

/// Counts indexed [ground truth][prediction].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes = 0);

  int n_classes() const { return n_; }
  std::uint64_t at(int truth, int pred) const {
    return counts_[static_cast<std::size_t>(truth) * n_ + pred];
  }
  std::uint64_t total() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// Elements whose target equals `ignore_index` are skipped. Throws
  /// std::out_of_range for ids >= n_classes and std::invalid_argument for
  /// length mismatches.
  void accumulate(std::span<const std::uint16_t> preds, std::span<const std::uint16_t> targets,
                  std::optional<int> ignore_index = kUnlabeled);
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int n_ = 0;
  std::vector<std::uint64_t> counts_;
};

struct IouReport {
  std::vector<std::optional<double>> per_class;  // nullopt: empty union or excluded
  std::optional<double> mean;                    // nullopt: no class defined
};

/// IoU_c = TP / (TP + FP + FN); the mean runs over classes with a non-empty
/// union other than `exclude_class`.
IouReport miou(const ConfusionMatrix& cm, std::optional<int> exclude_class = kUnlabeled);

}  // namespace rangeseg
