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

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rangeseg/common.hpp"

namespace rangeseg::nn {

using Shape4 = std::array<int, 4>;  // [batch, height, width, channels]

inline std::string shape_string(const Shape4& s) {
  return "[" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
         "," + std::to_string(s[3]) + "]";
}

/// Dense NHWC tensor with contiguous row-major storage.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(int b, int h, int w, int c, T fill = T{0}) : BasicTensor(Shape4{b, h, w, c}, fill) {}
  explicit BasicTensor(const Shape4& shape, T fill = T{0}) : shape_(shape) {
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative tensor dimension in " + shape_string(shape));
    }
    data_.assign(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3], fill);
  }

  const Shape4& shape() const { return shape_; }
  int batch() const { return shape_[0]; }
  int height() const { return shape_[1]; }
  int width() const { return shape_[2]; }
  int channels() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t offset(int b, int h, int w, int c = 0) const {
    return ((static_cast<std::size_t>(b) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }

  T& operator()(int b, int h, int w, int c) { return data_[offset(b, h, w, c)]; }
  const T& operator()(int b, int h, int w, int c) const { return data_[offset(b, h, w, c)]; }

  /// Channel vector of one pixel.
  T* pixel(int b, int h, int w) { return data_.data() + offset(b, h, w); }
  const T* pixel(int b, int h, int w) const { return data_.data() + offset(b, h, w); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape4 shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename U, typename T>
BasicTensor<U> tensor_cast(const BasicTensor<T>& x) {
  BasicTensor<U> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = static_cast<U>(x.data()[i]);
  return out;
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace rangeseg::nn
