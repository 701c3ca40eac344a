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

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "rangeseg/nn/ops.hpp"

namespace rangeseg::nn {

namespace {

template <typename T>
void check_kernel(const BasicSlcKernel<T>& k) {
  if (k.kh < 1 || k.kw < 1 || k.kh % 2 == 0 || k.kw % 2 == 0) {
    throw ShapeError("kernel sizes must be odd and positive, got " + std::to_string(k.kh) + "x" +
                     std::to_string(k.kw));
  }
  if (k.alpha < 1) throw ShapeError("kernel alpha must be >= 1");
  if (k.weights.size() != static_cast<std::size_t>(k.kh) * k.kw * k.in_channels * k.out_channels *
                              k.alpha ||
      k.bias.size() != static_cast<std::size_t>(k.out_channels) * k.alpha) {
    throw ShapeError("kernel storage does not match its declared shape");
  }
}

struct ConvGeometry {
  int out_h;
  int out_w;
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, const PadSpec& pad,
                           int stride_w) {
  check_kernel(k);
  if (stride_w < 1) throw ShapeError("stride must be >= 1");
  if (x.channels() != k.in_channels) {
    throw ShapeError("input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                     std::to_string(k.in_channels));
  }
  const int hp = x.height() + 2 * pad.rows;
  const int wp = x.width() + 2 * pad.cols;
  if (hp < k.kh || wp < k.kw) throw ShapeError("input smaller than kernel after padding");
  ConvGeometry g{hp - k.kh + 1, (wp - k.kw) / stride_w + 1};
  if (k.alpha > g.out_h) {
    throw ShapeError("alpha " + std::to_string(k.alpha) + " exceeds output height " +
                     std::to_string(g.out_h));
  }
  return g;
}

// [alpha][kh][kw][in][out]: output channels contiguous for the forward pass
// and the weight gradient.
template <typename T>
std::vector<T> pack_alpha_major(const BasicSlcKernel<T>& k) {
  std::vector<T> out(k.weights.size());
  std::size_t n = 0;
  for (int a = 0; a < k.alpha; ++a)
    for (int i = 0; i < k.kh; ++i)
      for (int j = 0; j < k.kw; ++j)
        for (int ci = 0; ci < k.in_channels; ++ci)
          for (int co = 0; co < k.out_channels; ++co) out[n++] = k.w(i, j, ci, co, a);
  return out;
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Consecutive output rows sharing one kernel component.
struct ComponentRun {
  int component;
  int first;
  int last;  // exclusive
};

std::vector<ComponentRun> component_runs(int out_h, int alpha) {
  std::vector<ComponentRun> runs;
  for (int h = 0; h < out_h; ++h) {
    const int a = alpha_component(h, out_h, alpha);
    if (runs.empty() || runs.back().component != a) {
      runs.push_back({a, h, h + 1});
    } else {
      runs.back().last = h + 1;
    }
  }
  return runs;
}

constexpr int kChunkPixels = 256;

// One row per output pixel in [p0, p1) of the run (row-major over h, w),
// holding its receptive field in [kh][kw][in] order.
template <typename T>
void im2col(const BasicTensor<T>& xp, const BasicSlcKernel<T>& k, int b, int first_row, int out_w,
            int stride_w, int p0, int p1, RowMatrix<T>& col) {
  const int cin = k.in_channels;
  col.resize(p1 - p0, k.kh * k.kw * cin);
  T* dst = col.data();
  for (int p = p0; p < p1; ++p) {
    const int h = first_row + p / out_w, w = p % out_w;
    for (int i = 0; i < k.kh; ++i) {
      const T* src = xp.pixel(b, h + i, w * stride_w);
      const int span = k.kw * cin;
      std::copy_n(src, span, dst);
      dst += span;
    }
  }
}

template <typename T>
void col2im(const RowMatrix<T>& col, const BasicSlcKernel<T>& k, int b, int first_row, int out_w,
            int stride_w, int p0, int p1, BasicTensor<T>& gxp) {
  const int span = k.kw * k.in_channels;
  const T* src = col.data();
  for (int p = p0; p < p1; ++p) {
    const int h = first_row + p / out_w, w = p % out_w;
    for (int i = 0; i < k.kh; ++i) {
      T* g = gxp.pixel(b, h + i, w * stride_w);
      for (int q = 0; q < span; ++q) g[q] += src[q];
      src += span;
    }
  }
}

}  // namespace

void glorot_uniform(SlcKernel& k, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(k.kh) * k.kw * k.in_channels;
  const double fan_out = static_cast<double>(k.kh) * k.kw * k.out_channels;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : k.weights) v = static_cast<float>(dist(rng));
  std::fill(k.bias.begin(), k.bias.end(), 0.f);
}

template <typename T>
BasicTensor<T> pad(const BasicTensor<T>& x, const PadSpec& spec) {
  if (spec.rows < 0 || spec.cols < 0) throw ShapeError("padding amounts must be non-negative");
  const int h = x.height(), w = x.width(), c = x.channels();
  if (spec.width_mode == WidthPadding::kCyclic && spec.cols > w) {
    throw ShapeError("cyclic padding of " + std::to_string(spec.cols) +
                     " columns exceeds width " + std::to_string(w));
  }
  if (spec.rows == 0 && spec.cols == 0) return x;
  const int hp = h + 2 * spec.rows, wp = w + 2 * spec.cols;
  BasicTensor<T> out(x.batch(), hp, wp, c);
  for (int b = 0; b < x.batch(); ++b) {
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < wp; ++q) {
        int src = q - spec.cols;
        if (spec.width_mode == WidthPadding::kCyclic) {
          src = ((src % w) + w) % w;
        } else if (src < 0 || src >= w) {
          continue;
        }
        std::copy_n(x.pixel(b, r, src), c, out.pixel(b, r + spec.rows, q));
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pad_backward(const BasicTensor<T>& grad_padded, const PadSpec& spec,
                            const Shape4& input_shape) {
  const int h = input_shape[1], w = input_shape[2], c = input_shape[3];
  if (grad_padded.batch() != input_shape[0] || grad_padded.height() != h + 2 * spec.rows ||
      grad_padded.width() != w + 2 * spec.cols || grad_padded.channels() != c) {
    throw ShapeError("pad_backward: gradient " + shape_string(grad_padded.shape()) +
                     " does not match input " + shape_string(input_shape));
  }
  if (spec.rows == 0 && spec.cols == 0) return grad_padded;
  BasicTensor<T> out(input_shape);
  for (int b = 0; b < input_shape[0]; ++b) {
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < grad_padded.width(); ++q) {
        int src = q - spec.cols;
        if (spec.width_mode == WidthPadding::kCyclic) {
          src = ((src % w) + w) % w;
        } else if (src < 0 || src >= w) {
          continue;
        }
        const T* g = grad_padded.pixel(b, r + spec.rows, q);
        T* dst = out.pixel(b, r, src);
        for (int k = 0; k < c; ++k) dst[k] += g[k];
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> slc_forward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, const PadSpec& spec,
                           int stride_w) {
  const auto g = conv_geometry(x, k, spec, stride_w);
  const BasicTensor<T> xp = pad(x, spec);
  const std::vector<T> wpk = pack_alpha_major(k);
  const int cout = k.out_channels;
  const int depth = k.kh * k.kw * k.in_channels;

  BasicTensor<T> y(x.batch(), g.out_h, g.out_w, cout);
  RowMatrix<T> col;
  for (const auto& run : component_runs(g.out_h, k.alpha)) {
    ConstMatrixMap<T> wa(wpk.data() + static_cast<std::size_t>(run.component) * depth * cout, depth,
                         cout);
    Eigen::Matrix<T, 1, Eigen::Dynamic> bias(cout);
    for (int co = 0; co < cout; ++co) bias[co] = k.b(co, run.component);
    const int n_pixels = (run.last - run.first) * g.out_w;
    for (int b = 0; b < x.batch(); ++b) {
      T* base = y.pixel(b, run.first, 0);
      for (int p0 = 0; p0 < n_pixels; p0 += kChunkPixels) {
        const int p1 = std::min(n_pixels, p0 + kChunkPixels);
        im2col(xp, k, b, run.first, g.out_w, stride_w, p0, p1, col);
        MatrixMap<T> out(base + static_cast<std::size_t>(p0) * cout, p1 - p0, cout);
        out.noalias() = col * wa;
        out.rowwise() += bias;
      }
    }
  }
  return y;
}

template <typename T>
SlcGradients<T> slc_backward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k,
                             const PadSpec& spec, const BasicTensor<T>& grad_y, int stride_w) {
  const auto g = conv_geometry(x, k, spec, stride_w);
  const int cin = k.in_channels, cout = k.out_channels;
  if (grad_y.shape() != Shape4{x.batch(), g.out_h, g.out_w, cout}) {
    throw ShapeError("slc_backward: upstream gradient " + shape_string(grad_y.shape()) +
                     " does not match forward output " +
                     shape_string({x.batch(), g.out_h, g.out_w, cout}));
  }
  const BasicTensor<T> xp = pad(x, spec);
  const std::vector<T> wpk = pack_alpha_major(k);
  const int depth = k.kh * k.kw * cin;

  BasicTensor<T> gxp(xp.shape());
  std::vector<T> gw(k.weights.size(), T{0});                          // alpha-major packing
  std::vector<T> gb(static_cast<std::size_t>(k.alpha) * cout, T{0});  // [alpha][out]
  RowMatrix<T> col, gcol;
  for (const auto& run : component_runs(g.out_h, k.alpha)) {
    const std::size_t abase = static_cast<std::size_t>(run.component) * depth * cout;
    ConstMatrixMap<T> wa(wpk.data() + abase, depth, cout);
    MatrixMap<T> gwa(gw.data() + abase, depth, cout);
    T* gba = gb.data() + static_cast<std::size_t>(run.component) * cout;
    const int n_pixels = (run.last - run.first) * g.out_w;
    for (int b = 0; b < x.batch(); ++b) {
      const T* base = grad_y.pixel(b, run.first, 0);
      for (int p0 = 0; p0 < n_pixels; p0 += kChunkPixels) {
        const int p1 = std::min(n_pixels, p0 + kChunkPixels);
        im2col(xp, k, b, run.first, g.out_w, stride_w, p0, p1, col);
        ConstMatrixMap<T> gy(base + static_cast<std::size_t>(p0) * cout, p1 - p0, cout);
        for (int r = 0; r < p1 - p0; ++r) {
          const T* row = base + static_cast<std::size_t>(p0 + r) * cout;
          for (int co = 0; co < cout; ++co) gba[co] += row[co];
        }
        gwa.noalias() += col.transpose() * gy;
        gcol.noalias() = gy * wa.transpose();
        col2im(gcol, k, b, run.first, g.out_w, stride_w, p0, p1, gxp);
      }
    }
  }

  SlcGradients<T> out{pad_backward(gxp, spec, x.shape()),
                      BasicSlcKernel<T>(k.kh, k.kw, cin, cout, k.alpha)};
  std::size_t n = 0;
  for (int a = 0; a < k.alpha; ++a)
    for (int i = 0; i < k.kh; ++i)
      for (int j = 0; j < k.kw; ++j)
        for (int ci = 0; ci < cin; ++ci)
          for (int co = 0; co < cout; ++co) out.grad_kernel.w(i, j, ci, co, a) = gw[n++];
  for (int a = 0; a < k.alpha; ++a)
    for (int co = 0; co < cout; ++co)
      out.grad_kernel.b(co, a) = gb[static_cast<std::size_t>(a) * cout + co];
  return out;
}

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, int stride_w,
                            const PadSpec& pad) {
  if (k.alpha != 1) throw ShapeError("conv_forward expects a kernel with alpha 1");
  return slc_forward(x, k, pad, stride_w);
}

template <typename T>
SlcGradients<T> conv_backward(const BasicTensor<T>& x, const BasicSlcKernel<T>& k, int stride_w,
                              const PadSpec& pad, const BasicTensor<T>& grad_y) {
  if (k.alpha != 1) throw ShapeError("conv_backward expects a kernel with alpha 1");
  return slc_backward(x, k, pad, grad_y, stride_w);
}

template <typename T>
BasicTensor<T> upsample_width(const BasicTensor<T>& x, int factor) {
  if (factor < 1) throw ShapeError("upsample factor must be >= 1");
  const int c = x.channels();
  BasicTensor<T> y(x.batch(), x.height(), x.width() * factor, c);
  for (int b = 0; b < x.batch(); ++b)
    for (int h = 0; h < x.height(); ++h)
      for (int w = 0; w < y.width(); ++w) std::copy_n(x.pixel(b, h, w / factor), c, y.pixel(b, h, w));
  return y;
}

template <typename T>
BasicTensor<T> upsample_width_backward(const BasicTensor<T>& grad_y, int factor) {
  if (factor < 1) throw ShapeError("upsample factor must be >= 1");
  if (grad_y.width() % factor != 0) throw ShapeError("gradient width not divisible by factor");
  const int c = grad_y.channels();
  BasicTensor<T> gx(grad_y.batch(), grad_y.height(), grad_y.width() / factor, c);
  for (int b = 0; b < grad_y.batch(); ++b)
    for (int h = 0; h < grad_y.height(); ++h)
      for (int w = 0; w < grad_y.width(); ++w) {
        const T* g = grad_y.pixel(b, h, w);
        T* dst = gx.pixel(b, h, w / factor);
        for (int k = 0; k < c; ++k) dst[k] += g[k];
      }
  return gx;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] < T{0} ? T{0} : in[i];
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_y) {
  require_same_shape(x, grad_y, "relu_backward");
  BasicTensor<T> gx(x.shape());
  auto in = x.data();
  auto g = grad_y.data();
  auto out = gx.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{0} ? g[i] : T{0};
  return gx;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  return y;
}

template <typename T>
BasicTensor<T> roll_width(const BasicTensor<T>& x, int shift) {
  const int w = x.width();
  BasicTensor<T> y(x.shape());
  if (w == 0) return y;
  for (int b = 0; b < x.batch(); ++b)
    for (int h = 0; h < x.height(); ++h)
      for (int q = 0; q < w; ++q) {
        const int src = (((q - shift) % w) + w) % w;
        std::copy_n(x.pixel(b, h, src), x.channels(), y.pixel(b, h, q));
      }
  return y;
}

template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x, BatchNormState<T>& s,
                                BatchNormCache<T>* cache, bool update_running) {
  const int c = x.channels();
  if (c != s.channels()) throw ShapeError("batch_norm: channel count mismatch");
  const std::size_t n = x.size() / std::max(c, 1);
  if (n == 0) throw ShapeError("batch_norm: empty batch");

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  auto in = x.data();
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) mean[k] += in[p * c + k];
  for (int k = 0; k < c; ++k) mean[k] /= static_cast<double>(n);
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) {
      const double d = in[p * c + k] - mean[k];
      var[k] += d * d;
    }
  for (int k = 0; k < c; ++k) var[k] /= static_cast<double>(n);

  std::vector<T> inv_std(c), scale(c), shift(c);
  for (int k = 0; k < c; ++k) {
    inv_std[k] = static_cast<T>(1.0 / std::sqrt(var[k] + static_cast<double>(s.eps)));
  }

  BasicTensor<T> y(x.shape());
  BasicTensor<T> xhat;
  if (cache) xhat = BasicTensor<T>(x.shape());
  auto out = y.data();
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) {
      const T xh = static_cast<T>(in[p * c + k] - mean[k]) * inv_std[k];
      if (cache) xhat.data()[p * c + k] = xh;
      out[p * c + k] = s.gamma[k] * xh + s.beta[k];
    }

  if (update_running) {
    const double unbias = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
    for (int k = 0; k < c; ++k) {
      s.running_mean[k] = (T{1} - s.momentum) * s.running_mean[k] + s.momentum * static_cast<T>(mean[k]);
      s.running_var[k] =
          (T{1} - s.momentum) * s.running_var[k] + s.momentum * static_cast<T>(var[k] * unbias);
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BatchNormState<T>& s) {
  const int c = x.channels();
  if (c != s.channels()) throw ShapeError("batch_norm: channel count mismatch");
  std::vector<T> scale(c), shift(c);
  for (int k = 0; k < c; ++k) {
    scale[k] = s.gamma[k] / std::sqrt(s.running_var[k] + s.eps);
    shift[k] = s.beta[k] - s.running_mean[k] * scale[k];
  }
  BasicTensor<T> y(x.shape());
  const std::size_t n = x.size() / std::max(c, 1);
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) y.data()[p * c + k] = x.data()[p * c + k] * scale[k] + shift[k];
  return y;
}

template <typename T>
BatchNormGradients<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                          const BatchNormState<T>& s,
                                          const BasicTensor<T>& grad_y) {
  require_same_shape(cache.xhat, grad_y, "batch_norm_backward");
  const int c = grad_y.channels();
  const std::size_t n = grad_y.size() / std::max(c, 1);
  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  auto g = grad_y.data();
  auto xh = cache.xhat.data();
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) {
      sum_g[k] += g[p * c + k];
      sum_gx[k] += static_cast<double>(g[p * c + k]) * xh[p * c + k];
    }
  BatchNormGradients<T> out{BasicTensor<T>(grad_y.shape()), std::vector<T>(c), std::vector<T>(c)};
  std::vector<T> mg(c), mgx(c), coef(c);
  for (int k = 0; k < c; ++k) {
    out.grad_gamma[k] = static_cast<T>(sum_gx[k]);
    out.grad_beta[k] = static_cast<T>(sum_g[k]);
    mg[k] = static_cast<T>(sum_g[k] / static_cast<double>(n));
    mgx[k] = static_cast<T>(sum_gx[k] / static_cast<double>(n));
    coef[k] = s.gamma[k] * cache.inv_std[k];
  }
  auto gx = out.grad_x.data();
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) {
      gx[p * c + k] = coef[k] * (g[p * c + k] - mg[k] - xh[p * c + k] * mgx[k]);
    }
  return out;
}

#define RANGESEG_INSTANTIATE_OPS(T)                                                               \
  template BasicTensor<T> pad(const BasicTensor<T>&, const PadSpec&);                              \
  template BasicTensor<T> pad_backward(const BasicTensor<T>&, const PadSpec&, const Shape4&);      \
  template BasicTensor<T> slc_forward(const BasicTensor<T>&, const BasicSlcKernel<T>&,             \
                                      const PadSpec&, int);                                        \
  template SlcGradients<T> slc_backward(const BasicTensor<T>&, const BasicSlcKernel<T>&,           \
                                        const PadSpec&, const BasicTensor<T>&, int);               \
  template BasicTensor<T> conv_forward(const BasicTensor<T>&, const BasicSlcKernel<T>&, int,       \
                                       const PadSpec&);                                            \
  template SlcGradients<T> conv_backward(const BasicTensor<T>&, const BasicSlcKernel<T>&, int,     \
                                         const PadSpec&, const BasicTensor<T>&);                   \
  template BasicTensor<T> upsample_width(const BasicTensor<T>&, int);                              \
  template BasicTensor<T> upsample_width_backward(const BasicTensor<T>&, int);                     \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                             \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> roll_width(const BasicTensor<T>&, int);                                  \
  template BasicTensor<T> batch_norm_train(const BasicTensor<T>&, BatchNormState<T>&,              \
                                           BatchNormCache<T>*, bool);                              \
  template BasicTensor<T> batch_norm_infer(const BasicTensor<T>&, const BatchNormState<T>&);       \
  template BatchNormGradients<T> batch_norm_backward(const BatchNormCache<T>&,                     \
                                                     const BatchNormState<T>&,                     \
                                                     const BasicTensor<T>&);

RANGESEG_INSTANTIATE_OPS(float)
RANGESEG_INSTANTIATE_OPS(double)

#undef RANGESEG_INSTANTIATE_OPS

}  // namespace rangeseg::nn
