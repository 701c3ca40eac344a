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


#include "rangeseg/nn/ops.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace rangeseg::nn {
namespace {

using rangeseg::testing::dot;
using rangeseg::testing::max_abs_diff;
using rangeseg::testing::numeric_gradient;
using rangeseg::testing::random_kernel;
using rangeseg::testing::random_tensor;
using rangeseg::testing::reference_slc;
using rangeseg::testing::reference_slc_backward;
using rangeseg::testing::relative_error;
using rangeseg::testing::to_vector;

using DTensor = BasicTensor<double>;
using DKernel = BasicSlcKernel<double>;

Tensor row_tensor(std::initializer_list<float> values) {
  Tensor t(1, 1, static_cast<int>(values.size()), 1);
  int w = 0;
  for (float v : values) t(0, 0, w++, 0) = v;
  return t;
}

std::vector<float> row_values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// --- padding ---------------------------------------------------------------

TEST(Pad, CyclicCopiesOppositeColumns) {
  const Tensor p = pad(row_tensor({1, 2, 3, 4}), PadSpec{0, 1, WidthPadding::kCyclic});
  EXPECT_EQ(row_values(p), (std::vector<float>{4, 1, 2, 3, 4, 1}));
}

TEST(Pad, ZerosFillBothEnds) {
  const Tensor p = pad(row_tensor({1, 2, 3, 4}), PadSpec{0, 1, WidthPadding::kZeros});
  EXPECT_EQ(row_values(p), (std::vector<float>{0, 1, 2, 3, 4, 0}));
}

TEST(Pad, ZeroAmountIsIdentity) {
  const Tensor x = row_tensor({1, 2, 3, 4});
  EXPECT_EQ(pad(x, PadSpec{0, 0, WidthPadding::kCyclic}), x);
}

TEST(Pad, HeightIsAlwaysZeroPadded) {
  Tensor x(1, 2, 2, 1, 5.f);
  const Tensor p = pad(x, PadSpec{1, 1, WidthPadding::kCyclic});
  ASSERT_EQ(p.shape(), (Shape4{1, 4, 4, 1}));
  for (int w = 0; w < 4; ++w) {
    EXPECT_EQ(p(0, 0, w, 0), 0.f);
    EXPECT_EQ(p(0, 3, w, 0), 0.f);
    EXPECT_EQ(p(0, 1, w, 0), 5.f);
  }
}

TEST(Pad, CyclicWiderThanInputIsAnError) {
  EXPECT_THROW(pad(row_tensor({1, 2}), PadSpec{0, 3, WidthPadding::kCyclic}), ShapeError);
  EXPECT_NO_THROW(pad(row_tensor({1, 2}), PadSpec{0, 2, WidthPadding::kCyclic}));
  EXPECT_NO_THROW(pad(row_tensor({1, 2}), PadSpec{0, 3, WidthPadding::kZeros}));
  EXPECT_THROW(pad(row_tensor({1, 2}), PadSpec{-1, 0, WidthPadding::kZeros}), ShapeError);
}

TEST(Pad, BackwardIsTheAdjoint) {
  std::mt19937_64 rng(1);
  for (auto mode : {WidthPadding::kZeros, WidthPadding::kCyclic}) {
    const PadSpec spec{2, 3, mode};
    const DTensor x = random_tensor<double>({2, 3, 5, 2}, rng);
    const DTensor px = pad(x, spec);
    const DTensor g = random_tensor<double>(px.shape(), rng);
    const DTensor gx = pad_backward(g, spec, x.shape());
    EXPECT_NEAR(dot(px.data(), g.data()), dot(x.data(), gx.data()), 1e-12);
  }
}

// --- SLC forward ---------------------------------------------------------------

TEST(SlcForward, PerRowComponentScaling) {
  Tensor x(1, 2, 2, 1, 1.f);
  SlcKernel k(1, 1, 1, 1, 2);
  k.w(0, 0, 0, 0, 0) = 2.f;
  k.w(0, 0, 0, 0, 1) = 3.f;
  const Tensor y = slc_forward(x, k, PadSpec{});
  EXPECT_EQ(row_values(y), (std::vector<float>{2, 2, 3, 3}));
}

TEST(SlcForward, IdentityKernelReproducesInput) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor<float>({2, 5, 7, 3}, rng);
  SlcKernel k(3, 3, 3, 3, 1);
  for (int c = 0; c < 3; ++c) k.w(1, 1, c, c) = 1.f;
  for (auto mode : {WidthPadding::kZeros, WidthPadding::kCyclic}) {
    EXPECT_EQ(slc_forward(x, k, PadSpec::same(3, 3, mode)), x);
  }
}

TEST(SlcForward, ComponentIndexFollowsOutputRow) {
  for (int h = 0; h < 8; ++h) {
    EXPECT_EQ(alpha_component(h, 8, 2), h < 4 ? 0 : 1);
    EXPECT_EQ(alpha_component(h, 8, 8), h);
    EXPECT_EQ(alpha_component(h, 8, 1), 0);
  }
  // Non-divisible: floor semantics, the last component takes the remainder.
  std::vector<int> comp;
  for (int h = 0; h < 7; ++h) comp.push_back(alpha_component(h, 7, 3));
  EXPECT_EQ(comp, (std::vector<int>{0, 0, 0, 1, 1, 2, 2}));

  Tensor x(1, 8, 1, 1, 1.f);
  SlcKernel k(1, 1, 1, 1, 8);
  for (int a = 0; a < 8; ++a) k.b(0, a) = static_cast<float>(10 * a);
  const Tensor y = slc_forward(x, k, PadSpec{});
  for (int h = 0; h < 8; ++h) EXPECT_EQ(y(0, h, 0, 0), 10.f * h);
}

struct SlcCase {
  Shape4 shape;
  int kh, kw, cout, alpha, stride;
  WidthPadding mode;
};

class SlcMatchesReference : public ::testing::TestWithParam<SlcCase> {};

TEST_P(SlcMatchesReference, ForwardAndBackward) {
  const SlcCase c = GetParam();
  std::mt19937_64 rng(c.shape[1] * 131 + c.alpha * 7 + c.stride);
  const DTensor x = random_tensor<double>(c.shape, rng);
  const DKernel k = random_kernel<double>(c.kh, c.kw, c.shape[3], c.cout, c.alpha, rng);
  const PadSpec spec = PadSpec::same(c.kh, c.kw, c.mode);
  const bool cyclic = c.mode == WidthPadding::kCyclic;

  const DTensor y = slc_forward(x, k, spec, c.stride);
  const DTensor ref = reference_slc(x, k, spec.rows, spec.cols, cyclic, c.stride);
  EXPECT_LT(max_abs_diff(y, ref), 1e-12);

  const DTensor gy = random_tensor<double>(y.shape(), rng);
  const auto g = slc_backward(x, k, spec, gy, c.stride);
  const auto rg = reference_slc_backward(x, k, spec.rows, spec.cols, cyclic, gy, c.stride);
  EXPECT_LT(max_abs_diff(g.grad_x, rg.grad_x), 1e-12);
  EXPECT_LT((max_abs_diff<double, double>(g.grad_kernel.weights, rg.grad_w)), 1e-12);
  EXPECT_LT((max_abs_diff<double, double>(g.grad_kernel.bias, rg.grad_b)), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, SlcMatchesReference,
    ::testing::Values(SlcCase{{1, 6, 8, 2}, 3, 3, 3, 1, 1, WidthPadding::kCyclic},
                      SlcCase{{1, 6, 8, 2}, 3, 3, 3, 2, 1, WidthPadding::kZeros},
                      SlcCase{{2, 6, 8, 2}, 3, 3, 2, 3, 1, WidthPadding::kCyclic},
                      SlcCase{{1, 5, 9, 3}, 3, 5, 2, 5, 1, WidthPadding::kCyclic},
                      SlcCase{{2, 4, 16, 3}, 5, 5, 4, 2, 1, WidthPadding::kZeros},
                      SlcCase{{1, 4, 16, 2}, 3, 3, 3, 1, 2, WidthPadding::kCyclic},
                      SlcCase{{2, 3, 12, 2}, 3, 3, 2, 3, 2, WidthPadding::kZeros},
                      SlcCase{{1, 7, 600, 2}, 3, 3, 2, 3, 1, WidthPadding::kCyclic},
                      SlcCase{{1, 2, 5, 1}, 1, 1, 1, 2, 1, WidthPadding::kZeros}));

TEST(SlcForward, FloatAgreesWithDoubleReference) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor<float>({2, 16, 32, 8}, rng);
  const SlcKernel k = random_kernel<float>(5, 5, 8, 8, 1, rng);
  const PadSpec spec = PadSpec::same(5, 5, WidthPadding::kCyclic);
  EXPECT_LT(max_abs_diff(slc_forward(x, k, spec), reference_slc(x, k, 2, 2, true)), 1e-5);
}

TEST(SlcForward, GeometryErrors) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor<float>({1, 4, 8, 2}, rng);
  EXPECT_THROW(slc_forward(x, SlcKernel(3, 3, 3, 2, 1), PadSpec::same(3, 3, WidthPadding::kZeros)),
               ShapeError);
  EXPECT_THROW(slc_forward(x, SlcKernel(2, 3, 2, 2, 1), PadSpec{1, 1, WidthPadding::kZeros}),
               ShapeError);
  EXPECT_THROW(slc_forward(x, SlcKernel(3, 3, 2, 2, 5), PadSpec::same(3, 3, WidthPadding::kZeros)),
               ShapeError);
  EXPECT_NO_THROW(
      slc_forward(x, SlcKernel(3, 3, 2, 2, 4), PadSpec::same(3, 3, WidthPadding::kZeros)));
  EXPECT_THROW(SlcKernel(3, 3, 0, 2, 1), ShapeError);
  EXPECT_THROW(slc_forward(x, SlcKernel(1, 1, 2, 2, 1), PadSpec{}, 0), ShapeError);
}

TEST(SlcBackward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor<float>({1, 6, 8, 2}, rng);
  const SlcKernel k = random_kernel<float>(3, 3, 2, 3, 2, rng);
  const PadSpec spec = PadSpec::same(3, 3, WidthPadding::kCyclic);
  const auto g = slc_backward(x, k, spec, Tensor(1, 6, 8, 3));
  for (float v : g.grad_x.data()) EXPECT_EQ(v, 0.f);
  for (float v : g.grad_kernel.weights) EXPECT_EQ(v, 0.f);
  for (float v : g.grad_kernel.bias) EXPECT_EQ(v, 0.f);
}

TEST(SlcBackward, RejectsMismatchedUpstream) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor<float>({1, 6, 8, 2}, rng);
  const SlcKernel k = random_kernel<float>(3, 3, 2, 3, 1, rng);
  EXPECT_THROW(slc_backward(x, k, PadSpec::same(3, 3, WidthPadding::kZeros), Tensor(1, 6, 8, 2)),
               ShapeError);
}

class SlcGradientCheck : public ::testing::TestWithParam<std::tuple<int, WidthPadding, int>> {};

TEST_P(SlcGradientCheck, CentralDifferences) {
  const auto [alpha, mode, stride] = GetParam();
  std::mt19937_64 rng(100 + alpha);
  DTensor x = random_tensor<double>({1, 6, 8, 2}, rng);
  DKernel k = random_kernel<double>(3, 3, 2, 3, alpha, rng);
  const PadSpec spec = PadSpec::same(3, 3, mode);
  const DTensor probe = random_tensor<double>(slc_forward(x, k, spec, stride).shape(), rng);
  auto loss = [&] { return dot(slc_forward(x, k, spec, stride).data(), probe.data()); };

  const auto g = slc_backward(x, k, spec, probe, stride);
  EXPECT_LT(relative_error(g.grad_x.data(), numeric_gradient(x.data(), loss)), 1e-3);
  EXPECT_LT(relative_error(g.grad_kernel.weights, numeric_gradient(k.weights, loss)), 1e-3);
  EXPECT_LT(relative_error(g.grad_kernel.bias, numeric_gradient(k.bias, loss)), 1e-3);
}

INSTANTIATE_TEST_SUITE_P(AlphaModes, SlcGradientCheck,
                         ::testing::Combine(::testing::Values(1, 2, 3, 6),
                                            ::testing::Values(WidthPadding::kZeros,
                                                              WidthPadding::kCyclic),
                                            ::testing::Values(1, 2)));

TEST(SlcParams, CountIsLinearInAlpha) {
  EXPECT_EQ(SlcKernel(3, 3, 2, 4, 2).param_count(), 152u);
  std::size_t prev = 0;
  for (int a = 1; a <= 8; ++a) {
    const std::size_t n = SlcKernel(3, 3, 2, 4, a).param_count();
    EXPECT_EQ(n, static_cast<std::size_t>(a) * (3 * 3 * 2 * 4 + 4));
    EXPECT_GT(n, prev);
    prev = n;
  }
}

TEST(GlorotUniform, BoundedSeededAndZeroBias) {
  SlcKernel a(3, 3, 16, 32, 2), b(3, 3, 16, 32, 2);
  std::mt19937_64 r1(9), r2(9);
  a.bias.assign(a.bias.size(), 1.f);
  glorot_uniform(a, r1);
  glorot_uniform(b, r2);
  EXPECT_EQ(a.weights, b.weights);
  const double limit = std::sqrt(6.0 / (9 * 16 + 9 * 32));
  double max_abs = 0;
  for (float v : a.weights) max_abs = std::max(max_abs, std::abs(static_cast<double>(v)));
  EXPECT_LE(max_abs, limit);
  EXPECT_GT(max_abs, 0.9 * limit);
  for (float v : a.bias) EXPECT_EQ(v, 0.f);
}

// --- plain convolution ---------------------------------------------------------

TEST(Conv, StrideTwoHalvesWidth) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor<float>({1, 3, 8, 2}, rng);
  const SlcKernel k = random_kernel<float>(3, 3, 2, 4, 1, rng);
  const Tensor y = conv_forward(x, k, 2, PadSpec::same(3, 3, WidthPadding::kCyclic));
  EXPECT_EQ(y.shape(), (Shape4{1, 3, 4, 4}));
}

TEST(Conv, UnitIdentityKernel) {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor<float>({2, 3, 5, 3}, rng);
  SlcKernel k(1, 1, 3, 3, 1);
  for (int c = 0; c < 3; ++c) k.w(0, 0, c, c) = 1.f;
  EXPECT_EQ(conv_forward(x, k, 1, PadSpec{}), x);
}

TEST(Conv, AgreesWithSlcAtAlphaOneAndRejectsOthers) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor<float>({2, 6, 10, 3}, rng);
  const SlcKernel k = random_kernel<float>(3, 3, 3, 4, 1, rng);
  const PadSpec spec = PadSpec::same(3, 3, WidthPadding::kCyclic);
  EXPECT_LT(max_abs_diff(conv_forward(x, k, 1, spec), slc_forward(x, k, spec)), 1e-6);
  EXPECT_THROW(conv_forward(x, SlcKernel(3, 3, 3, 4, 2), 1, spec), ShapeError);
  const Tensor gy = random_tensor<float>({2, 6, 10, 4}, rng);
  const auto a = conv_backward(x, k, 1, spec, gy);
  const auto b = slc_backward(x, k, spec, gy);
  EXPECT_EQ(a.grad_x, b.grad_x);
  EXPECT_EQ(a.grad_kernel.weights, b.grad_kernel.weights);
}

// --- upsampling, activations, arithmetic -------------------------------------------

TEST(Upsample, NearestNeighbourAlongWidth) {
  EXPECT_EQ(row_values(upsample_width(row_tensor({1, 2}), 2)), (std::vector<float>{1, 1, 2, 2}));
  EXPECT_EQ(upsample_width(row_tensor({1, 2}), 1), row_tensor({1, 2}));
  EXPECT_THROW(upsample_width(row_tensor({1, 2}), 0), ShapeError);
  EXPECT_THROW(upsample_width_backward(row_tensor({1, 2, 3}), 2), ShapeError);
}

TEST(Upsample, GradientCheck) {
  std::mt19937_64 rng(13);
  DTensor x = random_tensor<double>({2, 3, 4, 2}, rng);
  const DTensor probe = random_tensor<double>({2, 3, 12, 2}, rng);
  auto loss = [&] { return dot(upsample_width(x, 3).data(), probe.data()); };
  EXPECT_LT(relative_error(upsample_width_backward(probe, 3).data(), numeric_gradient(x.data(), loss)),
            1e-3);
}

TEST(Relu, ValuesAndGradient) {
  EXPECT_EQ(row_values(relu(row_tensor({-1, 2, 0}))), (std::vector<float>{0, 2, 0}));
  EXPECT_EQ(row_values(relu_backward(row_tensor({-1, 2, 0}), row_tensor({5, 6, 7}))),
            (std::vector<float>{0, 6, 0}));
  std::mt19937_64 rng(14);
  DTensor x = random_tensor<double>({1, 3, 4, 2}, rng);
  for (auto& v : x.data()) v = v < 0 ? v - 0.05 : v + 0.05;  // keep clear of the kink
  const DTensor probe = random_tensor<double>(x.shape(), rng);
  auto loss = [&] { return dot(relu(x).data(), probe.data()); };
  EXPECT_LT(relative_error(relu_backward(x, probe).data(), numeric_gradient(x.data(), loss)), 1e-3);
}

TEST(Relu, PropagatesNan) {
  const auto y = row_values(relu(row_tensor({std::nanf(""), -1})));
  EXPECT_TRUE(std::isnan(y[0]));
  EXPECT_EQ(y[1], 0.0f);
}

TEST(Add, ElementwiseAndShapeChecked) {
  EXPECT_EQ(row_values(add(row_tensor({1, 2}), row_tensor({3, 5}))), (std::vector<float>{4, 7}));
  EXPECT_THROW(add(row_tensor({1, 2}), row_tensor({1, 2, 3})), ShapeError);
}

TEST(RollWidth, RotatesColumns) {
  EXPECT_EQ(row_values(roll_width(row_tensor({1, 2, 3, 4}), 1)), (std::vector<float>{4, 1, 2, 3}));
  EXPECT_EQ(row_values(roll_width(row_tensor({1, 2, 3, 4}), -1)), (std::vector<float>{2, 3, 4, 1}));
  EXPECT_EQ(roll_width(row_tensor({1, 2, 3, 4}), 4), row_tensor({1, 2, 3, 4}));
}

// --- normalization -------------------------------------------------------------

TEST(BatchNorm, NormalizedStatistics) {
  std::mt19937_64 rng(15);
  const Tensor x = random_tensor<float>({4, 8, 16, 3}, rng, -3.0, 7.0);
  BatchNormState<float> s(3);
  const Tensor y = batch_norm_train<float>(x, s, nullptr);
  const std::size_t n = y.size() / 3;
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < n; ++i) mean += y.data()[i * 3 + c];
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) var += std::pow(y.data()[i * 3 + c] - mean, 2);
    var /= n;
    EXPECT_NEAR(mean, 0.0, 1e-4);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(BatchNorm, RunningStatisticsAndInference) {
  DTensor x(1, 1, 4, 1);
  const double vals[] = {1, 2, 3, 6};
  for (int w = 0; w < 4; ++w) x(0, 0, w, 0) = vals[w];
  BatchNormState<double> s(1);
  batch_norm_train<double>(x, s, nullptr);
  // mean 3, biased var 3.5, unbiased 14/3
  EXPECT_NEAR(s.running_mean[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(s.running_var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
  BatchNormState<double> frozen(1);
  batch_norm_train<double>(x, frozen, nullptr, false);
  EXPECT_EQ(frozen.running_mean[0], 0.0);

  s.gamma[0] = 2.0;
  s.beta[0] = 0.5;
  const DTensor y = batch_norm_infer(x, s);
  for (int w = 0; w < 4; ++w) {
    const double expect = 2.0 * (vals[w] - s.running_mean[0]) / std::sqrt(s.running_var[0] + 1e-5) + 0.5;
    EXPECT_NEAR(y(0, 0, w, 0), expect, 1e-12);
  }
}

TEST(BatchNorm, GradientCheck) {
  std::mt19937_64 rng(16);
  DTensor x = random_tensor<double>({2, 3, 4, 3}, rng);
  BatchNormState<double> s(3);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& g : s.gamma) g = u(rng);
  for (auto& b : s.beta) b = u(rng) - 1.0;
  const DTensor probe = random_tensor<double>(x.shape(), rng);
  auto loss = [&] {
    BatchNormState<double> copy = s;
    return dot(batch_norm_train<double>(x, copy, nullptr).data(), probe.data());
  };
  BatchNormCache<double> cache;
  BatchNormState<double> run = s;
  batch_norm_train(x, run, &cache);
  const auto g = batch_norm_backward(cache, s, probe);
  EXPECT_LT(relative_error(g.grad_x.data(), numeric_gradient(x.data(), loss)), 1e-3);
  EXPECT_LT(relative_error(g.grad_gamma, numeric_gradient(s.gamma, loss)), 1e-3);
  EXPECT_LT(relative_error(g.grad_beta, numeric_gradient(s.beta, loss)), 1e-3);
}

TEST(BatchNorm, ChannelMismatch) {
  BatchNormState<float> s(2);
  EXPECT_THROW(batch_norm_train<float>(Tensor(1, 1, 1, 3), s, nullptr), ShapeError);
}

// --- equivariance ------------------------------------------------------------------

// Four stride-1 layers: conv, norm, relu, conv, relu, conv, norm, conv.
DTensor small_stack(const DTensor& x, const std::vector<DKernel>& ks, WidthPadding mode) {
  DTensor h = x;
  for (std::size_t l = 0; l < ks.size(); ++l) {
    h = slc_forward(h, ks[l], PadSpec::same(ks[l].kh, ks[l].kw, mode));
    if (l % 2 == 0) {
      BatchNormState<double> s(h.channels());
      h = batch_norm_train<double>(h, s, nullptr);
    }
    if (l + 1 < ks.size()) h = relu(h);
  }
  return h;
}

TEST(CyclicEquivariance, HoldsWithCyclicPaddingOnly) {
  std::mt19937_64 rng(17);
  const int W = 24;
  const DTensor x = random_tensor<double>({1, 6, W, 2}, rng);
  std::vector<DKernel> ks{random_kernel<double>(3, 3, 2, 4, 2, rng),
                          random_kernel<double>(3, 5, 4, 4, 1, rng),
                          random_kernel<double>(3, 3, 4, 4, 3, rng),
                          random_kernel<double>(1, 3, 4, 2, 1, rng)};
  const DTensor base_c = small_stack(x, ks, WidthPadding::kCyclic);
  const DTensor base_z = small_stack(x, ks, WidthPadding::kZeros);
  for (int s : {1, 7, W / 2}) {
    const DTensor shifted = roll_width(x, s);
    EXPECT_LT(max_abs_diff(small_stack(shifted, ks, WidthPadding::kCyclic), roll_width(base_c, s)),
              1e-10)
        << "shift " << s;
    EXPECT_GT(max_abs_diff(small_stack(shifted, ks, WidthPadding::kZeros), roll_width(base_z, s)),
              1e-3)
        << "shift " << s;
  }
}

}  // namespace
}  // namespace rangeseg::nn
