#include <gtest/gtest.h>

#include <cmath>

#include "d2rl/complex_matrix.hpp"
#include "d2rl/errors.hpp"
#include "d2rl/kernels.hpp"
#include "d2rl/mlp.hpp"
#include "d2rl/tensor.hpp"
#include "fd_check.hpp"

namespace d2rl {
namespace {

RealTensor random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
  RealTensor t = RealTensor::matrix(rows, cols);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

TEST(Tensor, ShapeAndRowViews) {
  RealTensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
  EXPECT_EQ(RealTensor::vector({1, 2}).rows(), 1u);
  EXPECT_THROW(RealTensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ConcatColumnsAndGather) {
  RealTensor a({2, 1}, {1, 2});
  RealTensor b({2, 2}, {3, 4, 5, 6});
  RealTensor empty;
  const RealTensor c = RealTensor::hconcat({&a, &empty, &b});
  EXPECT_EQ(c.data(), (std::vector<double>{1, 3, 4, 2, 5, 6}));
  EXPECT_EQ(c.columns(1, 2).data(), b.data());
  const std::size_t idx[] = {1, 0};
  EXPECT_EQ(b.gather_rows(idx).data(), (std::vector<double>{5, 6, 3, 4}));
  RealTensor short_rows({1, 1}, {0});
  EXPECT_THROW(RealTensor::hconcat({&a, &short_rows}), ShapeError);
}

TEST(ComplexMatrix, OuterProductAndHermitian) {
  const ComplexVector u{{1, 1}, {0, 2}};
  const ComplexVector v{{3, 0}, {1, -1}};
  const ComplexMatrix m = ComplexMatrix::outer(u, v);
  // (u v^H)(0, 1) = u0 * conj(v1)
  EXPECT_EQ(m(0, 1), Complex(1, 1) * std::conj(Complex(1, -1)));
  EXPECT_EQ(m.hermitian()(1, 0), std::conj(m(0, 1)));
  EXPECT_NEAR(std::abs(inner(u, u) - Complex(squared_norm(u), 0)), 0.0, 1e-15);
}

TEST(ComplexMatrix, QuadraticFormOfHermitianIsReal) {
  Rng rng(1);
  ComplexMatrix a(3, 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) a(r, c) = {rng.normal(), rng.normal()};
  }
  const ComplexMatrix h = matmul(a, a.hermitian());
  ComplexVector w{{1, 2}, {-1, 0.5}, {0.3, -0.7}};
  const ComplexVector hw = matvec(h, w);
  EXPECT_NEAR(quadratic_form(w, h), inner(w, hw).real(), 1e-12);
  EXPECT_GE(quadratic_form(w, h), 0.0);
  ComplexMatrix skew(1, 1);
  skew(0, 0) = {0, 1};
  EXPECT_THROW(quadratic_form(ComplexVector{{1, 0}}, skew), std::domain_error);
}

// The OpenMP kernels must reproduce the serial reference exactly.
TEST(Kernels, ParallelMatchesSerialBitForBit) {
  Rng rng(2);
  for (auto [batch, in, out] : {std::array<std::size_t, 3>{1, 7, 5},
                                {33, 64, 17},
                                {256, 128, 64}}) {
    kernels::LinearDims d{batch, in, out};
    std::vector<double> x(batch * in), w(in * out), b(out), dy(batch * out);
    for (auto* v : {&x, &w, &b, &dy}) {
      for (auto& e : *v) e = rng.normal();
    }
    std::vector<double> y1(batch * out), y2(batch * out);
    kernels::serial::linear_forward(d, x, w, b, y1);
    kernels::parallel::linear_forward(d, x, w, b, y2);
    EXPECT_EQ(y1, y2);
    std::vector<double> dx1(batch * in), dx2(batch * in);
    kernels::serial::linear_backward_input(d, dy, w, dx1);
    kernels::parallel::linear_backward_input(d, dy, w, dx2);
    EXPECT_EQ(dx1, dx2);
    std::vector<double> dw1(in * out, 0.5), dw2(in * out, 0.5), db1(out, 0.25), db2(out, 0.25);
    kernels::serial::linear_backward_params(d, x, dy, dw1, db1);
    kernels::parallel::linear_backward_params(d, x, dy, dw2, db2);
    EXPECT_EQ(dw1, dw2);
    EXPECT_EQ(db1, db2);
  }
}

TEST(Kernels, ForwardMatchesNaiveLoop) {
  Rng rng(3);
  kernels::LinearDims d{4, 3, 2};
  std::vector<double> x(12), w(6), b(2), y(8);
  for (auto* v : {&x, &w, &b}) {
    for (auto& e : *v) e = rng.normal();
  }
  kernels::linear_forward(d, x, w, b, y);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 3; ++i) acc += x[r * 3 + i] * w[i * 2 + o];
      EXPECT_NEAR(y[r * 2 + o], acc, 1e-14);
    }
  }
}

TEST(Mlp, FiniteDifferenceGradients) {
  for (Activation hidden : {Activation::kSilu, Activation::kTanh}) {
    Rng rng(4);
    Mlp net({5, 8, 8, 3}, hidden, Activation::kIdentity, rng);
    const RealTensor x = random_batch(6, 5, rng);
    const RealTensor c = random_batch(6, 3, rng);
    auto loss = [&]() {
      const RealTensor y = net.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i] * y[i];
      return s;
    };
    net.zero_grad();
    Mlp::Trace trace;
    const RealTensor y = net.forward(x, trace);
    RealTensor g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = 2.0 * c[i] * y[i];
    net.backward(trace, g);
    EXPECT_LT(testing::worst_fd_error(net, loss, 100, rng), 1e-4);
  }
}

TEST(Mlp, InputGradientMatchesFiniteDifference) {
  Rng rng(5);
  Mlp net({4, 6, 2}, Activation::kSilu, Activation::kTanh, rng);
  RealTensor x = random_batch(1, 4, rng);
  Mlp::Trace trace;
  net.forward(x, trace);
  const RealTensor gx = net.backward(trace, RealTensor({1, 2}, {1.0, -2.0}), false);
  for (std::size_t i = 0; i < 4; ++i) {
    const double h = 1e-6;
    RealTensor up = x, down = x;
    up[i] += h;
    down[i] -= h;
    const RealTensor yu = net.forward(up), yd = net.forward(down);
    const double numeric = ((yu[0] - 2.0 * yu[1]) - (yd[0] - 2.0 * yd[1])) / (2.0 * h);
    EXPECT_LT(testing::rel_error(gx[i], numeric), 1e-6);
  }
}

TEST(Mlp, BackwardWithoutForwardIsAStateError) {
  Rng rng(6);
  Mlp net({2, 2}, Activation::kIdentity, Activation::kIdentity, rng);
  EXPECT_THROW(net.backward(RealTensor({1, 2}, {1, 1})), StateError);
  net.forward_record(RealTensor({1, 2}, {1, 1}));
  EXPECT_NO_THROW(net.backward(RealTensor({1, 2}, {1, 1})));
  EXPECT_THROW(net.backward(RealTensor({1, 2}, {1, 1})), StateError);
}

TEST(Mlp, WrongInputWidthIsAShapeError) {
  Rng rng(7);
  Mlp net({3, 2}, Activation::kIdentity, Activation::kIdentity, rng);
  EXPECT_THROW(net.forward(RealTensor({1, 2}, {1, 1})), ShapeError);
}

TEST(Mlp, GradReportSumsAbsoluteGradients) {
  Rng rng(8);
  Mlp net({2, 3, 1}, Activation::kSilu, Activation::kIdentity, rng);
  net.forward_record(random_batch(4, 2, rng));
  const GradReport r = net.backward(RealTensor({4, 1}, {1, -1, 0.5, 2}));
  ASSERT_EQ(r.weight_abs_sum.size(), 2u);
  double w0 = 0.0;
  for (double g : net.layer(0).grad_weight) w0 += std::abs(g);
  EXPECT_DOUBLE_EQ(r.weight_abs_sum[0], w0);
  EXPECT_DOUBLE_EQ(r.total_weight(), r.weight_abs_sum[0] + r.weight_abs_sum[1]);
  for (double v : r.bias_abs_sum) EXPECT_GE(v, 0.0);
}

// One AdamW step on a single weight, stepped by hand.
TEST(Adam, MatchesHandSteppedUpdate) {
  Rng rng(9);
  Mlp net({1, 1}, Activation::kIdentity, Activation::kIdentity, rng);
  net.layer(0).weight = {0.5};
  net.layer(0).bias = {0.0};
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * t;
    net.zero_grad();
    net.layer(0).grad_weight = {g};
    adam_step(net, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    w -= 0.1 * 0.01 * w;
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(net.layer(0).weight[0], w, 1e-15);
  }
  EXPECT_EQ(net.step_count(), 3u);
}

TEST(Adam, NonFiniteGradientThrowsAndLeavesParameters) {
  Rng rng(10);
  Mlp net({2, 1}, Activation::kIdentity, Activation::kIdentity, rng);
  const auto before = net.layer(0).weight;
  net.layer(0).grad_weight[0] = std::nan("");
  EXPECT_THROW(adam_step(net, AdamConfig{}), DivergenceError);
  EXPECT_EQ(net.layer(0).weight, before);
}

TEST(SoftUpdate, ElementwiseContract) {
  Rng rng(11);
  Mlp online({4, 5, 2}, Activation::kSilu, Activation::kIdentity, rng);
  Mlp target({4, 5, 2}, Activation::kSilu, Activation::kIdentity, rng);
  const Mlp before = target;
  soft_update(online, target, 0.005);
  for (std::size_t k = 0; k < online.parameter_count(); ++k) {
    EXPECT_NEAR(target.parameter(k), 0.005 * online.parameter(k) + 0.995 * before.parameter(k),
                1e-15);
  }
  Mlp same = before;
  soft_update(online, same, 0.0);
  for (std::size_t k = 0; k < online.parameter_count(); ++k) EXPECT_EQ(same.parameter(k), before.parameter(k));
  soft_update(online, same, 1.0);
  for (std::size_t k = 0; k < online.parameter_count(); ++k) EXPECT_EQ(same.parameter(k), online.parameter(k));
  Mlp other({4, 3, 2}, Activation::kSilu, Activation::kIdentity, rng);
  EXPECT_THROW(soft_update(online, other, 0.5), ShapeError);
}

TEST(Rng, StateRoundTrip) {
  Rng a(12);
  a.normal();
  const std::string saved = a.save_state();
  const double x = a.normal(), y = a.uniform();
  Rng b;
  b.load_state(saved);
  EXPECT_EQ(b.normal(), x);
  EXPECT_EQ(b.uniform(), y);
}

}  // namespace
}  // namespace d2rl
