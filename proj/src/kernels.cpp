#include "d2rl/kernels.hpp"

#include <cstdint>

#include "d2rl/errors.hpp"

namespace d2rl::kernels {

namespace {

constexpr std::size_t kParallelWork = 1 << 15;

void check(LinearDims d, std::size_t a, std::size_t b, std::size_t c) {
  if (a != d.batch * d.in || b != d.in * d.out || c != d.batch * d.out) {
    throw ShapeError("linear kernel: buffer sizes do not match dimensions");
  }
}

inline void forward_row(LinearDims d, const double* x, const double* w,
                        const double* bias, double* y) {
  for (std::size_t o = 0; o < d.out; ++o) y[o] = bias[o];
  for (std::size_t i = 0; i < d.in; ++i) {
    const double xi = x[i];
    const double* wi = w + i * d.out;
#pragma omp simd
    for (std::size_t o = 0; o < d.out; ++o) y[o] += xi * wi[o];
  }
}

inline void backward_input_row(LinearDims d, const double* dy, const double* w,
                               double* dx) {
  for (std::size_t i = 0; i < d.in; ++i) {
    const double* wi = w + i * d.out;
    double acc = 0.0;
    for (std::size_t o = 0; o < d.out; ++o) acc += dy[o] * wi[o];
    dx[i] = acc;
  }
}

inline void backward_weight_row(LinearDims d, std::size_t i, const double* x,
                                const double* dy, double* dw_row) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double xbi = x[b * d.in + i];
    if (xbi == 0.0) continue;
    const double* dyb = dy + b * d.out;
#pragma omp simd
    for (std::size_t o = 0; o < d.out; ++o) dw_row[o] += xbi * dyb[o];
  }
}

inline void backward_bias(LinearDims d, const double* dy, double* dbias) {
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* dyb = dy + b * d.out;
    for (std::size_t o = 0; o < d.out; ++o) dbias[o] += dyb[o];
  }
}

}  // namespace

namespace serial {

void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  check(d, x.size(), w.size(), y.size());
  for (std::size_t b = 0; b < d.batch; ++b) {
    forward_row(d, x.data() + b * d.in, w.data(), bias.data(), y.data() + b * d.out);
  }
}

void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  check(d, dx.size(), w.size(), dy.size());
  for (std::size_t b = 0; b < d.batch; ++b) {
    backward_input_row(d, dy.data() + b * d.out, w.data(), dx.data() + b * d.in);
  }
}

void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias) {
  check(d, x.size(), dw.size(), dy.size());
  for (std::size_t i = 0; i < d.in; ++i) {
    backward_weight_row(d, i, x.data(), dy.data(), dw.data() + i * d.out);
  }
  backward_bias(d, dy.data(), dbias.data());
}

}  // namespace serial

namespace parallel {

void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  check(d, x.size(), w.size(), y.size());
  const auto batch = static_cast<std::int64_t>(d.batch);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < batch; ++b) {
    forward_row(d, x.data() + b * d.in, w.data(), bias.data(), y.data() + b * d.out);
  }
}

void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  check(d, dx.size(), w.size(), dy.size());
  const auto batch = static_cast<std::int64_t>(d.batch);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < batch; ++b) {
    backward_input_row(d, dy.data() + b * d.out, w.data(), dx.data() + b * d.in);
  }
}

void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias) {
  check(d, x.size(), dw.size(), dy.size());
  const auto in = static_cast<std::int64_t>(d.in);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < in; ++i) {
    backward_weight_row(d, static_cast<std::size_t>(i), x.data(), dy.data(),
                        dw.data() + i * d.out);
  }
  backward_bias(d, dy.data(), dbias.data());
}

}  // namespace parallel

void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  if (d.batch * d.in * d.out >= kParallelWork && d.batch > 1) {
    parallel::linear_forward(d, x, w, bias, y);
  } else {
    serial::linear_forward(d, x, w, bias, y);
  }
}

void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  if (d.batch * d.in * d.out >= kParallelWork && d.batch > 1) {
    parallel::linear_backward_input(d, dy, w, dx);
  } else {
    serial::linear_backward_input(d, dy, w, dx);
  }
}

void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias) {
  if (d.batch * d.in * d.out >= kParallelWork && d.in > 1) {
    parallel::linear_backward_params(d, x, dy, dw, dbias);
  } else {
    serial::linear_backward_params(d, x, dy, dw, dbias);
  }
}

}  // namespace d2rl::kernels
