#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind every linear layer. Weights are stored input-major,
// w[i * out + o], so the forward and weight-gradient inner loops run over
// contiguous output columns.
//
// Each kernel exists twice: a plain serial reference and an OpenMP version
// that splits the outer loop across threads. Both call the same per-row
// routine, so every output element is accumulated in the same order and the
// two agree bit for bit regardless of thread count.
namespace d2rl::kernels {

struct LinearDims {
  std::size_t batch;
  std::size_t in;
  std::size_t out;
};

namespace serial {

// y[b, o] = bias[o] + sum_i x[b, i] w[i, o]
void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
// dx[b, i] = sum_o dy[b, o] w[i, o]
void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx);
// dw[i, o] += sum_b x[b, i] dy[b, o];  dbias[o] += sum_b dy[b, o]
void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias);

}  // namespace serial

namespace parallel {

void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx);
void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias);

}  // namespace parallel

// Dispatch used by the networks: parallel above a work threshold.
void linear_forward(LinearDims d, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void linear_backward_input(LinearDims d, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx);
void linear_backward_params(LinearDims d, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw,
                            std::span<double> dbias);

}  // namespace d2rl::kernels
