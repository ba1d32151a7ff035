#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "d2rl/rng.hpp"
#include "d2rl/tensor.hpp"

namespace d2rl {

enum class Activation { kIdentity, kSilu, kTanh };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
  std::vector<double> weight;  // input-major: weight[i * out + o]
  std::vector<double> bias;
  std::vector<double> grad_weight;
  std::vector<double> grad_bias;
  // Adam moments, same shapes as the parameters.
  std::vector<double> m_weight, v_weight;
  std::vector<double> m_bias, v_bias;

  double& w(std::size_t i, std::size_t o) { return weight[i * out + o]; }
  double w(std::size_t i, std::size_t o) const { return weight[i * out + o]; }
};

// Per-layer sums of absolute gradients, the quantity logged as
// "gradient weight" and "gradient bias".
struct GradReport {
  std::vector<double> weight_abs_sum;
  std::vector<double> bias_abs_sum;

  double total_weight() const;
  double total_bias() const;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Feed-forward network with hand-written reverse mode. A forward pass can
// record a Trace; backward() consumes a trace, accumulates parameter
// gradients and returns the gradient with respect to the input, which lets
// callers chain several evaluations (e.g. a diffusion chain) end to end.
class Mlp {
 public:
  struct Trace {
    std::vector<RealTensor> inputs;
    std::vector<RealTensor> pre_activations;
  };

  Mlp() = default;
  // widths = {input, hidden..., output}.
  Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t num_layers() const { return layers_.size(); }
  DenseLayer& layer(std::size_t i) { return layers_[i]; }
  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }

  RealTensor forward(const RealTensor& input) const;
  RealTensor forward(const RealTensor& input, Trace& trace) const;
  RealTensor backward(const Trace& trace, const RealTensor& grad_output,
                      bool accumulate_params = true);

  // Stateful convenience pair: forward_record keeps the trace, backward
  // consumes it. backward without a recorded forward throws StateError.
  RealTensor forward_record(const RealTensor& input);
  GradReport backward(const RealTensor& grad_output);

  void zero_grad();
  GradReport grad_report() const;
  bool gradients_finite() const;

  // Flat view over all parameters, layer by layer, weights before biases.
  std::size_t parameter_count() const;
  double& parameter(std::size_t k);
  double parameter(std::size_t k) const;
  double gradient(std::size_t k) const;

  std::size_t step_count() const { return step_count_; }
  void set_step_count(std::size_t n) { step_count_ = n; }

  // Zero every weight and bias of the final layer.
  void zero_output_layer();

  friend void adam_step(Mlp& net, const AdamConfig& cfg);

 private:
  void check_input(const RealTensor& input) const;

  std::vector<DenseLayer> layers_;
  std::size_t step_count_ = 0;
  Trace recorded_;
  bool has_recorded_ = false;
};

// One AdamW step using the accumulated gradients. Throws DivergenceError,
// leaving parameters untouched, if any gradient is non-finite.
void adam_step(Mlp& net, const AdamConfig& cfg);

// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(const Mlp& online, Mlp& target, double tau);

double activate(Activation a, double z);
double activate_derivative(Activation a, double z);

}  // namespace d2rl
