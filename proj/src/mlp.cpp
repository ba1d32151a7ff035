#include "d2rl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "d2rl/errors.hpp"
#include "d2rl/kernels.hpp"

namespace d2rl {

double GradReport::total_weight() const {
  return std::accumulate(weight_abs_sum.begin(), weight_abs_sum.end(), 0.0);
}

double GradReport::total_bias() const {
  return std::accumulate(bias_abs_sum.begin(), bias_abs_sum.end(), 0.0);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kSilu:
      return z / (1.0 + std::exp(-z));
    case Activation::kTanh:
      return std::tanh(z);
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kSilu: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output,
         Rng& rng) {
  if (widths.size() < 2) throw ShapeError("Mlp needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.activation = (l + 2 == widths.size()) ? output : hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weight.resize(layer.in * layer.out);
    for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
    layer.bias.resize(layer.out);
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    layer.grad_weight.assign(layer.weight.size(), 0.0);
    layer.grad_bias.assign(layer.bias.size(), 0.0);
    layer.m_weight.assign(layer.weight.size(), 0.0);
    layer.v_weight.assign(layer.weight.size(), 0.0);
    layer.m_bias.assign(layer.bias.size(), 0.0);
    layer.v_bias.assign(layer.bias.size(), 0.0);
    layers_.push_back(std::move(layer));
  }
}

std::size_t Mlp::input_width() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t Mlp::output_width() const { return layers_.empty() ? 0 : layers_.back().out; }

void Mlp::check_input(const RealTensor& input) const {
  if (layers_.empty()) throw StateError("Mlp has no layers");
  if (input.cols() != input_width()) {
    throw ShapeError("Mlp input width " + std::to_string(input.cols()) +
                     " does not match network input width " +
                     std::to_string(input_width()));
  }
}

RealTensor Mlp::forward(const RealTensor& input) const {
  Trace scratch;
  return forward(input, scratch);
}

RealTensor Mlp::forward(const RealTensor& input, Trace& trace) const {
  check_input(input);
  const std::size_t batch = input.rows();
  trace.inputs.resize(layers_.size());
  trace.pre_activations.resize(layers_.size());
  RealTensor current = input.rank() == 2 ? input : RealTensor({1, input.cols()}, input.data());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    RealTensor z = RealTensor::matrix(batch, layer.out);
    kernels::linear_forward({batch, layer.in, layer.out}, current.data(), layer.weight,
                            layer.bias, z.data());
    RealTensor a = z;
    if (layer.activation != Activation::kIdentity) {
      for (auto& v : a.data()) v = activate(layer.activation, v);
    }
    trace.inputs[l] = std::move(current);
    trace.pre_activations[l] = std::move(z);
    current = std::move(a);
  }
  return current;
}

RealTensor Mlp::backward(const Trace& trace, const RealTensor& grad_output,
                         bool accumulate_params) {
  if (trace.inputs.size() != layers_.size()) throw StateError("backward: trace does not match network");
  const std::size_t batch = trace.inputs.front().rows();
  if (grad_output.size() != batch * output_width()) {
    throw ShapeError("backward: gradient shape does not match network output");
  }
  RealTensor grad = RealTensor({batch, output_width()}, grad_output.data());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    DenseLayer& layer = layers_[l];
    if (layer.activation != Activation::kIdentity) {
      const auto& z = trace.pre_activations[l].data();
      auto& g = grad.data();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= activate_derivative(layer.activation, z[k]);
    }
    const kernels::LinearDims dims{batch, layer.in, layer.out};
    if (accumulate_params) {
      kernels::linear_backward_params(dims, trace.inputs[l].data(), grad.data(),
                                      layer.grad_weight, layer.grad_bias);
    }
    RealTensor grad_in = RealTensor::matrix(batch, layer.in);
    kernels::linear_backward_input(dims, grad.data(), layer.weight, grad_in.data());
    grad = std::move(grad_in);
  }
  return grad;
}

RealTensor Mlp::forward_record(const RealTensor& input) {
  RealTensor out = forward(input, recorded_);
  has_recorded_ = true;
  return out;
}

GradReport Mlp::backward(const RealTensor& grad_output) {
  if (!has_recorded_) throw StateError("backward called without a recorded forward pass");
  backward(recorded_, grad_output, true);
  has_recorded_ = false;
  return grad_report();
}

void Mlp::zero_grad() {
  for (auto& layer : layers_) {
    std::fill(layer.grad_weight.begin(), layer.grad_weight.end(), 0.0);
    std::fill(layer.grad_bias.begin(), layer.grad_bias.end(), 0.0);
  }
}

GradReport Mlp::grad_report() const {
  GradReport report;
  for (const auto& layer : layers_) {
    double w = 0.0;
    for (double g : layer.grad_weight) w += std::abs(g);
    double b = 0.0;
    for (double g : layer.grad_bias) b += std::abs(g);
    report.weight_abs_sum.push_back(w);
    report.bias_abs_sum.push_back(b);
  }
  return report;
}

bool Mlp::gradients_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::all_of(layers_.begin(), layers_.end(), [&](const DenseLayer& l) {
    return finite(l.grad_weight) && finite(l.grad_bias);
  });
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

double& Mlp::parameter(std::size_t k) {
  for (auto& layer : layers_) {
    if (k < layer.weight.size()) return layer.weight[k];
    k -= layer.weight.size();
    if (k < layer.bias.size()) return layer.bias[k];
    k -= layer.bias.size();
  }
  throw std::out_of_range("parameter index out of range");
}

double Mlp::parameter(std::size_t k) const { return const_cast<Mlp*>(this)->parameter(k); }

double Mlp::gradient(std::size_t k) const {
  for (const auto& layer : layers_) {
    if (k < layer.grad_weight.size()) return layer.grad_weight[k];
    k -= layer.grad_weight.size();
    if (k < layer.grad_bias.size()) return layer.grad_bias[k];
    k -= layer.grad_bias.size();
  }
  throw std::out_of_range("gradient index out of range");
}

void Mlp::zero_output_layer() {
  if (layers_.empty()) return;
  auto& last = layers_.back();
  std::fill(last.weight.begin(), last.weight.end(), 0.0);
  std::fill(last.bias.begin(), last.bias.end(), 0.0);
}

namespace {

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, const AdamConfig& cfg,
                 double correction1, double correction2) {
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    param[k] -= cfg.learning_rate * cfg.weight_decay * param[k];
    param[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace

void adam_step(Mlp& net, const AdamConfig& cfg) {
  if (!net.gradients_finite()) throw DivergenceError("adam_step: non-finite gradient");
  net.step_count_ += 1;
  const double t = static_cast<double>(net.step_count_);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& layer : net.layers_) {
    adam_update(layer.weight, layer.grad_weight, layer.m_weight, layer.v_weight, cfg, c1, c2);
    adam_update(layer.bias, layer.grad_bias, layer.m_bias, layer.v_bias, cfg, c1, c2);
  }
}

void soft_update(const Mlp& online, Mlp& target, double tau) {
  if (online.num_layers() != target.num_layers()) throw ShapeError("soft_update: layer count differs");
  for (std::size_t l = 0; l < online.num_layers(); ++l) {
    const DenseLayer& src = online.layer(l);
    DenseLayer& dst = target.layer(l);
    if (src.in != dst.in || src.out != dst.out) throw ShapeError("soft_update: layer shape differs");
    for (std::size_t k = 0; k < src.weight.size(); ++k) {
      dst.weight[k] = tau * src.weight[k] + (1.0 - tau) * dst.weight[k];
    }
    for (std::size_t k = 0; k < src.bias.size(); ++k) {
      dst.bias[k] = tau * src.bias[k] + (1.0 - tau) * dst.bias[k];
    }
  }
}

}  // namespace d2rl
