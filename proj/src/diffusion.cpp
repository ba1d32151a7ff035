#include "d2rl/diffusion.hpp"

#include <cmath>
#include <string>

#include "d2rl/errors.hpp"

namespace d2rl {

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas) {
  DiffusionSchedule s;
  double running = 1.0;
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("diffusion: every beta must lie in (0, 1)");
    const double prev = running;
    const double a = 1.0 - b;
    running *= a;
    s.beta_.push_back(b);
    s.alpha_.push_back(a);
    s.alpha_bar_.push_back(running);
    s.posterior_variance_.push_back((1.0 - prev) / (1.0 - running) * b);
  }
  return s;
}

DiffusionSchedule DiffusionSchedule::linear(std::size_t steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("diffusion: step count must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ConfigError("diffusion: need 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_min + (beta_max - beta_min) * frac;
  }
  return from_betas(std::move(betas));
}

DiffusionSchedule DiffusionSchedule::degenerate() { return DiffusionSchedule{}; }

DiffusionSchedule make_schedule(std::size_t steps, double beta_min, double beta_max) {
  return DiffusionSchedule::linear(steps, beta_min, beta_max);
}

std::array<double, kStepEmbeddingWidth> step_embedding(std::size_t p) {
  const double t = static_cast<double>(p);
  return {std::sin(t), std::cos(t), std::sin(0.1 * t), std::cos(0.1 * t)};
}

NoisePredictor::NoisePredictor(std::size_t sample_width, std::size_t cond_width,
                               std::size_t hidden_width, std::size_t hidden_layers, Rng& rng)
    : sample_width_(sample_width), cond_width_(cond_width) {
  std::vector<std::size_t> widths{sample_width + kStepEmbeddingWidth + cond_width};
  for (std::size_t i = 0; i < hidden_layers; ++i) widths.push_back(hidden_width);
  widths.push_back(sample_width);
  net_ = Mlp(widths, Activation::kSilu, Activation::kIdentity, rng);
}

NoisePredictor::NoisePredictor(Mlp net, std::size_t sample_width, std::size_t cond_width)
    : net_(std::move(net)), sample_width_(sample_width), cond_width_(cond_width) {
  if (net_.input_width() != sample_width + kStepEmbeddingWidth + cond_width ||
      net_.output_width() != sample_width) {
    throw ShapeError("NoisePredictor: network widths do not match sample/conditioning widths");
  }
}

RealTensor NoisePredictor::predict(const RealTensor& x, std::span<const std::size_t> steps,
                                   const RealTensor& cond, Mlp::Trace* trace) const {
  const std::size_t batch = x.rows();
  if (x.cols() != sample_width_) throw ShapeError("NoisePredictor: sample width mismatch");
  if (steps.size() != batch) throw ShapeError("NoisePredictor: one step index per row required");
  if (cond.cols() != cond_width_ || (cond_width_ > 0 && cond.rows() != batch)) {
    throw ShapeError("NoisePredictor: conditioning shape mismatch");
  }
  const std::size_t width = sample_width_ + kStepEmbeddingWidth + cond_width_;
  RealTensor input = RealTensor::matrix(batch, width);
  for (std::size_t r = 0; r < batch; ++r) {
    auto dst = input.row(r);
    auto xs = x.row(r);
    std::copy(xs.begin(), xs.end(), dst.begin());
    const auto code = step_embedding(steps[r]);
    std::copy(code.begin(), code.end(), dst.begin() + sample_width_);
    if (cond_width_ > 0) {
      auto cs = cond.row(r);
      std::copy(cs.begin(), cs.end(), dst.begin() + sample_width_ + kStepEmbeddingWidth);
    }
  }
  if (trace != nullptr) return net_.forward(input, *trace);
  return net_.forward(input);
}

RealTensor NoisePredictor::backward(const Mlp::Trace& trace, const RealTensor& grad_eps) {
  RealTensor grad_in = net_.backward(trace, grad_eps, true);
  return grad_in.columns(0, sample_width_);
}

RealTensor forward_step(const RealTensor& x_prev, std::size_t p, const DiffusionSchedule& sched,
                        Rng& rng) {
  const double keep = std::sqrt(1.0 - sched.beta(p));
  const double noise = std::sqrt(sched.beta(p));
  RealTensor out = x_prev;
  for (auto& v : out.data()) v = keep * v + noise * rng.normal();
  return out;
}

std::pair<RealTensor, RealTensor> forward_jump(const RealTensor& x0, std::size_t p,
                                               const DiffusionSchedule& sched, Rng& rng) {
  if (p < 1 || p > sched.steps()) throw std::out_of_range("forward_jump: step out of range");
  const double keep = std::sqrt(sched.alpha_bar(p));
  const double noise = std::sqrt(1.0 - sched.alpha_bar(p));
  RealTensor eps(x0.shape());
  for (auto& v : eps.data()) v = rng.normal();
  RealTensor xp = x0;
  for (std::size_t i = 0; i < xp.size(); ++i) xp[i] = keep * x0[i] + noise * eps[i];
  return {std::move(xp), std::move(eps)};
}

namespace {

RealTensor as_batch(const RealTensor& x) {
  if (x.rank() == 2) return x;
  return RealTensor({1, x.cols()}, x.data());
}

void check_finite(const RealTensor& x, const char* what) {
  if (!x.all_finite()) throw DivergenceError(std::string(what) + ": non-finite sample");
}

// One reverse update in place; optionally records the predictor trace.
RealTensor reverse_update(const RealTensor& x_p, std::size_t p, const RealTensor& cond,
                          const NoisePredictor& net, const DiffusionSchedule& sched, Rng& rng,
                          Mlp::Trace* trace, RealTensor* contribution = nullptr) {
  const std::vector<std::size_t> steps(x_p.rows(), p);
  const RealTensor eps = net.predict(x_p, steps, cond, trace);
  const double a = sched.alpha(p);
  const double c1 = 1.0 / std::sqrt(a);
  const double c2 = sched.beta(p) / std::sqrt(a * (1.0 - sched.alpha_bar(p)));
  const double sigma = p > 1 ? std::sqrt(sched.beta(p)) : 0.0;
  RealTensor out = x_p;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c1 * x_p[i] - c2 * eps[i];
    if (sigma > 0.0) out[i] += sigma * rng.normal();
  }
  if (contribution != nullptr) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      (*contribution)[i] = c1 * (*contribution)[i] - c2 * eps[i];
    }
  }
  return out;
}

}  // namespace

RealTensor reverse_step(const RealTensor& x_p, std::size_t p, const RealTensor& cond,
                        const NoisePredictor& net, const DiffusionSchedule& sched, Rng& rng) {
  if (p < 1 || p > sched.steps()) throw std::out_of_range("reverse_step: step out of range");
  return reverse_update(as_batch(x_p), p, cond, net, sched, rng, nullptr);
}

RealTensor run_reverse_chain(const RealTensor& x_start, const RealTensor& cond,
                             const NoisePredictor& net, const DiffusionSchedule& sched, Rng& rng,
                             ChainRecord* record) {
  RealTensor x = as_batch(x_start);
  RealTensor* contribution = nullptr;
  if (record != nullptr) {
    record->traces.clear();
    record->traces.resize(sched.steps());
    record->net_contribution = RealTensor(x.shape(), 0.0);
    contribution = &record->net_contribution;
  }
  for (std::size_t p = sched.steps(); p >= 1; --p) {
    Mlp::Trace* trace = record != nullptr ? &record->traces[sched.steps() - p] : nullptr;
    x = reverse_update(x, p, cond, net, sched, rng, trace, contribution);
    check_finite(x, "reverse chain");
  }
  return x;
}

RealTensor sample_chain(const RealTensor& cond, std::size_t batch, const NoisePredictor& net,
                        const DiffusionSchedule& sched, Rng& rng, ChainRecord* record) {
  RealTensor x = RealTensor::matrix(batch, net.sample_width());
  for (auto& v : x.data()) v = rng.normal();
  return run_reverse_chain(x, cond, net, sched, rng, record);
}

RealTensor chain_backward(NoisePredictor& net, const DiffusionSchedule& sched,
                          const ChainRecord& record, const RealTensor& grad_x0) {
  if (record.traces.size() != sched.steps()) throw StateError("chain_backward: record does not match schedule");
  RealTensor grad = as_batch(grad_x0);
  // Walk p = 1 .. P, i.e. the record in reverse.
  for (std::size_t p = 1; p <= sched.steps(); ++p) {
    const Mlp::Trace& trace = record.traces[sched.steps() - p];
    const double a = sched.alpha(p);
    const double c1 = 1.0 / std::sqrt(a);
    const double c2 = sched.beta(p) / std::sqrt(a * (1.0 - sched.alpha_bar(p)));
    RealTensor grad_eps = grad;
    for (auto& v : grad_eps.data()) v *= -c2;
    RealTensor through_net = net.backward(trace, grad_eps);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = c1 * grad[i] + through_net[i];
  }
  return grad;
}

double denoise_loss(const RealTensor& x0_in, const RealTensor& cond, NoisePredictor& net,
                    const DiffusionSchedule& sched, Rng& rng, bool accumulate) {
  const RealTensor x0 = as_batch(x0_in);
  const std::size_t batch = x0.rows();
  if (batch == 0) return 0.0;
  std::vector<std::size_t> steps(batch);
  for (auto& p : steps) p = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(sched.steps())));
  RealTensor eps(x0.shape());
  for (auto& v : eps.data()) v = rng.normal();
  RealTensor xp = x0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double keep = std::sqrt(sched.alpha_bar(steps[r]));
    const double noise = std::sqrt(1.0 - sched.alpha_bar(steps[r]));
    auto dst = xp.row(r);
    auto e = eps.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = keep * dst[c] + noise * e[c];
  }
  Mlp::Trace trace;
  const RealTensor pred = net.predict(xp, steps, cond, accumulate ? &trace : nullptr);
  double loss = 0.0;
  RealTensor grad(pred.shape());
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = eps[i] - pred[i];
    loss += diff * diff;
    grad[i] = -2.0 * diff * inv_batch;
  }
  loss *= inv_batch;
  if (!std::isfinite(loss)) throw DivergenceError("denoise_loss: non-finite loss");
  if (accumulate) net.backward(trace, grad);
  return loss;
}

double mode2_train_step(NoisePredictor& net, const DiffusionSchedule& sched, const RealTensor& x0,
                        const RealTensor& cond, const AdamConfig& adam, Rng& rng) {
  net.net().zero_grad();
  const double loss = denoise_loss(x0, cond, net, sched, rng, true);
  adam_step(net.net(), adam);
  return loss;
}

RealTensor mode2_generate(const NoisePredictor& net, const DiffusionSchedule& sched,
                          const RealTensor& x0, const RealTensor& cond, Rng& rng) {
  if (sched.steps() == 0) return as_batch(x0);
  auto [noisy, eps] = forward_jump(as_batch(x0), sched.steps(), sched, rng);
  (void)eps;
  return run_reverse_chain(noisy, cond, net, sched, rng);
}

Mode1Result mode1_policy_grad_step(NoisePredictor& net, const DiffusionSchedule& sched,
                                   const RealTensor& cond, std::size_t batch, const QHook& q,
                                   const AdamConfig& adam, Rng& rng, ChainOutput output) {
  Mode1Result result;
  net.net().zero_grad();
  ChainRecord record;
  RealTensor x0;
  try {
    x0 = sample_chain(cond, batch, net, sched, rng, &record);
  } catch (const DivergenceError&) {
    result.skipped = true;
    return result;
  }
  const RealTensor& seen = output == ChainOutput::kSample ? x0 : record.net_contribution;
  RealTensor dq(seen.shape());
  const std::vector<double> values = q(seen, dq);
  double mean_q = 0.0;
  for (double v : values) mean_q += v;
  mean_q /= static_cast<double>(values.size());
  result.loss = -mean_q;
  if (!std::isfinite(result.loss) || !dq.all_finite()) {
    result.skipped = true;
    return result;
  }
  RealTensor grad = dq;
  const double scale = -1.0 / static_cast<double>(batch);
  for (auto& v : grad.data()) v *= scale;
  chain_backward(net, sched, record, grad);
  result.grads = net.net().grad_report();
  if (!net.net().gradients_finite()) {
    result.skipped = true;
    return result;
  }
  adam_step(net.net(), adam);
  return result;
}

}  // namespace d2rl
