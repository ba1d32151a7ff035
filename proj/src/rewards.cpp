#include "d2rl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "d2rl/errors.hpp"

namespace d2rl {

std::string variant_name(RewardVariant v) {
  switch (v) {
    case RewardVariant::kRaw: return "raw";
    case RewardVariant::kDesigned: return "designed";
    case RewardVariant::kDesignedMlp: return "designed_mlp";
    case RewardVariant::kGdm: return "gdm";
    case RewardVariant::kDesignedGdm: return "designed_gdm";
  }
  return "raw";
}

RewardVariant parse_variant(const std::string& name) {
  for (auto v : {RewardVariant::kRaw, RewardVariant::kDesigned, RewardVariant::kDesignedMlp,
                 RewardVariant::kGdm, RewardVariant::kDesignedGdm}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown reward variant '" + name + "'");
}

double raw_reward(const RateReport& report) { return report.sum_rate; }

double upper_bound(const ChannelState& s, const EnvConfig& cfg) {
  double bound = 0.0;
  for (const auto& g : s.downlink_channels) {
    bound += std::log2(1.0 + squared_norm(g) * cfg.max_bs_power / cfg.noise_downlink);
  }
  for (const auto& h : s.uplink_channels) {
    bound += std::log2(1.0 + cfg.max_user_power * squared_norm(h) / cfg.noise_uplink);
  }
  return bound;
}

double designed_reward(const RateReport& report, double bound) { return report.sum_rate - bound; }

double soft_clamp(double x, double c) { return c * std::tanh(x / c); }

double soft_clamp_derivative(double x, double c) {
  const double t = std::tanh(x / c);
  return 1.0 - t * t;
}

namespace {

RealTensor single_row(std::span<const double> v) {
  return RealTensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
}

}  // namespace

RewardShaper::RewardShaper(std::size_t state_width, std::size_t action_width,
                           std::size_t hidden_width, std::size_t hidden_layers, double clamp,
                           Rng& rng)
    : clamp_(clamp) {
  if (!(clamp > 0.0)) throw ConfigError("reward clamp must be > 0");
  std::vector<std::size_t> widths{state_width + action_width + 1};
  for (std::size_t i = 0; i < hidden_layers; ++i) widths.push_back(hidden_width);
  widths.push_back(1);
  body_ = Mlp(widths, Activation::kSilu, Activation::kIdentity, rng);
}

RewardShaper RewardShaper::passthrough(std::size_t state_width, std::size_t action_width,
                                       std::size_t hidden_width, std::size_t hidden_layers,
                                       double clamp, Rng& rng) {
  RewardShaper s(state_width, action_width, hidden_width, hidden_layers, clamp, rng);
  s.body_.zero_output_layer();
  s.passthrough_ = 1.0;
  return s;
}

RewardShaper RewardShaper::zero(std::size_t state_width, std::size_t action_width,
                                std::size_t hidden_width, std::size_t hidden_layers, double clamp,
                                Rng& rng) {
  RewardShaper s(state_width, action_width, hidden_width, hidden_layers, clamp, rng);
  for (std::size_t l = 0; l < s.body_.num_layers(); ++l) {
    auto& layer = s.body_.layer(l);
    std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  s.passthrough_ = 0.0;
  return s;
}

RealTensor RewardShaper::body_input(const RealTensor& states, const RealTensor& actions,
                                    std::span<const double> base) const {
  if (base.size() != states.rows()) throw ShapeError("RewardShaper: one base value per row");
  RealTensor b({base.size(), 1}, std::vector<double>(base.begin(), base.end()));
  return RealTensor::hconcat({&states, &actions, &b});
}

double RewardShaper::evaluate(std::span<const double> state, std::span<const double> action,
                              double base) const {
  const double b[1] = {base};
  return evaluate(single_row(state), single_row(action), b).front();
}

std::vector<double> RewardShaper::evaluate(const RealTensor& states, const RealTensor& actions,
                                           std::span<const double> base) const {
  const RealTensor out = body_.forward(body_input(states, actions, base));
  std::vector<double> r(base.size());
  for (std::size_t j = 0; j < r.size(); ++j) {
    r[j] = passthrough_ * base[j] + soft_clamp(out[j], clamp_);
  }
  return r;
}

GradReport RewardShaper::train_step(const RealTensor& states, const RealTensor& actions,
                                    std::span<const double> base,
                                    std::span<const double> quality, const AdamConfig& adam) {
  if (quality.size() != base.size()) throw ShapeError("RewardShaper: one quality value per row");
  body_.zero_grad();
  Mlp::Trace trace;
  const RealTensor out = body_.forward(body_input(states, actions, base), trace);
  RealTensor grad(out.shape());
  const double scale = -1.0 / static_cast<double>(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    grad[j] = scale * quality[j] * soft_clamp_derivative(out[j], clamp_);
  }
  body_.backward(trace, grad, true);
  GradReport report = body_.grad_report();
  adam_step(body_, adam);
  return report;
}

double mlp_shaped_reward(std::span<const double> state, std::span<const double> action,
                         double base, const RewardShaper& shaper) {
  return shaper.evaluate(state, action, base);
}

GdmReward::GdmReward(std::size_t state_width, std::size_t action_width, std::size_t hidden_width,
                     std::size_t hidden_layers, bool residual, double clamp,
                     bool condition_on_rate, Rng& rng)
    : net_(1, state_width + action_width + (condition_on_rate ? 1 : 0), hidden_width,
           hidden_layers, rng),
      residual_(residual),
      clamp_(clamp),
      condition_on_rate_(condition_on_rate) {
  if (!(clamp > 0.0)) throw ConfigError("reward clamp must be > 0");
  if (residual_) net_.net().zero_output_layer();
}

RealTensor GdmReward::conditioning(const RealTensor& states, const RealTensor& actions,
                                   std::span<const double> rates) const {
  if (!condition_on_rate_) return RealTensor::hconcat({&states, &actions});
  if (rates.size() != states.rows()) throw ShapeError("GdmReward: one rate per row");
  RealTensor c({rates.size(), 1}, std::vector<double>(rates.begin(), rates.end()));
  return RealTensor::hconcat({&states, &actions, &c});
}

std::vector<double> GdmReward::evaluate(const RealTensor& cond, const DiffusionSchedule& sched,
                                        Rng& rng) const {
  const std::size_t batch = cond.rows();
  std::vector<double> r(batch);
  if (residual_) {
    ChainRecord record;
    sample_chain(cond, batch, net_, sched, rng, &record);
    for (std::size_t j = 0; j < batch; ++j) r[j] = soft_clamp(record.net_contribution[j], clamp_);
  } else {
    const RealTensor x0 = sample_chain(cond, batch, net_, sched, rng);
    for (std::size_t j = 0; j < batch; ++j) r[j] = soft_clamp(x0[j], clamp_);
  }
  return r;
}

Mode1Result GdmReward::train_step(const RealTensor& cond, std::span<const double> quality,
                                  const DiffusionSchedule& sched, const AdamConfig& adam,
                                  Rng& rng) {
  if (quality.size() != cond.rows()) throw ShapeError("GdmReward: one quality value per row");
  const double c = clamp_;
  QHook hook = [&quality, c](const RealTensor& x, RealTensor& grad) {
    std::vector<double> values(x.rows());
    for (std::size_t j = 0; j < values.size(); ++j) {
      values[j] = soft_clamp(x[j], c) * quality[j];
      grad[j] = soft_clamp_derivative(x[j], c) * quality[j];
    }
    return values;
  };
  return mode1_policy_grad_step(net_, sched, cond, cond.rows(), hook, adam, rng,
                                residual_ ? ChainOutput::kNetContribution : ChainOutput::kSample);
}

double gdm_reward(std::span<const double> state, std::span<const double> action, double rate,
                  const GdmReward& renpnn, const DiffusionSchedule& sched, Rng& rng) {
  const double c[1] = {rate};
  const RealTensor cond = renpnn.conditioning(single_row(state), single_row(action), c);
  return renpnn.evaluate(cond, sched, rng).front();
}

double designed_plus_gdm_reward(std::span<const double> state, std::span<const double> action,
                                const RateReport& report, double bound, const GdmReward& renpnn,
                                const DiffusionSchedule& sched, Rng& rng) {
  return designed_reward(report, bound) +
         gdm_reward(state, action, report.sum_rate, renpnn, sched, rng);
}

std::vector<double> standardize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

}  // namespace d2rl
