#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "d2rl/diffusion.hpp"
#include "d2rl/mlp.hpp"
#include "d2rl/rng.hpp"
#include "d2rl/tensor.hpp"
#include "d2rl/wireless.hpp"

namespace d2rl {

enum class RewardVariant { kRaw, kDesigned, kDesignedMlp, kGdm, kDesignedGdm };

std::string variant_name(RewardVariant v);
// Accepts the names produced by variant_name. Throws ConfigError otherwise.
RewardVariant parse_variant(const std::string& name);

double raw_reward(const RateReport& report);

// Interference- and clutter-free bound: every downlink user gets the full BS
// budget through a matched filter, every uplink user its full power with no
// competing uplink or clutter. Dominates the sum rate of any feasible action.
double upper_bound(const ChannelState& s, const EnvConfig& cfg);

double designed_reward(const RateReport& report, double bound);

// c * tanh(x / c)
double soft_clamp(double x, double c);
double soft_clamp_derivative(double x, double c);

// Scalar shaping network: passthrough * base + c * tanh(body(S, A, base) / c).
// Only the body trains.
class RewardShaper {
 public:
  RewardShaper() = default;
  RewardShaper(std::size_t state_width, std::size_t action_width, std::size_t hidden_width,
               std::size_t hidden_layers, double clamp, Rng& rng);

  // Body output layer zeroed, so the shaper starts as output == base.
  static RewardShaper passthrough(std::size_t state_width, std::size_t action_width,
                                  std::size_t hidden_width, std::size_t hidden_layers,
                                  double clamp, Rng& rng);
  // All body weights zeroed and no passthrough: output == 0 everywhere.
  static RewardShaper zero(std::size_t state_width, std::size_t action_width,
                           std::size_t hidden_width, std::size_t hidden_layers, double clamp,
                           Rng& rng);

  Mlp& body() { return body_; }
  const Mlp& body() const { return body_; }
  double passthrough_gain() const { return passthrough_; }
  double clamp() const { return clamp_; }

  double evaluate(std::span<const double> state, std::span<const double> action,
                  double base) const;
  std::vector<double> evaluate(const RealTensor& states, const RealTensor& actions,
                               std::span<const double> base) const;

  // One Adam step maximising mean_j(shaping_j * quality_j).
  GradReport train_step(const RealTensor& states, const RealTensor& actions,
                        std::span<const double> base, std::span<const double> quality,
                        const AdamConfig& adam);

 private:
  RealTensor body_input(const RealTensor& states, const RealTensor& actions,
                        std::span<const double> base) const;

  Mlp body_;
  double passthrough_ = 1.0;
  double clamp_ = 2.0;
};

double mlp_shaped_reward(std::span<const double> state, std::span<const double> action,
                         double base, const RewardShaper& shaper);

// RENPNN: a Mode I diffusion model over a scalar, conditioned on (S, A) and
// optionally the achieved sum rate. As a residual its output is the net's
// share of X^0, so a zeroed output layer contributes exactly nothing.
class GdmReward {
 public:
  GdmReward() = default;
  GdmReward(std::size_t state_width, std::size_t action_width, std::size_t hidden_width,
            std::size_t hidden_layers, bool residual, double clamp, bool condition_on_rate,
            Rng& rng);

  NoisePredictor& net() { return net_; }
  const NoisePredictor& net() const { return net_; }
  bool residual() const { return residual_; }
  double clamp() const { return clamp_; }
  bool condition_on_rate() const { return condition_on_rate_; }

  // Conditioning rows [S | A | C] (C omitted when not conditioning on rate).
  RealTensor conditioning(const RealTensor& states, const RealTensor& actions,
                          std::span<const double> rates) const;

  // Clamped reward term per conditioning row.
  std::vector<double> evaluate(const RealTensor& cond, const DiffusionSchedule& sched,
                               Rng& rng) const;

  // One Mode I step maximising mean_j(term_j * quality_j).
  Mode1Result train_step(const RealTensor& cond, std::span<const double> quality,
                         const DiffusionSchedule& sched, const AdamConfig& adam, Rng& rng);

 private:
  NoisePredictor net_;
  bool residual_ = false;
  double clamp_ = 2.0;
  bool condition_on_rate_ = true;
};

// Clamped X^0 of the chain conditioned on (S, A[, C]).
double gdm_reward(std::span<const double> state, std::span<const double> action, double rate,
                  const GdmReward& renpnn, const DiffusionSchedule& sched, Rng& rng);

// (C - R') plus the clamped residual.
double designed_plus_gdm_reward(std::span<const double> state, std::span<const double> action,
                                const RateReport& report, double bound, const GdmReward& renpnn,
                                const DiffusionSchedule& sched, Rng& rng);

// Subtract the batch mean and divide by the standard deviation. A constant
// input maps to zeros.
std::vector<double> standardize(std::span<const double> values);

}  // namespace d2rl
