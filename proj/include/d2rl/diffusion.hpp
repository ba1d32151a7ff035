#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "d2rl/mlp.hpp"
#include "d2rl/rng.hpp"
#include "d2rl/tensor.hpp"

namespace d2rl {

// Noise schedule over P steps. Tables are indexed by step p = 1..P.
class DiffusionSchedule {
 public:
  // Linear beta from beta_min to beta_max. Requires P >= 1 and
  // 0 < beta_min <= beta_max < 1.
  static DiffusionSchedule linear(std::size_t steps, double beta_min, double beta_max);
  // Zero-step schedule: a chain that returns its Gaussian start unchanged.
  static DiffusionSchedule degenerate();
  // Arbitrary beta table, mainly for tests.
  static DiffusionSchedule from_betas(std::vector<double> betas);

  std::size_t steps() const { return beta_.size(); }
  double beta(std::size_t p) const { return beta_.at(p - 1); }
  double alpha(std::size_t p) const { return alpha_.at(p - 1); }
  // alpha_bar(0) == 1.
  double alpha_bar(std::size_t p) const { return p == 0 ? 1.0 : alpha_bar_.at(p - 1); }
  // ((1 - alpha_bar(p-1)) / (1 - alpha_bar(p))) * beta(p)
  double posterior_variance(std::size_t p) const { return posterior_variance_.at(p - 1); }

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> posterior_variance_;
};

DiffusionSchedule make_schedule(std::size_t steps, double beta_min, double beta_max);

inline constexpr std::size_t kStepEmbeddingWidth = 4;
std::array<double, kStepEmbeddingWidth> step_embedding(std::size_t p);

// eps_theta(x_p, p, cond). Input layout is [x_p | step code | cond].
class NoisePredictor {
 public:
  NoisePredictor() = default;
  NoisePredictor(std::size_t sample_width, std::size_t cond_width, std::size_t hidden_width,
                 std::size_t hidden_layers, Rng& rng);
  NoisePredictor(Mlp net, std::size_t sample_width, std::size_t cond_width);

  std::size_t sample_width() const { return sample_width_; }
  std::size_t cond_width() const { return cond_width_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  // steps has one entry per row of x. cond may be empty when cond_width == 0.
  RealTensor predict(const RealTensor& x, std::span<const std::size_t> steps,
                     const RealTensor& cond, Mlp::Trace* trace = nullptr) const;
  // Gradient of the loss with respect to x_p given dL/d eps; parameter
  // gradients are accumulated.
  RealTensor backward(const Mlp::Trace& trace, const RealTensor& grad_eps);

 private:
  Mlp net_;
  std::size_t sample_width_ = 0;
  std::size_t cond_width_ = 0;
};

// x_p = sqrt(1 - beta_p) x_{p-1} + sqrt(beta_p) eps
RealTensor forward_step(const RealTensor& x_prev, std::size_t p, const DiffusionSchedule& sched,
                        Rng& rng);

// x_p = sqrt(alpha_bar_p) x0 + sqrt(1 - alpha_bar_p) eps; returns (x_p, eps).
std::pair<RealTensor, RealTensor> forward_jump(const RealTensor& x0, std::size_t p,
                                               const DiffusionSchedule& sched, Rng& rng);

// x_{p-1} = x_p / sqrt(alpha_p) - beta_p / sqrt(alpha_p (1 - alpha_bar_p)) eps_theta
//           + sqrt(beta_p) z, with z suppressed at p == 1.
RealTensor reverse_step(const RealTensor& x_p, std::size_t p, const RealTensor& cond,
                        const NoisePredictor& net, const DiffusionSchedule& sched, Rng& rng);

// Everything needed to backpropagate through a reverse chain. The Gaussian
// draws are held fixed (reparameterisation).
struct ChainRecord {
  std::vector<Mlp::Trace> traces;  // traces[i] is the evaluation at step P - i
  // The part of X^0 produced by the predictor: X^0 minus the same chain run
  // with eps_theta == 0 and identical draws. Its gradient with respect to the
  // parameters equals that of X^0.
  RealTensor net_contribution;
};

// Reverse chain from a given X^P down to X^0.
RealTensor run_reverse_chain(const RealTensor& x_start, const RealTensor& cond,
                             const NoisePredictor& net, const DiffusionSchedule& sched, Rng& rng,
                             ChainRecord* record = nullptr);

// X^P ~ N(0, I) with `batch` rows, then the reverse chain. Throws
// DivergenceError on a non-finite sample.
RealTensor sample_chain(const RealTensor& cond, std::size_t batch, const NoisePredictor& net,
                        const DiffusionSchedule& sched, Rng& rng, ChainRecord* record = nullptr);

// Backpropagate dL/dX^0 through a recorded chain into the predictor's
// parameter gradients. Returns dL/dX^P.
RealTensor chain_backward(NoisePredictor& net, const DiffusionSchedule& sched,
                          const ChainRecord& record, const RealTensor& grad_x0);

// Batch mean of ||eps - eps_theta(sqrt(ab_p) x0 + sqrt(1 - ab_p) eps, p, cond)||^2 with p
// drawn uniformly per row. When accumulate is set, parameter gradients of
// that mean are added to the predictor.
double denoise_loss(const RealTensor& x0, const RealTensor& cond, NoisePredictor& net,
                    const DiffusionSchedule& sched, Rng& rng, bool accumulate = false);

// One Adam step on the denoising loss. Returns the loss before the step.
double mode2_train_step(NoisePredictor& net, const DiffusionSchedule& sched, const RealTensor& x0,
                        const RealTensor& cond, const AdamConfig& adam, Rng& rng);

// Noise real samples all the way to step P, then denoise them.
RealTensor mode2_generate(const NoisePredictor& net, const DiffusionSchedule& sched,
                          const RealTensor& x0, const RealTensor& cond, Rng& rng);

// Q evaluated on a batch of generated samples. Returns one value per row and
// writes dQ/dx (same shape as x) into grad.
using QHook = std::function<std::vector<double>(const RealTensor& x, RealTensor& grad)>;

// Which quantity of the chain the Q hook sees.
enum class ChainOutput { kSample, kNetContribution };

struct Mode1Result {
  double loss = 0.0;  // -mean Q
  GradReport grads;
  bool skipped = false;
};

// Sample X^0 through a differentiable chain, minimise -mean Q(X^0) by one
// Adam step. A non-finite loss or gradient skips the step.
Mode1Result mode1_policy_grad_step(NoisePredictor& net, const DiffusionSchedule& sched,
                                   const RealTensor& cond, std::size_t batch, const QHook& q,
                                   const AdamConfig& adam, Rng& rng,
                                   ChainOutput output = ChainOutput::kSample);

}  // namespace d2rl
