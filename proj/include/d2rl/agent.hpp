#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "d2rl/diffusion.hpp"
#include "d2rl/mlp.hpp"
#include "d2rl/rewards.hpp"
#include "d2rl/rng.hpp"
#include "d2rl/tensor.hpp"
#include "d2rl/wireless.hpp"

namespace d2rl {

enum class ActorKind { kDiffusion, kMlp };

// What the reward networks are trained to agree with.
//   kTd:        designed reward plus the discounted min target-critic value
//   kImmediate: designed reward alone
enum class QualitySignal { kTd, kImmediate };

struct AgentConfig {
  ActorKind actor = ActorKind::kDiffusion;
  std::size_t hidden_width = 256;
  std::size_t actor_layers = 4;   // AENPNN hidden layers
  std::size_t state_layers = 4;   // SENPNN
  std::size_t reward_layers = 5;  // RENPNN and the MLP shaper
  std::size_t critic_layers = 2;
  double actor_lr = 5e-5;
  double reward_lr = 5e-5;
  double state_lr = 1e-4;
  double critic_lr = 1e-4;
  double weight_decay = 7e-5;
  double tau = 5e-3;
  double gamma = 1.0;
  std::size_t diffusion_steps = 6;
  double beta_min = 1e-4;
  double beta_max = 0.2;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 100000;
  double epsilon_greedy = 0.1;
  std::size_t steps_per_epoch = 16;
  std::size_t updates_per_epoch = 1;
  bool per_step_updates = false;  // one update after every env step instead

  RewardVariant reward = RewardVariant::kDesigned;
  double reward_clamp = 2.0;
  bool reward_condition_on_rate = true;
  QualitySignal reward_signal = QualitySignal::kTd;

  bool state_exploration = false;
  double max_substitute = 0.9;     // M
  double substitute_rate = 0.001;  // eta
  double loss_threshold = 5e-4;    // T
  double loss_ema_decay = 0.99;

  void validate() const;
};

struct Transition {
  std::vector<double> state;
  std::vector<double> action;  // encoded feasible action
  std::vector<double> next_state;
  double reward = 0.0;    // what the active reward design emitted
  double sum_rate = 0.0;  // true C
  double bound = 0.0;     // R' of the state the action was applied to
  bool done = false;      // last step of the episode
};

struct Batch {
  RealTensor states;
  RealTensor actions;
  RealTensor next_states;
  std::vector<double> rewards;
  std::vector<double> rates;
  std::vector<double> bounds;
  std::vector<double> done;  // 1.0 on terminal rows
};

// FIFO ring; overwrites the oldest entry once full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  // Distinct uniform indices into [0, size). Throws ShapeError when
  // batch > size.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  Batch sample(std::size_t batch, Rng& rng) const;
  Batch gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
  std::vector<Transition> items_;
};

// Two online critics Q(S, A) -> scalar plus their targets.
struct CriticPair {
  Mlp q1, q2;
  Mlp target1, target2;

  CriticPair() = default;
  CriticPair(std::size_t state_width, std::size_t action_width, std::size_t hidden_width,
             std::size_t hidden_layers, Rng& rng);
};

RealTensor critic_input(const RealTensor& states, const RealTensor& actions);

// Elementwise min over two critics on the same input.
std::vector<double> min_q(const Mlp& a, const Mlp& b, const RealTensor& input);

// Value of a batch of encoded actions together with dV/dA. The default comes
// from min(Q1, Q2); tests plug in synthetic critics.
using ActionValue = std::function<std::vector<double>(
    const RealTensor& states, const RealTensor& encoded_actions, RealTensor& grad)>;
ActionValue min_critic_value(CriticPair& critics);

// Policy network behind the agent: either a Mode I diffusion model conditioned
// on the state (AENPNN) or a plain deterministic MLP.
class Actor {
 public:
  Actor() = default;
  Actor(ActorKind kind, std::size_t state_width, std::size_t action_width,
        std::size_t hidden_width, std::size_t hidden_layers, Rng& rng);

  ActorKind kind() const { return kind_; }
  NoisePredictor& diffusion() { return diffusion_; }
  const NoisePredictor& diffusion() const { return diffusion_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  Mlp& online_net();
  const Mlp& online_net() const;
  Mlp& target_net();
  const Mlp& target_net() const;

  // Raw (pre-projection) actions, one row per state.
  RealTensor raw_actions(const RealTensor& states, const DiffusionSchedule& sched, Rng& rng,
                         bool use_target = false) const;

  void soft_update_target(double tau);

 private:
  ActorKind kind_ = ActorKind::kDiffusion;
  std::size_t action_width_ = 0;
  NoisePredictor diffusion_, diffusion_target_;
  Mlp mlp_, mlp_target_;
};

// With probability eps a uniform raw vector in [-1, 1], else the actor's
// sample; both projected onto the feasible set.
NetworkAction select_action(std::span<const double> state, const Actor& actor,
                            const DiffusionSchedule& sched, double epsilon,
                            const EnvConfig& cfg, Rng& rng);

// y = R + gamma (1 - done) min(q1_next, q2_next)
std::vector<double> td_targets(std::span<const double> rewards, std::span<const double> done,
                               std::span<const double> q1_next, std::span<const double> q2_next,
                               double gamma);

struct CriticTargets {
  std::vector<double> targets;
  std::vector<double> next_value;  // min target-critic value at (S', A'(S'))
};

CriticTargets critic_target(const Batch& batch, const CriticPair& critics, const Actor& actor,
                            double gamma, const EnvConfig& cfg, const DiffusionSchedule& sched,
                            Rng& rng);

struct CriticLoss {
  double loss1 = 0.0;
  double loss2 = 0.0;
  GradReport grads1;
  GradReport grads2;
};

// One Adam step per critic on mean (Q(S, A) - y)^2.
CriticLoss critic_update(const RealTensor& states, const RealTensor& actions,
                         std::span<const double> targets, CriticPair& critics,
                         const AdamConfig& adam);

struct ActorLoss {
  double loss = 0.0;
  GradReport grads;
  bool skipped = false;
};

// Maximise the mean value of the projected actions the actor proposes for
// the batch states.
ActorLoss actor_update(const RealTensor& states, Actor& actor, const ActionValue& value,
                       const EnvConfig& cfg, const DiffusionSchedule& sched,
                       const AdamConfig& adam, Rng& rng);

struct StateExplorationConfig {
  double chi = 0.0;              // substitute probability
  double update_rate = 0.001;    // eta
  double max_probability = 0.9;  // M
  double loss_threshold = 5e-4;  // T
  double loss_ema = -1.0;        // negative until the first loss arrives
  double ema_decay = 0.99;

  bool gate_open() const { return loss_ema >= 0.0 && loss_ema < loss_threshold; }
};

void record_state_loss(StateExplorationConfig& cfg, double loss);

struct Substitution {
  std::vector<double> state;
  bool substituted = false;
};

// Algorithm 1: raise chi if the gate is open, then swap in a Mode II
// regeneration of the state with probability chi.
Substitution state_substitution(std::span<const double> state, const NoisePredictor& senpnn,
                                StateExplorationConfig& cfg, const DiffusionSchedule& sched,
                                Rng& rng);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double state_loss = 0.0;
  GradReport actor_grads;
  bool actor_skipped = false;
};

class Agent {
 public:
  Agent(const EnvConfig& env, const AgentConfig& cfg, Rng& rng);

  const EnvConfig& env() const { return env_; }
  const AgentConfig& config() const { return cfg_; }
  const DiffusionSchedule& schedule() const { return sched_; }
  Actor& actor() { return actor_; }
  const Actor& actor() const { return actor_; }
  CriticPair& critics() { return critics_; }
  NoisePredictor& senpnn() { return senpnn_; }
  RewardShaper& shaper() { return shaper_; }
  GdmReward& renpnn() { return renpnn_; }
  ReplayBuffer& replay() { return replay_; }
  const ReplayBuffer& replay() const { return replay_; }
  StateExplorationConfig& exploration() { return exploration_; }
  const StateExplorationConfig& exploration() const { return exploration_; }

  // Reward emitted by the active design for one step.
  double emit_reward(std::span<const double> state, std::span<const double> action,
                     const RateReport& report, double bound, Rng& rng) const;

  // One batch optimisation pass: SENPNN, critics, actor, reward networks,
  // then soft target updates. Requires replay().size() >= batch_size.
  UpdateStats update(Rng& rng);

  // Every network with a stable name, for checkpoints.
  std::vector<std::pair<std::string, Mlp*>> networks();

 private:
  EnvConfig env_;
  AgentConfig cfg_;
  DiffusionSchedule sched_;
  Actor actor_;
  CriticPair critics_;
  NoisePredictor senpnn_;
  RewardShaper shaper_;
  GdmReward renpnn_;
  ReplayBuffer replay_;
  StateExplorationConfig exploration_;
};

struct EpochStats {
  double mean_sum_rate = 0.0;
  double mean_reward = 0.0;
  double chi = 0.0;
  std::size_t substitutions = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double state_loss = 0.0;
  bool updated = false;
  GradReport actor_grads;
  std::size_t infeasible_actions = 0;
  double max_residual = 0.0;
};

// Algorithm 2, one epoch: fresh placement, steps_per_epoch interactions
// stored in replay, then the optimisation pass(es) once replay holds a
// batch.
EpochStats train_epoch(Agent& agent, Rng& rng);

}  // namespace d2rl
