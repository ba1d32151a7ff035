#include "d2rl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "d2rl/errors.hpp"

namespace d2rl {

void AgentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid agent config: " + what);
  };
  require(hidden_width >= 1, "hidden_width must be >= 1");
  require(actor_layers >= 1 && state_layers >= 1 && reward_layers >= 1 && critic_layers >= 1,
          "layer counts must be >= 1");
  require(actor_lr > 0.0 && reward_lr > 0.0 && state_lr > 0.0 && critic_lr > 0.0,
          "learning rates must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(diffusion_steps >= 1, "diffusion_steps must be >= 1");
  require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
          "need 0 < beta_min <= beta_max < 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(buffer_capacity >= batch_size, "buffer_capacity must be >= batch_size");
  require(epsilon_greedy >= 0.0 && epsilon_greedy <= 1.0, "epsilon must lie in [0, 1]");
  require(steps_per_epoch >= 1, "steps_per_epoch must be >= 1");
  require(updates_per_epoch >= 1, "updates_per_epoch must be >= 1");
  require(reward_clamp > 0.0, "reward_clamp must be > 0");
  require(max_substitute >= 0.0 && max_substitute <= 1.0, "max_substitute must lie in [0, 1]");
  require(substitute_rate > 0.0, "substitute_rate must be > 0");
  require(loss_threshold > 0.0, "loss_threshold must be > 0");
  require(loss_ema_decay >= 0.0 && loss_ema_decay < 1.0, "loss_ema_decay must lie in [0, 1)");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("ReplayBuffer::at");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (batch > items_.size()) throw ShapeError("ReplayBuffer: batch larger than stored count");
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  std::vector<char> taken(items_.size(), 0);
  const int hi = static_cast<int>(items_.size()) - 1;
  while (picked.size() < batch) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, hi));
    if (taken[i]) continue;
    taken[i] = 1;
    picked.push_back(i);
  }
  return picked;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
  Batch b;
  const std::size_t n = indices.size();
  const Transition& first = at(indices.front());
  b.states = RealTensor::matrix(n, first.state.size());
  b.actions = RealTensor::matrix(n, first.action.size());
  b.next_states = RealTensor::matrix(n, first.next_state.size());
  b.rewards.resize(n);
  b.rates.resize(n);
  b.bounds.resize(n);
  b.done.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Transition& t = at(indices[j]);
    std::copy(t.state.begin(), t.state.end(), b.states.row(j).begin());
    std::copy(t.action.begin(), t.action.end(), b.actions.row(j).begin());
    std::copy(t.next_state.begin(), t.next_state.end(), b.next_states.row(j).begin());
    b.rewards[j] = t.reward;
    b.rates[j] = t.sum_rate;
    b.bounds[j] = t.bound;
    b.done[j] = t.done ? 1.0 : 0.0;
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const auto idx = sample_indices(batch, rng);
  return gather(idx);
}

namespace {

Mlp make_mlp(std::size_t in, std::size_t hidden_width, std::size_t hidden_layers, std::size_t out,
             Rng& rng) {
  std::vector<std::size_t> widths{in};
  for (std::size_t i = 0; i < hidden_layers; ++i) widths.push_back(hidden_width);
  widths.push_back(out);
  return Mlp(widths, Activation::kSilu, Activation::kIdentity, rng);
}

RealTensor encode_rows(const RealTensor& raw, const EnvConfig& cfg) {
  RealTensor enc = RealTensor::matrix(raw.rows(), cfg.action_width());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto e = encode_action(project_action(raw.row(r), cfg));
    std::copy(e.begin(), e.end(), enc.row(r).begin());
  }
  return enc;
}

std::vector<double> column(const RealTensor& t) { return t.data(); }

AdamConfig adam(double lr, double wd) {
  AdamConfig a;
  a.learning_rate = lr;
  a.weight_decay = wd;
  return a;
}

}  // namespace

CriticPair::CriticPair(std::size_t state_width, std::size_t action_width,
                       std::size_t hidden_width, std::size_t hidden_layers, Rng& rng)
    : q1(make_mlp(state_width + action_width, hidden_width, hidden_layers, 1, rng)),
      q2(make_mlp(state_width + action_width, hidden_width, hidden_layers, 1, rng)),
      target1(q1),
      target2(q2) {}

RealTensor critic_input(const RealTensor& states, const RealTensor& actions) {
  return RealTensor::hconcat({&states, &actions});
}

std::vector<double> min_q(const Mlp& a, const Mlp& b, const RealTensor& input) {
  const RealTensor qa = a.forward(input);
  const RealTensor qb = b.forward(input);
  std::vector<double> out(qa.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::min(qa[j], qb[j]);
  return out;
}

ActionValue min_critic_value(CriticPair& critics) {
  return [&critics](const RealTensor& states, const RealTensor& actions, RealTensor& grad) {
    const RealTensor input = critic_input(states, actions);
    Mlp::Trace t1, t2;
    const RealTensor qa = critics.q1.forward(input, t1);
    const RealTensor qb = critics.q2.forward(input, t2);
    const std::size_t n = qa.size();
    std::vector<double> values(n);
    RealTensor g1 = RealTensor::matrix(n, 1);
    RealTensor g2 = RealTensor::matrix(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (qa[j] <= qb[j]) {
        values[j] = qa[j];
        g1[j] = 1.0;
      } else {
        values[j] = qb[j];
        g2[j] = 1.0;
      }
    }
    const RealTensor d1 = critics.q1.backward(t1, g1, false);
    const RealTensor d2 = critics.q2.backward(t2, g2, false);
    const std::size_t offset = states.cols();
    for (std::size_t j = 0; j < n; ++j) {
      auto dst = grad.row(j);
      for (std::size_t c = 0; c < dst.size(); ++c) {
        dst[c] = d1.at(j, offset + c) + d2.at(j, offset + c);
      }
    }
    return values;
  };
}

Actor::Actor(ActorKind kind, std::size_t state_width, std::size_t action_width,
             std::size_t hidden_width, std::size_t hidden_layers, Rng& rng)
    : kind_(kind), action_width_(action_width) {
  if (kind == ActorKind::kDiffusion) {
    diffusion_ = NoisePredictor(action_width, state_width, hidden_width, hidden_layers, rng);
    diffusion_target_ = diffusion_;
  } else {
    mlp_ = make_mlp(state_width, hidden_width, hidden_layers, action_width, rng);
    mlp_target_ = mlp_;
  }
}

Mlp& Actor::online_net() { return kind_ == ActorKind::kDiffusion ? diffusion_.net() : mlp_; }
const Mlp& Actor::online_net() const {
  return kind_ == ActorKind::kDiffusion ? diffusion_.net() : mlp_;
}
Mlp& Actor::target_net() {
  return kind_ == ActorKind::kDiffusion ? diffusion_target_.net() : mlp_target_;
}
const Mlp& Actor::target_net() const {
  return kind_ == ActorKind::kDiffusion ? diffusion_target_.net() : mlp_target_;
}

RealTensor Actor::raw_actions(const RealTensor& states, const DiffusionSchedule& sched, Rng& rng,
                              bool use_target) const {
  if (kind_ == ActorKind::kDiffusion) {
    const NoisePredictor& net = use_target ? diffusion_target_ : diffusion_;
    return sample_chain(states, states.rows(), net, sched, rng);
  }
  return (use_target ? mlp_target_ : mlp_).forward(states);
}

void Actor::soft_update_target(double tau) { soft_update(online_net(), target_net(), tau); }

NetworkAction select_action(std::span<const double> state, const Actor& actor,
                            const DiffusionSchedule& sched, double epsilon,
                            const EnvConfig& cfg, Rng& rng) {
  if (rng.uniform() < epsilon) {
    std::vector<double> raw(cfg.action_width());
    for (auto& v : raw) v = rng.uniform(-1.0, 1.0);
    return project_action(raw, cfg);
  }
  const RealTensor s({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  const RealTensor raw = actor.raw_actions(s, sched, rng);
  return project_action(raw.row(0), cfg);
}

std::vector<double> td_targets(std::span<const double> rewards, std::span<const double> done,
                               std::span<const double> q1_next, std::span<const double> q2_next,
                               double gamma) {
  const std::size_t n = rewards.size();
  if (done.size() != n || q1_next.size() != n || q2_next.size() != n) {
    throw ShapeError("td_targets: length mismatch");
  }
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = rewards[j] + gamma * (1.0 - done[j]) * std::min(q1_next[j], q2_next[j]);
  }
  return y;
}

CriticTargets critic_target(const Batch& batch, const CriticPair& critics, const Actor& actor,
                            double gamma, const EnvConfig& cfg, const DiffusionSchedule& sched,
                            Rng& rng) {
  if (batch.rewards.empty()) throw ShapeError("critic_target: empty batch");
  const RealTensor raw = actor.raw_actions(batch.next_states, sched, rng, true);
  const RealTensor input = critic_input(batch.next_states, encode_rows(raw, cfg));
  const auto q1 = column(critics.target1.forward(input));
  const auto q2 = column(critics.target2.forward(input));
  CriticTargets out;
  out.targets = td_targets(batch.rewards, batch.done, q1, q2, gamma);
  out.next_value.resize(q1.size());
  for (std::size_t j = 0; j < q1.size(); ++j) out.next_value[j] = std::min(q1[j], q2[j]);
  return out;
}

namespace {

double regress(Mlp& q, const RealTensor& input, std::span<const double> targets,
               const AdamConfig& cfg, GradReport& report) {
  q.zero_grad();
  Mlp::Trace trace;
  const RealTensor pred = q.forward(input, trace);
  const std::size_t n = targets.size();
  RealTensor grad(pred.shape());
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = pred[j] - targets[j];
    loss += d * d;
    grad[j] = 2.0 * d / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
  q.backward(trace, grad, true);
  report = q.grad_report();
  adam_step(q, cfg);
  return loss;
}

}  // namespace

CriticLoss critic_update(const RealTensor& states, const RealTensor& actions,
                         std::span<const double> targets, CriticPair& critics,
                         const AdamConfig& adam) {
  if (targets.size() != states.rows()) throw ShapeError("critic_update: one target per row");
  const RealTensor input = critic_input(states, actions);
  CriticLoss out;
  out.loss1 = regress(critics.q1, input, targets, adam, out.grads1);
  out.loss2 = regress(critics.q2, input, targets, adam, out.grads2);
  return out;
}

ActorLoss actor_update(const RealTensor& states, Actor& actor, const ActionValue& value,
                       const EnvConfig& cfg, const DiffusionSchedule& sched,
                       const AdamConfig& adam, Rng& rng) {
  // Q as a function of the raw actor output, through the projection.
  QHook hook = [&](const RealTensor& raw, RealTensor& grad) {
    const RealTensor enc = encode_rows(raw, cfg);
    RealTensor genc(enc.shape());
    auto values = value(states, enc, genc);
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const auto g = project_action_vjp(raw.row(r), genc.row(r), cfg);
      std::copy(g.begin(), g.end(), grad.row(r).begin());
    }
    return values;
  };
  ActorLoss out;
  if (actor.kind() == ActorKind::kDiffusion) {
    const Mode1Result r =
        mode1_policy_grad_step(actor.diffusion(), sched, states, states.rows(), hook, adam, rng);
    out.loss = r.loss;
    out.grads = r.grads;
    out.skipped = r.skipped;
    return out;
  }
  Mlp& net = actor.mlp();
  net.zero_grad();
  Mlp::Trace trace;
  const RealTensor raw = net.forward(states, trace);
  RealTensor dq(raw.shape());
  const auto values = hook(raw, dq);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  out.loss = -mean;
  if (!std::isfinite(out.loss) || !dq.all_finite()) {
    out.skipped = true;
    return out;
  }
  const double scale = -1.0 / static_cast<double>(values.size());
  for (auto& v : dq.data()) v *= scale;
  net.backward(trace, dq, true);
  out.grads = net.grad_report();
  if (!net.gradients_finite()) {
    out.skipped = true;
    return out;
  }
  adam_step(net, adam);
  return out;
}

void record_state_loss(StateExplorationConfig& cfg, double loss) {
  if (cfg.loss_ema < 0.0) {
    cfg.loss_ema = loss;
  } else {
    cfg.loss_ema = cfg.ema_decay * cfg.loss_ema + (1.0 - cfg.ema_decay) * loss;
  }
}

Substitution state_substitution(std::span<const double> state, const NoisePredictor& senpnn,
                                StateExplorationConfig& cfg, const DiffusionSchedule& sched,
                                Rng& rng) {
  if (cfg.gate_open()) cfg.chi = std::min(cfg.chi + cfg.update_rate, cfg.max_probability);
  Substitution out;
  // Regenerate only when the draw says so; the result is the same in
  // distribution and saves a chain per step.
  if (rng.uniform() < cfg.chi) {
    const RealTensor s0({1, state.size()}, std::vector<double>(state.begin(), state.end()));
    const RealTensor generated = mode2_generate(senpnn, sched, s0, RealTensor{}, rng);
    out.state = generated.data();
    out.substituted = true;
  } else {
    out.state.assign(state.begin(), state.end());
  }
  return out;
}

Agent::Agent(const EnvConfig& env, const AgentConfig& cfg, Rng& rng)
    : env_(env),
      cfg_(cfg),
      sched_(make_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max)),
      replay_(cfg.buffer_capacity) {
  env_.validate();
  cfg_.validate();
  const std::size_t sw = env_.state_width();
  const std::size_t aw = env_.action_width();
  actor_ = Actor(cfg_.actor, sw, aw, cfg_.hidden_width, cfg_.actor_layers, rng);
  critics_ = CriticPair(sw, aw, cfg_.hidden_width, cfg_.critic_layers, rng);
  if (cfg_.state_exploration) {
    senpnn_ = NoisePredictor(sw, 0, cfg_.hidden_width, cfg_.state_layers, rng);
  }
  switch (cfg_.reward) {
    case RewardVariant::kDesignedMlp:
      shaper_ = RewardShaper::passthrough(sw, aw, cfg_.hidden_width, cfg_.reward_layers,
                                          cfg_.reward_clamp, rng);
      break;
    case RewardVariant::kGdm:
    case RewardVariant::kDesignedGdm:
      renpnn_ = GdmReward(sw, aw, cfg_.hidden_width, cfg_.reward_layers,
                          cfg_.reward == RewardVariant::kDesignedGdm, cfg_.reward_clamp,
                          cfg_.reward_condition_on_rate, rng);
      break;
    default:
      break;
  }
  exploration_.update_rate = cfg_.substitute_rate;
  exploration_.max_probability = cfg_.max_substitute;
  exploration_.loss_threshold = cfg_.loss_threshold;
  exploration_.ema_decay = cfg_.loss_ema_decay;
}

double Agent::emit_reward(std::span<const double> state, std::span<const double> action,
                          const RateReport& report, double bound, Rng& rng) const {
  switch (cfg_.reward) {
    case RewardVariant::kRaw: return raw_reward(report);
    case RewardVariant::kDesigned: return designed_reward(report, bound);
    case RewardVariant::kDesignedMlp:
      return mlp_shaped_reward(state, action, designed_reward(report, bound), shaper_);
    case RewardVariant::kGdm: return gdm_reward(state, action, report.sum_rate, renpnn_, sched_, rng);
    case RewardVariant::kDesignedGdm:
      return designed_plus_gdm_reward(state, action, report, bound, renpnn_, sched_, rng);
  }
  return raw_reward(report);
}

UpdateStats Agent::update(Rng& rng) {
  UpdateStats stats;
  const Batch batch = replay_.sample(cfg_.batch_size, rng);

  if (cfg_.state_exploration) {
    const double loss = mode2_train_step(senpnn_, sched_, batch.next_states, RealTensor{},
                                         adam(cfg_.state_lr, cfg_.weight_decay), rng);
    // Per element, so the gate threshold does not scale with the state width.
    stats.state_loss = loss / static_cast<double>(env_.state_width());
    record_state_loss(exploration_, stats.state_loss);
  }

  const CriticTargets targets =
      critic_target(batch, critics_, actor_, cfg_.gamma, env_, sched_, rng);
  const CriticLoss closs = critic_update(batch.states, batch.actions, targets.targets, critics_,
                                         adam(cfg_.critic_lr, cfg_.weight_decay));
  stats.critic_loss = 0.5 * (closs.loss1 + closs.loss2);

  const ActorLoss aloss = actor_update(batch.states, actor_, min_critic_value(critics_), env_,
                                       sched_, adam(cfg_.actor_lr, cfg_.weight_decay), rng);
  stats.actor_loss = aloss.loss;
  stats.actor_grads = aloss.grads;
  stats.actor_skipped = aloss.skipped;

  if (cfg_.reward == RewardVariant::kDesignedMlp || cfg_.reward == RewardVariant::kGdm ||
      cfg_.reward == RewardVariant::kDesignedGdm) {
    const std::size_t n = batch.rewards.size();
    std::vector<double> designed(n), signal(n);
    for (std::size_t j = 0; j < n; ++j) {
      designed[j] = batch.rates[j] - batch.bounds[j];
      signal[j] = designed[j];
      if (cfg_.reward_signal == QualitySignal::kTd) {
        signal[j] += cfg_.gamma * (1.0 - batch.done[j]) * targets.next_value[j];
      }
    }
    const auto quality = standardize(signal);
    const AdamConfig radam = adam(cfg_.reward_lr, cfg_.weight_decay);
    if (cfg_.reward == RewardVariant::kDesignedMlp) {
      shaper_.train_step(batch.states, batch.actions, designed, quality, radam);
    } else {
      const RealTensor cond = renpnn_.conditioning(batch.states, batch.actions, batch.rates);
      renpnn_.train_step(cond, quality, sched_, radam, rng);
    }
  }

  soft_update(critics_.q1, critics_.target1, cfg_.tau);
  soft_update(critics_.q2, critics_.target2, cfg_.tau);
  actor_.soft_update_target(cfg_.tau);
  return stats;
}

std::vector<std::pair<std::string, Mlp*>> Agent::networks() {
  std::vector<std::pair<std::string, Mlp*>> out{
      {"actor", &actor_.online_net()},  {"actor_target", &actor_.target_net()},
      {"critic1", &critics_.q1},        {"critic2", &critics_.q2},
      {"critic1_target", &critics_.target1}, {"critic2_target", &critics_.target2}};
  if (cfg_.state_exploration) out.emplace_back("senpnn", &senpnn_.net());
  if (cfg_.reward == RewardVariant::kDesignedMlp) out.emplace_back("shaper", &shaper_.body());
  if (cfg_.reward == RewardVariant::kGdm || cfg_.reward == RewardVariant::kDesignedGdm) {
    out.emplace_back("renpnn", &renpnn_.net().net());
  }
  return out;
}

EpochStats train_epoch(Agent& agent, Rng& rng) {
  const EnvConfig& env = agent.env();
  const AgentConfig& cfg = agent.config();
  EpochStats stats;
  ChannelState state = sample_channels(env, rng);
  double rate_sum = 0.0;
  double reward_sum = 0.0;
  std::size_t updates = 0;

  auto run_update = [&]() {
    if (agent.replay().size() < cfg.batch_size) return;
    const UpdateStats u = agent.update(rng);
    stats.critic_loss += u.critic_loss;
    stats.actor_loss += u.actor_loss;
    stats.state_loss += u.state_loss;
    stats.actor_grads = u.actor_grads;
    ++updates;
  };

  for (std::size_t t = 0; t < cfg.steps_per_epoch; ++t) {
    const std::vector<double> observed = encode_state(state, env);
    std::vector<double> s = observed;
    if (cfg.state_exploration) {
      Substitution sub =
          state_substitution(observed, agent.senpnn(), agent.exploration(), agent.schedule(), rng);
      if (sub.substituted) ++stats.substitutions;
      s = std::move(sub.state);
    }
    const NetworkAction action =
        select_action(s, agent.actor(), agent.schedule(), cfg.epsilon_greedy, env, rng);
    const ConstraintResidual res = constraint_residual(action, env);
    stats.max_residual = std::max({stats.max_residual, res.bs_power, res.user_power});
    if (!is_feasible(action, env)) ++stats.infeasible_actions;

    const double bound = upper_bound(state, env);
    auto [next, report] = env_step(state, action, env, rng);
    Transition tr;
    tr.state = s;
    tr.action = encode_action(action);
    tr.next_state = encode_state(next, env);
    tr.sum_rate = report.sum_rate;
    tr.bound = bound;
    tr.reward = agent.emit_reward(tr.state, tr.action, report, bound, rng);
    tr.done = t + 1 == cfg.steps_per_epoch;
    if (!std::isfinite(tr.reward)) throw DivergenceError("non-finite reward");
    rate_sum += tr.sum_rate;
    reward_sum += tr.reward;
    agent.replay().push(std::move(tr));
    state = std::move(next);
    if (cfg.per_step_updates) run_update();
  }
  if (!cfg.per_step_updates) {
    for (std::size_t u = 0; u < cfg.updates_per_epoch; ++u) run_update();
  }

  const double steps = static_cast<double>(cfg.steps_per_epoch);
  stats.mean_sum_rate = rate_sum / steps;
  stats.mean_reward = reward_sum / steps;
  stats.chi = agent.exploration().chi;
  stats.updated = updates > 0;
  if (updates > 0) {
    stats.critic_loss /= static_cast<double>(updates);
    stats.actor_loss /= static_cast<double>(updates);
    stats.state_loss /= static_cast<double>(updates);
  }
  return stats;
}

}  // namespace d2rl
