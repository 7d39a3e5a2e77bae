// Copyright 2026 The softbridge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "softbridge/softgac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "softbridge/errors.hpp"

namespace softbridge::gac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, Index obs_dim, Index action_dim)
    : capacity_(capacity) {
  require_contract(capacity > 0, "ReplayBuffer: capacity must be positive");
  const auto n = static_cast<Index>(capacity);
  obs_.resize(n, obs_dim);
  actions_.resize(n, action_dim);
  rewards_.resize(n);
  next_obs_.resize(n, obs_dim);
  dones_.resize(n);
}

void ReplayBuffer::add(const Transition& t) {
  require_shape(t.obs.size() == obs_.cols() && t.next_obs.size() == obs_.cols() &&
                    t.action.size() == actions_.cols(),
                "ReplayBuffer::add: transition shape mismatch");
  const auto row = static_cast<Index>(cursor_);
  obs_.row(row) = t.obs.transpose();
  actions_.row(row) = t.action.transpose();
  rewards_(row) = t.reward;
  next_obs_.row(row) = t.next_obs.transpose();
  dones_(row) = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t i) const {
  require_contract(i < size_, "ReplayBuffer::at: index out of range");
  const auto row = static_cast<Index>(i);
  return Transition{obs_.row(row).transpose(), actions_.row(row).transpose(), rewards_(row),
                    next_obs_.row(row).transpose(), dones_(row) != 0.0};
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  require_contract(size_ > 0, "ReplayBuffer::sample: buffer is empty");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(size_));
  return idx;
}

ReplayBatch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto n = static_cast<Index>(indices.size());
  ReplayBatch b{Matrix(n, obs_.cols()), Matrix(n, actions_.cols()), Vector(n),
                Matrix(n, obs_.cols()), Vector(n)};
  for (Index r = 0; r < n; ++r) {
    const auto i = static_cast<Index>(indices[static_cast<std::size_t>(r)]);
    require_contract(static_cast<std::size_t>(i) < size_, "ReplayBuffer::gather: bad index");
    b.obs.row(r) = obs_.row(i);
    b.actions.row(r) = actions_.row(i);
    b.rewards(r) = rewards_(i);
    b.next_obs.row(r) = next_obs_.row(i);
    b.dones(r) = dones_(i);
  }
  return b;
}

ReplayBatch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  return gather(sample_indices(n, rng));
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  require_contract(gamma > 0.0 && gamma < 1.0, "train: gamma must be in (0, 1)");
  require_contract(policy_delay >= 1, "train: policy_delay must be at least 1");
  require_contract(utd >= 1, "train: utd must be at least 1");
  require_contract(batch >= 1, "train: batch must be positive");
  require_contract(polyak >= 0.0 && polyak <= 1.0, "train: polyak must be in [0, 1]");
  require_contract(rho_ctrl > 0.0, "train: rho_ctrl must be positive");
  require_contract(steps >= 1, "train: K must be at least 1");
  require_contract(eval_every >= 1 && eval_episodes >= 1, "train: bad evaluation schedule");
  require_contract(initial_alpha > 0.0, "train: initial_alpha must be positive");
  require_contract(buffer_capacity >= 1, "train: buffer_capacity must be positive");
}

TrainConfig default_config(const std::string& env_name) {
  TrainConfig cfg;
  if (env_name == "pendulum") {
    // Holding the torque near saturation against the reference pull costs
    // about 2 nats per step; 0.2 * K = 1.2 cannot pay for it.
    cfg.rho_ctrl = 2.0;
    cfg.total_steps = 12000;
    cfg.eval_every = 2000;
    cfg.eval_episodes = 20;
  } else if (env_name == "reach") {
    cfg.total_steps = 12000;
    cfg.eval_every = 2000;
    cfg.eval_episodes = 20;
  } else {
    throw UsageError("unknown environment '" + env_name + "'");
  }
  return cfg;
}

Agent Agent::create(const TrainConfig& cfg, const env::EnvSpec& spec, Rng& init_rng) {
  const BridgeConfig actor_cfg = BridgeConfig::make(cfg.steps, spec.obs_dim, spec.action_dim,
                                                    cfg.actor_width, spec.action_scale(),
                                                    spec.action_bias());
  Rng actor_rng = init_rng.split("actor");
  Rng critic_rng = init_rng.split("critic");
  BridgeActorParams actor = BridgeActorParams::init(actor_cfg, actor_rng);
  TwinCritic critic =
      TwinCritic::init(spec.obs_dim + spec.action_dim, cfg.critic_width, critic_rng);
  const std::size_t n_actor = actor.parameter_count();
  const std::size_t n_critic = total_size(critic.params());
  return Agent{actor_cfg,
               actor,
               actor,
               critic,
               critic,
               AdamState(n_actor, AdamConfig{cfg.actor_lr}),
               AdamState(n_critic, AdamConfig{cfg.critic_lr}),
               TemperatureDual(cfg.initial_alpha, cfg.control_target(spec.action_dim),
                               cfg.alpha_lr)};
}

// ---------------------------------------------------------------------------

Vector soft_target_from_values(const Vector& rewards, const Vector& dones, const Vector& q1,
                               const Vector& q2, const Vector& energies, double alpha,
                               double gamma) {
  const Index n = rewards.size();
  require_shape(dones.size() == n && q1.size() == n && q2.size() == n && energies.size() == n,
                "soft_target: batch mismatch");
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double boot = std::min(q1(i), q2(i)) - alpha * energies(i);
    y(i) = dones(i) != 0.0 ? rewards(i) : rewards(i) + gamma * boot;
  }
  return y;
}

TargetSample soft_target(const ReplayBatch& batch, const BridgeActorParams& target_actor,
                         const BridgeConfig& actor_cfg, const TwinCritic& target_critic,
                         double alpha, double gamma, Rng& rng) {
  const auto noise =
      sample_bridge_noise(batch.size(), actor_cfg.steps, actor_cfg.action_dim, rng);
  const BridgeBatch next = bridge_forward(target_actor, actor_cfg, batch.next_obs, noise);
  const Matrix input = critic_input(batch.next_obs, next.actions);
  TargetSample out;
  out.q1 = critic_forward(target_critic.first, input);
  out.q2 = critic_forward(target_critic.second, input);
  out.energies = next.energies();
  out.y = soft_target_from_values(batch.rewards, batch.dones, out.q1, out.q2, out.energies, alpha,
                                  gamma);
  return out;
}

CriticLoss critic_loss_and_grad(TwinCritic& critic, const ReplayBatch& batch, const Vector& y,
                                TwinCritic* grad) {
  require_shape(y.size() == batch.size(), "critic_update: target size mismatch");
  const Matrix input = critic_input(batch.obs, batch.actions);
  const auto n = static_cast<double>(batch.size());
  CriticTape tape1;
  CriticTape tape2;
  const Vector r1 = critic_forward(critic.first, input, &tape1) - y;
  const Vector r2 = critic_forward(critic.second, input, &tape2) - y;
  CriticLoss out;
  out.head1 = r1.squaredNorm() / n;
  out.head2 = r2.squaredNorm() / n;
  out.loss = 0.5 * (out.head1 + out.head2);
  if (grad != nullptr) {
    // d/dq of 0.5 * (mean r1^2 + mean r2^2) is r / n for each head.
    critic_backward(critic.first, tape1, r1 / n, &grad->first, false);
    critic_backward(critic.second, tape2, r2 / n, &grad->second, false);
  }
  return out;
}

std::optional<CriticLoss> critic_update(TwinCritic& critic, AdamState& opt,
                                        const ReplayBatch& batch, const Vector& y) {
  if (!y.allFinite()) return std::nullopt;
  TwinCritic grad = TwinCritic::zeros(critic.first.hidden1.in_dim(), critic.first.hidden1.out_dim());
  const CriticLoss loss = critic_loss_and_grad(critic, batch, y, &grad);
  if (!std::isfinite(loss.loss)) return std::nullopt;
  if (!opt.step(critic.params(), grad.params())) return std::nullopt;
  return loss;
}

ActorStats actor_loss_and_grad(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                               const TwinCritic& critic, const Matrix& obs,
                               const std::vector<Matrix>& noise, double alpha,
                               BridgeActorParams* grad) {
  BridgeTape tape;
  const BridgeBatch paths = bridge_forward(actor, actor_cfg, obs, noise, grad ? &tape : nullptr);
  const Matrix input = critic_input(obs, paths.actions);
  CriticTape t1;
  CriticTape t2;
  const Vector q1 = critic_forward(critic.first, input, &t1);
  const Vector q2 = critic_forward(critic.second, input, &t2);
  const Index n = obs.rows();
  const auto nd = static_cast<double>(n);
  const Vector energies = paths.energies();

  ActorStats out;
  Vector d1 = Vector::Zero(n);
  Vector d2 = Vector::Zero(n);
  double q_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    // Ties go to the first head.
    if (q1(i) <= q2(i)) {
      q_sum += q1(i);
      d1(i) = -1.0 / nd;
    } else {
      q_sum += q2(i);
      d2(i) = -1.0 / nd;
    }
  }
  out.mean_q = q_sum / nd;
  out.mean_energy = energies.mean();
  out.loss = alpha * out.mean_energy - out.mean_q;

  if (grad != nullptr) {
    const Matrix g1 = critic_backward(critic.first, t1, d1, nullptr, true);
    const Matrix g2 = critic_backward(critic.second, t2, d2, nullptr, true);
    const Index ds = obs.cols();
    const Matrix d_actions = (g1 + g2).rightCols(input.cols() - ds);
    const Vector d_energies = Vector::Constant(n, alpha / nd);
    bridge_backward(actor, actor_cfg, tape, d_actions, d_energies, *grad);
  }
  return out;
}

std::optional<ActorStats> actor_update(BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                                       AdamState& opt, const TwinCritic& critic, const Matrix& obs,
                                       double alpha, Rng& rng) {
  const auto noise = sample_bridge_noise(obs.rows(), actor_cfg.steps, actor_cfg.action_dim, rng);
  BridgeActorParams grad = BridgeActorParams::zeros(actor_cfg);
  const ActorStats stats = actor_loss_and_grad(actor, actor_cfg, critic, obs, noise, alpha, &grad);
  if (!std::isfinite(stats.loss)) return std::nullopt;
  if (!opt.step(actor.params(), grad.params())) return std::nullopt;
  return stats;
}

double alpha_update(TemperatureDual& dual, const Vector& energies) {
  dual.update(energies.mean());
  return dual.log_alpha();
}

Vector select_action(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                     const Vector& obs, Rng& rng, bool deterministic) {
  std::vector<Matrix> noise;
  if (deterministic) {
    noise.assign(static_cast<std::size_t>(actor_cfg.steps) + 1,
                 Matrix::Zero(1, actor_cfg.action_dim));
  } else {
    noise = sample_bridge_noise(1, actor_cfg.steps, actor_cfg.action_dim, rng);
  }
  const BridgeBatch out = bridge_forward(actor, actor_cfg, obs.transpose(), noise);
  return out.actions.row(0).transpose();
}

Evaluation evaluate_policy(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                           const env::Env& prototype, int episodes, Rng& rng, bool deterministic) {
  Evaluation ev;
  const bool is_pendulum = prototype.spec().name == "pendulum";
  const bool is_reach = prototype.spec().name == "reach";
  for (int e = 0; e < episodes; ++e) {
    Rng episode_rng = rng.split(static_cast<std::uint64_t>(e));
    Rng reset_rng = episode_rng.split("reset");
    Rng action_rng = episode_rng.split("action");
    auto env = prototype.clone();
    Vector obs = env->reset(reset_rng);
    EpisodeOutcome out;
    const int horizon = env->spec().horizon;
    int upright_tail = 0;
    for (int t = 0; t < horizon; ++t) {
      const Vector a = select_action(actor, actor_cfg, obs, action_rng, deterministic);
      const env::StepResult res = env->step(a);
      out.ret += res.reward;
      obs = res.obs;
      if (is_reach && out.goal == 0) {
        out.goal = env::MultimodalReach::goal_at(
            static_cast<const env::MultimodalReach*>(env.get())->position());
      }
      if (is_pendulum && t >= horizon - kUprightWindow) {
        const auto* p = static_cast<const env::Pendulum*>(env.get());
        if (std::abs(env::Pendulum::wrap_angle(p->theta())) < kUprightAngle) ++upright_tail;
      }
      if (res.done) break;
    }
    if (is_pendulum) out.balanced = upright_tail == kUprightWindow;
    ev.episodes.push_back(out);
  }
  const auto n = static_cast<double>(ev.episodes.size());
  if (n > 0) {
    double s = 0.0, s2 = 0.0;
    for (const auto& ep : ev.episodes) {
      s += ep.ret;
      ev.balanced_fraction += ep.balanced ? 1.0 : 0.0;
      ev.left_goal_fraction += ep.goal < 0 ? 1.0 : 0.0;
      ev.right_goal_fraction += ep.goal > 0 ? 1.0 : 0.0;
    }
    ev.mean_return = s / n;
    for (const auto& ep : ev.episodes) s2 += (ep.ret - ev.mean_return) * (ep.ret - ev.mean_return);
    ev.std_return = std::sqrt(s2 / n);
    ev.balanced_fraction /= n;
    ev.left_goal_fraction /= n;
    ev.right_goal_fraction /= n;
  }
  return ev;
}

// ---------------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const env::Env& prototype, std::uint64_t seed,
                  const ProgressFn& progress) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const env::EnvSpec& spec = prototype.spec();
  const Rng root = Rng(seed).split("train");
  Rng init_rng = root.split("init");
  Rng explore_rng = root.split("explore");
  Rng reset_rng = root.split("reset");
  Rng replay_rng = root.split("replay");
  Rng target_rng = root.split("target_noise");
  Rng actor_rng = root.split("actor_noise");
  const Rng eval_root = root.split("eval");

  TrainResult result;
  result.agent = Agent::create(cfg, spec, init_rng);
  Agent& ag = result.agent;
  result.control_target = ag.dual.target();
  ReplayBuffer buffer(cfg.buffer_capacity, spec.obs_dim, spec.action_dim);

  const ParamList actor_params = ag.actor.params();
  const ParamList actor_target_params = ag.actor_target.params();
  const ParamList critic_params = ag.critic.params();
  const ParamList critic_target_params = ag.critic_target.params();

  const std::size_t tail_start = cfg.total_steps - cfg.total_steps / 5;
  double tail_energy_sum = 0.0;
  std::size_t tail_energy_count = 0;
  double window_energy_sum = 0.0;
  std::size_t window_energy_count = 0;

  auto env = prototype.clone();
  Vector obs = env->reset(reset_rng);
  int episode_len = 0;
  std::size_t update_count = 0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    try {
      Vector action(spec.action_dim);
      if (step < cfg.learn_starts) {
        for (Index i = 0; i < spec.action_dim; ++i) {
          action(i) = explore_rng.uniform(spec.action_low(i), spec.action_high(i));
        }
      } else {
        action = select_action(ag.actor, ag.actor_cfg, obs, explore_rng);
      }
      const env::StepResult res = env->step(action);
      buffer.add(Transition{obs, action, res.reward, res.obs, res.done});
      obs = res.obs;
      ++episode_len;
      if (res.done || episode_len >= spec.horizon) {
        obs = env->reset(reset_rng);
        episode_len = 0;
      }
      ++result.env_steps;

      if (step >= cfg.learn_starts) {
        for (int u = 0; u < cfg.utd; ++u) {
          const ReplayBatch batch = buffer.sample(static_cast<std::size_t>(cfg.batch), replay_rng);
          const double alpha = ag.dual.alpha();
          const TargetSample target = soft_target(batch, ag.actor_target, ag.actor_cfg,
                                                  ag.critic_target, alpha, cfg.gamma, target_rng);
          ++update_count;
          if (!critic_update(ag.critic, ag.critic_opt, batch, target.y)) {
            ++result.skipped_updates;
          }
          ++result.critic_updates;
          if (update_count % static_cast<std::size_t>(cfg.policy_delay) == 0) {
            ++result.actor_updates;
            const auto stats = actor_update(ag.actor, ag.actor_cfg, ag.actor_opt, ag.critic,
                                            batch.obs, alpha, actor_rng);
            if (stats) {
              ag.dual.update(stats->mean_energy);
              window_energy_sum += stats->mean_energy;
              ++window_energy_count;
              if (step >= tail_start) {
                tail_energy_sum += stats->mean_energy;
                ++tail_energy_count;
              }
            } else {
              ++result.skipped_updates;
            }
          }
          polyak_update(critic_target_params, critic_params, cfg.polyak);
          polyak_update(actor_target_params, actor_params, cfg.polyak);
        }
      }

      if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.total_steps) {
        Rng eval_rng = eval_root.split(static_cast<std::uint64_t>(step + 1));
        Evaluation ev = evaluate_policy(ag.actor, ag.actor_cfg, prototype, cfg.eval_episodes,
                                        eval_rng, cfg.deterministic_eval);
        CurveRecord rec{step + 1, ev.mean_return, ev.std_return, ag.dual.alpha(),
                        window_energy_count ? window_energy_sum / window_energy_count : 0.0};
        window_energy_sum = 0.0;
        window_energy_count = 0;
        result.curve.push_back(rec);
        result.evaluations.push_back(std::move(ev));
        if (progress) progress(rec);
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.divergence_message = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }
  if (tail_energy_count > 0) result.tail_mean_energy = tail_energy_sum / tail_energy_count;
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

// ---------------------------------------------------------------------------

InferenceStats infer_bench(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                           std::size_t calls, Rng& rng, std::size_t warmup) {
  require_contract(calls >= 1, "infer_bench: need at least one call");
  InferenceStats out;
  out.steps = actor_cfg.steps;
  out.width = actor_cfg.hidden_width;
  out.calls = calls;
  out.analytic_parameter_count = bridge_parameter_count(actor_cfg);
  out.parameter_count = actor.parameter_count();
  const Matrix obs = Matrix::Zero(1, actor_cfg.obs_dim);

  auto one_action = [&]() {
    const auto noise = sample_bridge_noise(1, actor_cfg.steps, actor_cfg.action_dim, rng);
    return bridge_forward(actor, actor_cfg, obs, noise);
  };
  for (std::size_t i = 0; i < warmup; ++i) one_action();

  std::vector<double> times(calls);
  double sink = 0.0;
  for (std::size_t i = 0; i < calls; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const BridgeBatch b = one_action();
    const auto t1 = std::chrono::steady_clock::now();
    times[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    out.block_evaluations = b.block_evaluations;
    sink += b.actions(0, 0);
  }
  if (!std::isfinite(sink)) throw DivergenceError("infer_bench: non-finite action");
  std::sort(times.begin(), times.end());
  out.median_us = times[calls / 2];
  out.p95_us = times[std::min(calls - 1, static_cast<std::size_t>(0.95 * calls))];
  return out;
}

}  // namespace softbridge::gac
