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

#ifndef SOFTBRIDGE_SOFTGAC_HPP_
#define SOFTBRIDGE_SOFTGAC_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "softbridge/bridge.hpp"
#include "softbridge/critic.hpp"
#include "softbridge/envs.hpp"
#include "softbridge/rng.hpp"
#include "softbridge/temperature.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge::gac {

struct Transition {
  Vector obs;
  Vector action;
  double reward = 0.0;
  Vector next_obs;
  bool done = false;
};

struct ReplayBatch {
  Matrix obs;
  Matrix actions;
  Vector rewards;
  Matrix next_obs;
  Vector dones;  // 0 or 1

  Index size() const { return rewards.size(); }
};

// Fixed-capacity ring; overwrites the oldest item when full.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, Index obs_dim, Index action_dim);

  void add(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  Transition at(std::size_t i) const;

  // Uniform with replacement over the stored items.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  ReplayBatch gather(const std::vector<std::size_t>& indices) const;
  ReplayBatch sample(std::size_t n, Rng& rng) const;

 private:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  RowMatrix obs_;
  RowMatrix actions_;
  Vector rewards_;
  RowMatrix next_obs_;
  Vector dones_;
};

struct TrainConfig {
  double gamma = 0.99;
  Index batch = 256;
  int utd = 2;
  int policy_delay = 2;
  std::size_t learn_starts = 1000;
  double polyak = 0.995;
  double rho_ctrl = 0.2;
  int steps = 6;  // K
  Index actor_width = 512;
  Index critic_width = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 1e-3;
  double initial_alpha = 0.1;
  std::size_t buffer_capacity = 100000;
  std::size_t total_steps = 0;
  std::size_t eval_every = 2500;
  int eval_episodes = 10;
  bool deterministic_eval = false;  // zero noise instead of sampled paths

  void validate() const;
  double control_target(Index action_dim) const { return rho_ctrl * steps * action_dim; }
};

// Desk defaults per environment (total steps and evaluation cadence).
TrainConfig default_config(const std::string& env_name);

// Online and target networks plus optimizer state.
struct Agent {
  BridgeConfig actor_cfg;
  BridgeActorParams actor;
  BridgeActorParams actor_target;
  TwinCritic critic;
  TwinCritic critic_target;
  AdamState actor_opt;
  AdamState critic_opt;
  TemperatureDual dual;

  static Agent create(const TrainConfig& cfg, const env::EnvSpec& spec, Rng& init_rng);
};

// y = r + gamma (1 - d) [min(q1, q2) - alpha C]
Vector soft_target_from_values(const Vector& rewards, const Vector& dones, const Vector& q1,
                               const Vector& q2, const Vector& energies, double alpha, double gamma);

struct TargetSample {
  Vector y;
  Vector q1;
  Vector q2;
  Vector energies;
};

// Fresh target-actor paths at s' with noise from `rng`.
TargetSample soft_target(const ReplayBatch& batch, const BridgeActorParams& target_actor,
                         const BridgeConfig& actor_cfg, const TwinCritic& target_critic,
                         double alpha, double gamma, Rng& rng);

struct CriticLoss {
  double loss = 0.0;  // mean of the two per-head MSEs
  double head1 = 0.0;
  double head2 = 0.0;
};

// Loss and gradients only; `grad` receives d loss / d params.
CriticLoss critic_loss_and_grad(TwinCritic& critic, const ReplayBatch& batch, const Vector& y,
                                TwinCritic* grad);
// One Adam step on both heads. Returns nullopt (and leaves the critic alone)
// on a non-finite loss or gradient.
std::optional<CriticLoss> critic_update(TwinCritic& critic, AdamState& opt,
                                        const ReplayBatch& batch, const Vector& y);

struct ActorStats {
  double loss = 0.0;
  double mean_energy = 0.0;
  double mean_q = 0.0;
};

// E[alpha C - min(Q1, Q2)] on the given noise; critics are read only.
ActorStats actor_loss_and_grad(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                               const TwinCritic& critic, const Matrix& obs,
                               const std::vector<Matrix>& noise, double alpha,
                               BridgeActorParams* grad);
std::optional<ActorStats> actor_update(BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                                       AdamState& opt, const TwinCritic& critic, const Matrix& obs,
                                       double alpha, Rng& rng);

// Gradient step on log alpha; returns the new log alpha.
double alpha_update(TemperatureDual& dual, const Vector& energies);

// Mean action when `deterministic` (zero base and zero noise), otherwise a
// sampled path.
Vector select_action(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                     const Vector& obs, Rng& rng, bool deterministic = false);

struct EpisodeOutcome {
  double ret = 0.0;
  bool balanced = false;  // pendulum: |theta| < kUprightAngle over the last kUprightWindow steps
  int goal = 0;           // reach: first goal entered, 0 when none
};

inline constexpr double kUprightAngle = 0.5;
inline constexpr int kUprightWindow = 50;

struct Evaluation {
  std::vector<EpisodeOutcome> episodes;
  double mean_return = 0.0;
  double std_return = 0.0;
  double balanced_fraction = 0.0;
  double left_goal_fraction = 0.0;
  double right_goal_fraction = 0.0;
};

Evaluation evaluate_policy(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                           const env::Env& prototype, int episodes, Rng& rng,
                           bool deterministic = false);

struct CurveRecord {
  std::size_t step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double alpha = 0.0;
  double mean_energy = 0.0;  // over actor updates since the previous record
};

struct TrainResult {
  std::vector<CurveRecord> curve;
  std::vector<Evaluation> evaluations;
  Agent agent;
  std::size_t env_steps = 0;
  std::size_t critic_updates = 0;
  std::size_t actor_updates = 0;
  std::size_t skipped_updates = 0;
  bool diverged = false;
  std::string divergence_message;
  double tail_mean_energy = 0.0;  // over actor updates in the last 20% of env steps
  double control_target = 0.0;
  double seconds = 0.0;
};

using ProgressFn = std::function<void(const CurveRecord&)>;

TrainResult train(const TrainConfig& cfg, const env::Env& prototype, std::uint64_t seed,
                  const ProgressFn& progress = {});

struct InferenceStats {
  int steps = 0;
  Index width = 0;
  std::size_t calls = 0;
  double median_us = 0.0;
  double p95_us = 0.0;
  std::size_t block_evaluations = 0;  // per action
  std::size_t parameter_count = 0;
  std::size_t analytic_parameter_count = 0;
};

InferenceStats infer_bench(const BridgeActorParams& actor, const BridgeConfig& actor_cfg,
                           std::size_t calls, Rng& rng, std::size_t warmup = 1000);

}  // namespace softbridge::gac

#endif  // SOFTBRIDGE_SOFTGAC_HPP_
