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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "softbridge/envs.hpp"
#include "softbridge/errors.hpp"
#include "softbridge/softgac.hpp"
#include "softbridge/temperature.hpp"
#include "softbridge/verify.hpp"
#include "test_support.hpp"

using namespace softbridge;
using namespace softbridge::gac;
using softbridge::testing::random_matrix;

namespace {

ReplayBatch random_batch(Index n, Index ds, Index da, Rng& rng) {
  ReplayBatch b;
  b.obs = random_matrix(n, ds, rng);
  b.actions = random_matrix(n, da, rng, 0.5);
  b.rewards = random_matrix(n, 1, rng).col(0);
  b.next_obs = random_matrix(n, ds, rng);
  b.dones = Vector::Zero(n);
  return b;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch = 32;
  c.learn_starts = 100;
  c.actor_width = 32;
  c.critic_width = 32;
  c.steps = 3;
  c.total_steps = 300;
  c.eval_every = 150;
  c.eval_episodes = 2;
  c.buffer_capacity = 1000;
  return c;
}

}  // namespace

TEST_SUITE("softgac") {

TEST_CASE("replay ring overwrites the oldest item") {
  ReplayBuffer buf(3, 1, 1);
  for (int i = 0; i < 5; ++i) {
    buf.add(Transition{Vector::Constant(1, i), Vector::Constant(1, -i), double(i), Vector::Constant(1, i + 1), i == 4});
  }
  CHECK(buf.size() == 3);
  std::vector<double> seen;
  for (std::size_t i = 0; i < 3; ++i) seen.push_back(buf.at(i).reward);
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<double>{2.0, 3.0, 4.0});
  const ReplayBatch b = buf.gather({0, 1, 2});
  for (Index i = 0; i < 3; ++i) {
    CHECK(b.obs(i, 0) == b.rewards(i));
    CHECK(b.actions(i, 0) == -b.rewards(i));
    CHECK(b.next_obs(i, 0) == b.rewards(i) + 1.0);
    CHECK(b.dones(i) == (b.rewards(i) == 4.0 ? 1.0 : 0.0));
  }
  CHECK_THROWS(buf.at(3));
  ReplayBuffer empty(4, 1, 1);
  Rng rng(0);
  CHECK_THROWS_AS(empty.sample(2, rng), ContractError);
}

TEST_CASE("replay sampling is uniform (chi-square)") {
  ReplayBuffer buf(40, 1, 1);
  for (int i = 0; i < 40; ++i) buf.add(Transition{Vector::Zero(1), Vector::Zero(1), 0.0, Vector::Zero(1), false});
  Rng rng(1);
  std::vector<double> counts(40, 0.0);
  const int n = 200000;
  for (const auto i : buf.sample_indices(n, rng)) counts[i] += 1.0;
  double chi2 = 0.0;
  const double e = n / 40.0;
  for (const double c : counts) chi2 += (c - e) * (c - e) / e;
  // 39 dof; 0.999 quantile about 72.
  CHECK(chi2 < 72.0);
}

TEST_CASE("soft target arithmetic") {
  const Vector r{{1.0, -2.0, 0.5}};
  const Vector q1{{3.0, 1.0, -1.0}};
  const Vector q2{{2.0, 4.0, -3.0}};
  const Vector c{{0.2, 0.4, 0.1}};
  const Vector done = Vector::Ones(3);
  CHECK(soft_target_from_values(r, done, q1, q2, c, 0.7, 0.99) == r);
  CHECK(soft_target_from_values(r, Vector::Zero(3), q1, q2, c, 0.7, 0.0) == r);
  const Vector y0 = soft_target_from_values(r, Vector::Zero(3), q1, q2, c, 0.0, 0.9);
  CHECK(y0(0) == doctest::Approx(1.0 + 0.9 * 2.0));
  CHECK(y0(1) == doctest::Approx(-2.0 + 0.9 * 1.0));
  CHECK(y0(2) == doctest::Approx(0.5 + 0.9 * -3.0));
  const Vector y = soft_target_from_values(r, Vector::Zero(3), q1, q2, c, 0.5, 0.9);
  CHECK(y(1) == doctest::Approx(-2.0 + 0.9 * (1.0 - 0.5 * 0.4)));
}

TEST_CASE("critic loss: hand arithmetic, zero at fit, overfit") {
  Rng rng(2);
  TwinCritic critic = TwinCritic::init(3, 8, rng);
  const ReplayBatch b = random_batch(2, 2, 1, rng);
  const Matrix in = critic_input(b.obs, b.actions);
  const Vector v1 = critic_forward(critic.first, in);
  const Vector v2 = critic_forward(critic.second, in);
  const Vector y{{0.3, -1.1}};
  const double m1 = 0.5 * ((v1(0) - y(0)) * (v1(0) - y(0)) + (v1(1) - y(1)) * (v1(1) - y(1)));
  const double m2 = 0.5 * ((v2(0) - y(0)) * (v2(0) - y(0)) + (v2(1) - y(1)) * (v2(1) - y(1)));
  TwinCritic grad = TwinCritic::zeros(3, 8);
  const CriticLoss loss = critic_loss_and_grad(critic, b, y, &grad);
  CHECK(loss.head1 == doctest::Approx(m1).epsilon(1e-14));
  CHECK(loss.head2 == doctest::Approx(m2).epsilon(1e-14));
  CHECK(loss.loss == doctest::Approx(0.5 * (m1 + m2)).epsilon(1e-14));

  // Gradient against differences of the same loss.
  TwinCritic g2 = TwinCritic::zeros(3, 8);
  const auto fn = [&] { return critic_loss_and_grad(critic, b, y, nullptr).loss; };
  critic_loss_and_grad(critic, b, y, &g2);
  CHECK(softbridge::testing::fd_relative_error(critic.params(), g2.params(), fn) < 1e-7);

  // Targets equal to the predictions of both heads: nothing to learn.
  TwinCritic same = critic;
  copy_params(same.second_params(), same.first_params());
  const Vector fit = critic_forward(same.first, in);
  TwinCritic zg = TwinCritic::zeros(3, 8);
  const CriticLoss zero = critic_loss_and_grad(same, b, fit, &zg);
  CHECK(zero.loss == 0.0);
  for (const double g : flatten(zg.params())) CHECK(g == 0.0);

  // Frozen batch, constant targets.
  const ReplayBatch big = random_batch(64, 2, 1, rng);
  const Vector target = Vector::Constant(64, 2.5);
  AdamState opt(total_size(critic.params()), AdamConfig{1e-3});
  double prev = critic_loss_and_grad(critic, big, target, nullptr).loss;
  int decreases = 0;
  for (int i = 0; i < 100; ++i) {
    const auto l = critic_update(critic, opt, big, target);
    REQUIRE(l.has_value());
    const double now = critic_loss_and_grad(critic, big, target, nullptr).loss;
    if (now < prev) ++decreases;
    prev = now;
  }
  CHECK(decreases == 100);
}

TEST_CASE("actor: constant critic with alpha 0 has no gradient") {
  Rng rng(3);
  const BridgeConfig cfg = BridgeConfig::make(2, 2, 1, 8);
  const BridgeActorParams actor = BridgeActorParams::init(cfg, rng);
  TwinCritic critic = TwinCritic::init(3, 8, rng);
  for (auto* net : {&critic.first, &critic.second}) {
    net->output.weight.setZero();
    net->output.bias.setConstant(1.7);
  }
  const Matrix obs = random_matrix(16, 2, rng);
  const auto noise = sample_bridge_noise(16, 2, 1, rng);
  BridgeActorParams grad = BridgeActorParams::zeros(cfg);
  const ActorStats s = actor_loss_and_grad(actor, cfg, critic, obs, noise, 0.0, &grad);
  CHECK(s.loss == doctest::Approx(-1.7).epsilon(1e-14));
  for (const double g : flatten(grad.params())) CHECK(g == 0.0);
}

TEST_CASE("actor gradient matches central differences") {
  const verify::GradientCheck chk = verify::actor_gradient_check(11, 20);
  CHECK(chk.draws == 20);
  CHECK(chk.parameters > 0);
  CHECK(chk.max_relative_error < 1e-4);
}

TEST_CASE("actor pulled toward small actions shrinks them") {
  // Objective E ||a||^2 (critic -||a||^2, alpha 0), driven through the bridge.
  Rng rng(4);
  const BridgeConfig cfg = BridgeConfig::make(3, 1, 2, 32);
  BridgeActorParams actor = BridgeActorParams::init(cfg, rng);
  AdamState opt(actor.parameter_count(), AdamConfig{1e-3});
  const Matrix obs = Matrix::Ones(128, 1);
  Rng eval_rng(5);
  const auto eval_noise = sample_bridge_noise(4096, 3, 2, eval_rng);
  const auto mean_norm = [&] {
    const BridgeBatch b = bridge_forward(actor, cfg, Matrix::Ones(4096, 1), eval_noise);
    return b.actions.rowwise().norm().mean();
  };
  const double before = mean_norm();
  for (int i = 0; i < 300; ++i) {
    const auto noise = sample_bridge_noise(128, 3, 2, rng);
    BridgeTape tape;
    const BridgeBatch b = bridge_forward(actor, cfg, obs, noise, &tape);
    BridgeActorParams grad = BridgeActorParams::zeros(cfg);
    bridge_backward(actor, cfg, tape, 2.0 * b.actions / 128.0, Vector::Zero(128), grad);
    opt.step(actor.params(), grad.params());
  }
  CHECK(mean_norm() < 0.7 * before);
}

TEST_CASE("temperature dual") {
  CHECK(TemperatureDual::gradient(std::log(0.3), 1.2, 1.2) == 0.0);
  CHECK(TemperatureDual::gradient(std::log(0.3), 1.2, 2.0) < 0.0);
  TemperatureDual dual(0.1, 1.2, 1e-2);
  CHECK(dual.target() == 1.2);
  const double fixed = dual.alpha();
  TemperatureDual at_target(0.1, 1.2, 1e-2);
  at_target.update(1.2);
  CHECK(at_target.alpha() == fixed);
  double prev = dual.alpha();
  for (int i = 0; i < 50; ++i) {
    CHECK(dual.update(3.0));
    CHECK(dual.alpha() > prev);
    prev = dual.alpha();
  }
  CHECK_FALSE(dual.update(std::nan("")));
  CHECK(dual.alpha() == prev);

  TrainConfig c;
  CHECK(c.control_target(1) == doctest::Approx(1.2));
  CHECK(c.control_target(2) == doctest::Approx(2.4));
  TemperatureDual low(1e-8, 0.0, 10.0);
  for (int i = 0; i < 100; ++i) low.update(-1.0);
  CHECK(low.alpha() >= kMinAlpha);
  CHECK(low.clamp_warnings() > 0);
}

TEST_CASE("agent targets start as copies of the online networks") {
  Rng rng(6);
  TrainConfig c = tiny_config();
  const auto env = env::make_env("pendulum");
  Agent a = Agent::create(c, env->spec(), rng);
  CHECK(flatten(a.actor.params()) == flatten(a.actor_target.params()));
  CHECK(flatten(a.critic.params()) == flatten(a.critic_target.params()));
}

TEST_CASE("zero total steps: empty curve, no updates") {
  TrainConfig c = tiny_config();
  c.total_steps = 0;
  const auto env = env::make_env("pendulum");
  const TrainResult r = train(c, *env, 0);
  CHECK(r.curve.empty());
  CHECK(r.critic_updates == 0);
  CHECK(r.actor_updates == 0);
}

TEST_CASE("short training run is deterministic") {
  const TrainConfig c = tiny_config();
  for (const char* name : {"pendulum", "reach"}) {
    const auto env = env::make_env(name);
    TrainResult a = train(c, *env, 5);
    TrainResult b = train(c, *env, 5);
    REQUIRE(a.curve.size() == 2);
    CHECK(a.curve.back().step == 300);
    CHECK(a.critic_updates == 2 * 200);
    CHECK(a.actor_updates == 200);
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
      CHECK(a.curve[i].eval_return_mean == b.curve[i].eval_return_mean);
      CHECK(a.curve[i].alpha == b.curve[i].alpha);
      CHECK(a.curve[i].mean_energy == b.curve[i].mean_energy);
    }
    CHECK(flatten(a.agent.actor.params()) == flatten(b.agent.actor.params()));
    TrainResult other = train(c, *env, 6);
    CHECK(flatten(other.agent.actor.params()) != flatten(a.agent.actor.params()));
  }
}

TEST_CASE("one block per step at inference") {
  const auto env = env::make_env("pendulum");
  const auto& spec = env->spec();
  for (const int k : {2, 6, 12}) {
    const BridgeConfig cfg = BridgeConfig::make(k, spec.obs_dim, spec.action_dim, 32,
                                                spec.action_scale(), spec.action_bias());
    Rng rng(7);
    const BridgeActorParams actor = BridgeActorParams::init(cfg, rng);
    const InferenceStats s = infer_bench(actor, cfg, 200, rng, 20);
    CHECK(s.block_evaluations == static_cast<std::size_t>(k));
    CHECK(s.parameter_count == s.analytic_parameter_count);
    CHECK(s.median_us > 0.0);
    CHECK(s.p95_us >= s.median_us);
    Rng a(8);
    const Vector act = select_action(actor, cfg, env->observe(), a);
    CHECK(std::abs(act(0)) <= 2.0);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.batch = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = TrainConfig{};
  c.polyak = 1.5;
  CHECK_THROWS_AS(c.validate(), ContractError);
  CHECK(default_config("pendulum").total_steps > 0);
  CHECK(default_config("reach").rho_ctrl == 0.2);
  CHECK_THROWS_AS(default_config("nope"), UsageError);
}

}  // TEST_SUITE
