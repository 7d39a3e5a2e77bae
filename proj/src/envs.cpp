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

#include "softbridge/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "softbridge/errors.hpp"

namespace softbridge::env {

Vector Env::clamp_action(const Vector& action) {
  const EnvSpec& s = spec();
  require_shape(action.size() == s.action_dim, s.name + ": action dimension mismatch");
  Vector out = action.cwiseMax(s.action_low).cwiseMin(s.action_high);
  if (!action.allFinite()) {
    throw ContractError(s.name + ": non-finite action");
  }
  if (out != action) ++clamp_warnings_;
  return out;
}

// ---------------------------------------------------------------------------

Pendulum::Pendulum() {
  spec_.name = "pendulum";
  spec_.obs_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = Vector::Constant(1, -kMaxTorque);
  spec_.action_high = Vector::Constant(1, kMaxTorque);
  spec_.horizon = 200;
}

double Pendulum::wrap_angle(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(x + std::numbers::pi, two_pi);
  if (y < 0.0) y += two_pi;
  return y - std::numbers::pi;
}

double Pendulum::reward(double theta, double theta_dot, double torque) {
  const double th = wrap_angle(theta);
  return -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque);
}

Vector Pendulum::reset(Rng& rng) {
  theta_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
  return observe();
}

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = theta;
  theta_dot_ = theta_dot;
}

Vector Pendulum::observe() const {
  Vector obs(3);
  obs << std::cos(theta_), std::sin(theta_), theta_dot_;
  return obs;
}

StepResult Pendulum::step(const Vector& action) {
  const double u = clamp_action(action)(0);
  StepResult out;
  out.reward = reward(theta_, theta_dot_, u);
  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                       3.0 / (kMass * kLength * kLength) * u;
  theta_dot_ = std::clamp(theta_dot_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
  theta_ += theta_dot_ * kDt;
  out.obs = observe();
  return out;
}

// ---------------------------------------------------------------------------

MultimodalReach::MultimodalReach() : position_(Vector::Zero(2)), velocity_(Vector::Zero(2)) {
  spec_.name = "reach";
  spec_.obs_dim = 4;
  spec_.action_dim = 2;
  spec_.action_low = Vector::Constant(2, -1.0);
  spec_.action_high = Vector::Constant(2, 1.0);
  spec_.horizon = 100;
}

double MultimodalReach::reward(const Vector& position, const Vector& action) {
  const double dy2 = position(1) * position(1);
  const double dl = position(0) + kGoalX;
  const double dr = position(0) - kGoalX;
  const double d2 = std::min(dl * dl, dr * dr) + dy2;
  return std::exp(-8.0 * d2) - 0.01 * action.squaredNorm();
}

int MultimodalReach::goal_at(const Vector& position) {
  for (const int side : {-1, 1}) {
    const double dx = position(0) - side * kGoalX;
    if (dx * dx + position(1) * position(1) <= kReachRadius * kReachRadius) return side;
  }
  return 0;
}

Vector MultimodalReach::reset(Rng& rng) {
  position_(0) = rng.uniform(-kStartSpread, kStartSpread);
  position_(1) = rng.uniform(-kStartSpread, kStartSpread);
  velocity_.setZero();
  return observe();
}

void MultimodalReach::set_state(const Vector& position, const Vector& velocity) {
  require_shape(position.size() == 2 && velocity.size() == 2, "reach: state must be 2D");
  position_ = position;
  velocity_ = velocity;
}

Vector MultimodalReach::observe() const {
  Vector obs(4);
  obs << position_, velocity_;
  return obs;
}

StepResult MultimodalReach::step(const Vector& action) {
  const Vector u = clamp_action(action);
  StepResult out;
  velocity_ = (1.0 - kFriction) * velocity_ + kDt * u;
  position_ += kDt * velocity_;
  out.reward = reward(position_, u);
  out.obs = observe();
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pendulum") return std::make_unique<Pendulum>();
  if (name == "reach") return std::make_unique<MultimodalReach>();
  throw UsageError("unknown environment '" + name + "' (expected pendulum or reach)");
}

std::vector<std::string> env_names() { return {"pendulum", "reach"}; }

}  // namespace softbridge::env
