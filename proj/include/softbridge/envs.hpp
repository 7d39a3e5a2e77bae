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

#ifndef SOFTBRIDGE_ENVS_HPP_
#define SOFTBRIDGE_ENVS_HPP_

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "softbridge/rng.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge::env {

struct EnvSpec {
  std::string name;
  Index obs_dim = 0;
  Index action_dim = 0;
  Vector action_low;
  Vector action_high;
  int horizon = 0;

  Vector action_scale() const { return 0.5 * (action_high - action_low); }
  Vector action_bias() const { return 0.5 * (action_high + action_low); }
};

struct StepResult {
  Vector obs;
  double reward = 0.0;
  bool done = false;  // true termination only; the time limit is not termination
};

// Deterministic given the reset stream. Out-of-bounds actions are clamped and
// counted.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Vector reset(Rng& rng) = 0;
  virtual StepResult step(const Vector& action) = 0;
  virtual Vector observe() const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  std::size_t clamp_warnings() const { return clamp_warnings_; }

 protected:
  Vector clamp_action(const Vector& action);

 private:
  std::size_t clamp_warnings_ = 0;
};

// Swing-up: state (theta, theta_dot) with theta = 0 upright.
class Pendulum final : public Env {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  Pendulum();

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  Vector observe() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<Pendulum>(*this); }

  void set_state(double theta, double theta_dot);
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }

  static double wrap_angle(double x);
  static double reward(double theta, double theta_dot, double torque);

 private:
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

// Point mass in the plane with two equally good goals at (+-0.7, 0).
class MultimodalReach final : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kFriction = 0.1;  // fraction of velocity lost per step
  static constexpr double kGoalX = 0.7;
  static constexpr double kStartSpread = 0.05;
  static constexpr double kReachRadius = 0.15;

  MultimodalReach();

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Vector& action) override;
  Vector observe() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MultimodalReach>(*this); }

  void set_state(const Vector& position, const Vector& velocity);
  const Vector& position() const { return position_; }
  const Vector& velocity() const { return velocity_; }

  static double reward(const Vector& position, const Vector& action);
  // -1 for the left goal, +1 for the right goal, 0 when neither is within
  // kReachRadius.
  static int goal_at(const Vector& position);

 private:
  EnvSpec spec_;
  Vector position_;
  Vector velocity_;
};

std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

}  // namespace softbridge::env

#endif  // SOFTBRIDGE_ENVS_HPP_
