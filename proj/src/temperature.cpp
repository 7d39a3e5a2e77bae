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

#include "softbridge/temperature.hpp"

#include <cmath>
#include <algorithm>
#include <span>

#include "softbridge/errors.hpp"

namespace softbridge {

TemperatureDual::TemperatureDual(double initial_alpha, double target, double lr)
    : log_alpha_(std::log(initial_alpha)), target_(target), adam_(1, AdamConfig{lr}) {
  require_contract(initial_alpha > 0.0 && std::isfinite(initial_alpha),
                   "TemperatureDual: alpha must be positive");
}

// exp(log(1e-8)) can round just below 1e-8.
double TemperatureDual::alpha() const {
  return std::clamp(std::exp(log_alpha_), kMinAlpha, kMaxAlpha);
}

double TemperatureDual::gradient(double log_alpha, double target, double mean_energy) {
  return std::exp(log_alpha) * (target - mean_energy);
}

bool TemperatureDual::update(double mean_energy) {
  if (!std::isfinite(mean_energy)) return false;
  double grad = gradient(log_alpha_, target_, mean_energy);
  const ParamList p{ParamRef{"log_alpha", 1, 1, std::span<double>(&log_alpha_, 1)}};
  const ParamList g{ParamRef{"log_alpha", 1, 1, std::span<double>(&grad, 1)}};
  if (!adam_.step(p, g)) return false;
  const double lo = std::log(kMinAlpha);
  const double hi = std::log(kMaxAlpha);
  if (log_alpha_ < lo || log_alpha_ > hi) {
    log_alpha_ = std::clamp(log_alpha_, lo, hi);
    ++clamp_warnings_;
  }
  return true;
}

}  // namespace softbridge
