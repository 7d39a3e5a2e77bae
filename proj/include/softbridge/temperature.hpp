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

#ifndef SOFTBRIDGE_TEMPERATURE_HPP_
#define SOFTBRIDGE_TEMPERATURE_HPP_

#include <cstddef>

#include "softbridge/tensor_nn.hpp"

namespace softbridge {

inline constexpr double kMinAlpha = 1e-8;
inline constexpr double kMaxAlpha = 1e4;

// Dual on log alpha for the loss alpha * (target - mean energy). The gradient
// w.r.t. log alpha is alpha * (target - mean energy), so alpha grows while
// the mean energy sits above the target.
class TemperatureDual {
 public:
  TemperatureDual() : TemperatureDual(1.0, 0.0, 1e-3) {}
  TemperatureDual(double initial_alpha, double target, double lr);

  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  double target() const { return target_; }
  std::size_t clamp_warnings() const { return clamp_warnings_; }

  static double gradient(double log_alpha, double target, double mean_energy);
  // Returns false (and leaves alpha alone) when mean_energy is not finite.
  bool update(double mean_energy);

 private:
  double log_alpha_;
  double target_;
  AdamState adam_;
  std::size_t clamp_warnings_ = 0;
};

}  // namespace softbridge

#endif  // SOFTBRIDGE_TEMPERATURE_HPP_
