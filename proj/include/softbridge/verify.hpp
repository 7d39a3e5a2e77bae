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

#ifndef SOFTBRIDGE_VERIFY_HPP_
#define SOFTBRIDGE_VERIFY_HPP_

#include <cstddef>
#include <cstdint>

#include "json.hpp"

namespace softbridge::verify {

struct VerifyOptions {
  std::size_t instances = 60;
  double tolerance = 1e-9;
  std::size_t mc_samples = 100000;
  double mc_sigmas = 3.0;
  int gradient_draws = 20;
  double gradient_tolerance = 1e-4;
};

struct GradientCheck {
  double max_relative_error = 0.0;
  int draws = 0;
  std::size_t parameters = 0;
};

// Reverse-mode gradient of the sampled actor loss (frozen noise, d_a = 1,
// K = 2, batch 4) against central differences over every actor parameter.
GradientCheck actor_gradient_check(std::uint64_t seed, int draws);

// Runs every check and returns a JSON report with an overall "passed" flag.
nlohmann::ordered_json run_all(std::uint64_t seed, const VerifyOptions& options = {});

}  // namespace softbridge::verify

#endif  // SOFTBRIDGE_VERIFY_HPP_
