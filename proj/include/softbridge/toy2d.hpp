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

#ifndef SOFTBRIDGE_TOY2D_HPP_
#define SOFTBRIDGE_TOY2D_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "softbridge/bridge.hpp"
#include "softbridge/rng.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge::toy {

// Fixed three-mode critic on (-1, 1)^2, min-max normalized over a grid.
class ToyCritic {
 public:
  struct Mode {
    std::array<double, 2> center;
    std::array<double, 2> width;
    double weight;
  };

  static constexpr int kGridSize = 401;
  static constexpr double kGridEdge = 0.999;

  ToyCritic();

  static std::array<Mode, 3> default_modes();

  const std::array<Mode, 3>& modes() const { return modes_; }
  double raw_min() const { return raw_min_; }
  double raw_max() const { return raw_max_; }

  // log sum_m w_m exp(-0.5 |(a - c_m) / sigma_m|^2)
  double raw(double a0, double a1) const;
  double operator()(double a0, double a1) const;
  // Normalized values and their gradients for a batch of actions [B x 2].
  Vector evaluate(const Matrix& actions, Matrix* grad = nullptr) const;

 private:
  std::array<Mode, 3> modes_;
  double raw_min_ = 0.0;
  double raw_max_ = 1.0;
};

struct Histogram2D {
  double lo = -1.0;
  double hi = 1.0;
  Index bins = 64;
  Matrix mass;           // [bins x bins]; row = first coordinate
  double outside = 0.0;  // fraction of samples outside the box

  static Histogram2D empty(double lo, double hi, Index bins);
  double bin_center(Index i) const;
  void add(double x, double y);
  void normalize(std::size_t samples);
  double total() const { return mass.sum(); }
};

struct EndpointSamples {
  Histogram2D endpoint;
  std::vector<Histogram2D> latents;  // steps 0..K
  std::array<double, 3> mode_mass{};  // fraction within kModeRadius of each center
  double mean_energy = 0.0;
  std::size_t samples = 0;
};

inline constexpr double kModeRadius = 0.25;
inline constexpr double kToyBaseClip = 0.995;

struct ToyConfig {
  int steps = 6;
  Index width = 128;
  Index batch = 256;
  int train_steps = 20000;
  double actor_lr = 3e-4;
  double alpha_lr = 1e-3;
  double initial_alpha = 1.0;
  std::size_t histogram_samples = 100000;
  Index endpoint_bins = 64;
  Index latent_bins = 64;
  double latent_extent = 4.0;
  // Constant observation fed to every block. Two distinct entries keep the
  // input layer norm injective in z; a single zero entry would not be.
  std::array<double, 2> dummy_obs{1.0, -1.0};

  BridgeConfig bridge() const;
  Matrix observations(Index rows) const;
  NoiseSpec noise() const { return NoiseSpec{BaseLaw::kLogistic, 1.0 - kToyBaseClip}; }
};

struct BudgetRun {
  double rho = 0.0;
  double target = 0.0;  // rho * K * d_a
  BridgeActorParams params;
  std::vector<double> alpha_trace;
  std::vector<double> energy_trace;  // batch mean C per step
  double tail_mean_energy = 0.0;     // over the last 20% of steps
  EndpointSamples samples;
};

// One bridge actor per budget; alpha follows the dual on log alpha.
BudgetRun train_budget(const ToyCritic& critic, double rho, std::uint64_t seed,
                       const ToyConfig& config = {});

EndpointSamples endpoint_histogram(const BridgeActorParams& params, const ToyConfig& config,
                                   std::size_t n_samples, Rng& rng);

// Fraction of rows within kModeRadius of each default center.
std::array<double, 3> mode_masses(const Matrix& actions);

}  // namespace softbridge::toy

#endif  // SOFTBRIDGE_TOY2D_HPP_
