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

#ifndef SOFTBRIDGE_REFERENCE_BIAS_HPP_
#define SOFTBRIDGE_REFERENCE_BIAS_HPP_

#include <functional>
#include <vector>

#include "softbridge/tensor_nn.hpp"

namespace softbridge::bias {

// Endpoint bias of the finite-step reference chain. The 1D pre-tanh uniform
// density is pushed through K Euler kernels on a uniform grid; the d-dim
// laws are products, so every KL scales exactly linearly in d.

struct GridSpec {
  double lo = -8.0;
  double hi = 8.0;
  Index n = 4001;
};

// Per-step |1 - mass| above this means the grid is too narrow.
inline constexpr double kMaxStepMassLoss = 1e-6;

struct DensityGrid1D {
  double lo = 0.0;
  double hi = 0.0;
  Index n = 0;
  Vector values;

  static DensityGrid1D tabulate(const GridSpec& spec, const std::function<double(double)>& density);
  double spacing() const { return (hi - lo) / static_cast<double>(n - 1); }
  double node(Index i) const { return lo + static_cast<double>(i) * spacing(); }
  Vector nodes() const;
  Vector trapezoid_weights() const;
  double integral() const;
  void normalize();
};

DensityGrid1D q_ref_grid(const GridSpec& spec = {});

// Trapezoid KL(p || q) with 0 log 0 = 0.
double grid_kl(const DensityGrid1D& p, const DensityGrid1D& q);

struct Propagation {
  DensityGrid1D density;  // renormalized
  double mass_loss = 0.0;  // 1 - mass before renormalization
};

// Dense Euler transition operator for one step size on one grid.
class EulerKernel {
 public:
  EulerKernel(const GridSpec& spec, double h);
  // Throws GridError when |mass_loss| exceeds kMaxStepMassLoss.
  Propagation apply(const DensityGrid1D& p) const;
  double h() const { return h_; }

 private:
  GridSpec spec_;
  double h_;
  Matrix weights_;  // [target x source], quadrature weights folded in
};

Propagation kernel_propagate(const DensityGrid1D& p, double h);

struct BiasReport {
  int steps = 0;
  double per_dim_kl_forward = 0.0;  // KL(q_ref || p_K)
  double per_dim_kl_reverse = 0.0;  // KL(p_K || q_ref)
  std::vector<int> dims;
  std::vector<double> gap;      // d * per_dim_kl_forward
  std::vector<double> entropy;  // d log 2 - d * per_dim_kl_reverse
  double renormalization_drift = 0.0;
  DensityGrid1D terminal;
};

BiasReport endpoint_gap(int steps, const std::vector<int>& dims, const GridSpec& spec = {});

struct RateSweep {
  std::vector<BiasReport> reports;
  double slope = 0.0;  // least-squares slope of log G_K against log K
  double intercept = 0.0;
};

RateSweep rate_sweep(const std::vector<int>& steps, const std::vector<int>& dims,
                     const GridSpec& spec = {});

}  // namespace softbridge::bias

#endif  // SOFTBRIDGE_REFERENCE_BIAS_HPP_
