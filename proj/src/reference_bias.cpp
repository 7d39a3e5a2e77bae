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

#include "softbridge/reference_bias.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "softbridge/bridge.hpp"
#include "softbridge/errors.hpp"

namespace softbridge::bias {

DensityGrid1D DensityGrid1D::tabulate(const GridSpec& spec,
                                      const std::function<double(double)>& density) {
  require_contract(spec.n >= 3 && spec.hi > spec.lo, "DensityGrid1D: invalid grid");
  DensityGrid1D g{spec.lo, spec.hi, spec.n, Vector(spec.n)};
  for (Index i = 0; i < spec.n; ++i) g.values(i) = density(g.node(i));
  return g;
}

Vector DensityGrid1D::nodes() const {
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = node(i);
  return z;
}

Vector DensityGrid1D::trapezoid_weights() const {
  Vector w = Vector::Constant(n, spacing());
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  return w;
}

double DensityGrid1D::integral() const { return trapezoid_weights().dot(values); }

void DensityGrid1D::normalize() {
  const double mass = integral();
  require_contract(mass > 0.0, "DensityGrid1D: cannot normalize zero mass");
  values /= mass;
}

DensityGrid1D q_ref_grid(const GridSpec& spec) {
  return DensityGrid1D::tabulate(spec, [](double z) { return std::exp(q_ref_log_density(z)); });
}

double grid_kl(const DensityGrid1D& p, const DensityGrid1D& q) {
  require_shape(p.n == q.n && p.lo == q.lo && p.hi == q.hi, "grid_kl: grids differ");
  const Vector w = p.trapezoid_weights();
  double total = 0.0;
  for (Index i = 0; i < p.n; ++i) {
    if (p.values(i) <= 0.0) continue;
    require_contract(q.values(i) > 0.0, "grid_kl: p > 0 where q = 0");
    total += w(i) * p.values(i) * std::log(p.values(i) / q.values(i));
  }
  return total;
}

EulerKernel::EulerKernel(const GridSpec& spec, double h) : spec_(spec), h_(h) {
  require_contract(h > 0.0, "EulerKernel: h must be positive");
  const DensityGrid1D shape{spec.lo, spec.hi, spec.n, Vector::Zero(spec.n)};
  const Vector z = shape.nodes();
  const Vector w = shape.trapezoid_weights();
  const double var = 2.0 * h;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  weights_.resize(spec.n, spec.n);
  for (Index j = 0; j < spec.n; ++j) {
    const double mean = z(j) - 2.0 * h * std::tanh(z(j));
    for (Index i = 0; i < spec.n; ++i) {
      const double d = z(i) - mean;
      weights_(i, j) = w(j) * norm * std::exp(-0.5 * d * d / var);
    }
  }
}

Propagation EulerKernel::apply(const DensityGrid1D& p) const {
  require_shape(p.n == spec_.n && p.lo == spec_.lo && p.hi == spec_.hi,
                "kernel_propagate: grid mismatch");
  Propagation out;
  out.density = p;
  out.density.values.noalias() = weights_ * p.values;
  const double mass = out.density.integral();
  out.mass_loss = 1.0 - mass;
  if (std::abs(out.mass_loss) > kMaxStepMassLoss) {
    throw GridError("kernel_propagate: mass loss " + std::to_string(out.mass_loss) +
                    " exceeds threshold; widen the grid");
  }
  out.density.values /= mass;
  return out;
}

Propagation kernel_propagate(const DensityGrid1D& p, double h) {
  return EulerKernel(GridSpec{p.lo, p.hi, p.n}, h).apply(p);
}

BiasReport endpoint_gap(int steps, const std::vector<int>& dims, const GridSpec& spec) {
  require_contract(steps >= 1, "endpoint_gap: K must be at least 1");
  const double h = 1.0 / static_cast<double>(steps);
  const DensityGrid1D reference = q_ref_grid(spec);
  const EulerKernel kernel(spec, h);

  BiasReport rep;
  rep.steps = steps;
  rep.dims = dims;
  DensityGrid1D p = reference;
  for (int k = 0; k < steps; ++k) {
    Propagation next = kernel.apply(p);
    rep.renormalization_drift += std::abs(next.mass_loss);
    p = std::move(next.density);
  }
  rep.per_dim_kl_forward = grid_kl(reference, p);
  rep.per_dim_kl_reverse = grid_kl(p, reference);
  for (const int d : dims) {
    require_contract(d >= 1, "endpoint_gap: action dimension must be positive");
    rep.gap.push_back(d * rep.per_dim_kl_forward);
    rep.entropy.push_back(d * std::numbers::ln2 - d * rep.per_dim_kl_reverse);
  }
  rep.terminal = std::move(p);
  return rep;
}

RateSweep rate_sweep(const std::vector<int>& steps, const std::vector<int>& dims,
                     const GridSpec& spec) {
  require_contract(steps.size() >= 2, "rate_sweep: need at least two K values");
  RateSweep out;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const int K : steps) {
    out.reports.push_back(endpoint_gap(K, dims, spec));
    const double x = std::log(static_cast<double>(K));
    const double y = std::log(out.reports.back().per_dim_kl_forward);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto n = static_cast<double>(steps.size());
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  out.intercept = (sy - out.slope * sx) / n;
  return out;
}

}  // namespace softbridge::bias
