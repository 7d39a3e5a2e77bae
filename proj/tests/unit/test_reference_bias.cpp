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
#include <numbers>
#include <vector>

#include "doctest.h"
#include "softbridge/errors.hpp"
#include "softbridge/reference_bias.hpp"

using namespace softbridge;
using namespace softbridge::bias;

namespace {

double gauss(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_SUITE("reference_bias") {

TEST_CASE("reference density integrates to one") {
  CHECK(std::abs(q_ref_grid().integral() - 1.0) < 1e-6);
}

TEST_CASE("spike at the origin spreads to N(0, 2h)") {
  const GridSpec spec{-8.0, 8.0, 1601};
  DensityGrid1D p{spec.lo, spec.hi, spec.n, Vector::Zero(spec.n)};
  p.values(spec.n / 2) = 1.0 / p.spacing();
  const double h = 1.0 / 6.0;
  const auto out = kernel_propagate(p, h);
  double worst = 0.0;
  for (Index i = 0; i < spec.n; ++i) {
    worst = std::max(worst, std::abs(out.density.values(i) - gauss(p.node(i), 0.0, 2.0 * h)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("symmetric input stays symmetric") {
  const GridSpec spec{-8.0, 8.0, 801};
  DensityGrid1D p = DensityGrid1D::tabulate(spec, [](double z) {
    return 0.5 * gauss(z, -1.3, 0.2) + 0.5 * gauss(z, 1.3, 0.2);
  });
  for (int k = 0; k < 3; ++k) p = kernel_propagate(p, 0.25).density;
  for (Index i = 0; i < spec.n; ++i) {
    CHECK(std::abs(p.values(i) - p.values(spec.n - 1 - i)) < 1e-14);
  }
}

TEST_CASE("two steps agree with the composed kernel") {
  const GridSpec spec{-8.0, 8.0, 401};
  const double h = 1.0 / 6.0;
  const DensityGrid1D p0 = DensityGrid1D::tabulate(spec, [](double z) { return gauss(z, 0.8, 0.5); });
  const DensityGrid1D two = kernel_propagate(kernel_propagate(p0, h).density, h).density;

  // Composed kernel by double trapezoid sum, written without the library.
  const Index n = spec.n;
  const double dz = (spec.hi - spec.lo) / (n - 1);
  std::vector<double> z(n), w(n, dz);
  for (Index i = 0; i < n; ++i) z[i] = spec.lo + i * dz;
  w[0] *= 0.5;
  w[n - 1] *= 0.5;
  const auto k1 = [&](double to, double from) { return gauss(to, from - 2.0 * h * std::tanh(from), 2.0 * h); };
  std::vector<double> mid(n, 0.0);
  for (Index y = 0; y < n; ++y) {
    for (Index s = 0; s < n; ++s) mid[y] += w[s] * k1(z[y], z[s]) * p0.values(s);
  }
  std::vector<double> direct(n, 0.0);
  double mass = 0.0;
  for (Index x = 0; x < n; ++x) {
    for (Index y = 0; y < n; ++y) direct[x] += w[y] * k1(z[x], z[y]) * mid[y];
    mass += w[x] * direct[x];
  }
  double worst = 0.0;
  for (Index x = 0; x < n; ++x) worst = std::max(worst, std::abs(direct[x] / mass - two.values(x)));
  CHECK(worst < 1e-7);
}

TEST_CASE("narrow grid is rejected") {
  CHECK_THROWS_AS(endpoint_gap(6, {1}, GridSpec{-1.5, 1.5, 301}), GridError);
}

TEST_CASE("K = 6 endpoint gaps") {
  const BiasReport rep = endpoint_gap(6, {19, 21, 38});
  REQUIRE(rep.gap.size() == 3);
  CHECK(std::abs(rep.gap[0] - 0.085) < 0.005);
  CHECK(std::abs(rep.gap[1] - 0.094) < 0.005);
  CHECK(std::abs(rep.gap[2] - 0.169) < 0.005);
  // Per-dim value is shared; the published three-decimal numbers agree with it.
  const double published[3] = {0.085, 0.094, 0.169};
  const int dims[3] = {19, 21, 38};
  for (int i = 0; i < 3; ++i) {
    CHECK(rep.gap[i] / dims[i] == doctest::Approx(rep.per_dim_kl_forward).epsilon(1e-14));
    CHECK(std::abs(published[i] / dims[i] - rep.per_dim_kl_forward) < 0.0005 / dims[i] + 1e-4);
    CHECK(rep.entropy[i] == doctest::Approx(dims[i] * (std::log(2.0) - rep.per_dim_kl_reverse)));
  }
  CHECK(rep.renormalization_drift < 1e-5);
  CHECK(std::abs(rep.terminal.integral() - 1.0) < 1e-12);
}

TEST_CASE("grid refinement leaves the gap unchanged") {
  const double base = endpoint_gap(6, {1}).per_dim_kl_forward;
  const double finer = endpoint_gap(6, {1}, GridSpec{-8.0, 8.0, 8001}).per_dim_kl_forward;
  CHECK(std::abs(base - finer) < 1e-10);
  // Widening the box only adds back the reference tail beyond |z| = 8.
  const double wide = endpoint_gap(6, {1}, GridSpec{-12.0, 12.0, 6001}).per_dim_kl_forward;
  const double tail = 1.0 - std::tanh(8.0);
  CHECK(std::abs(base - wide) < 2.0 * tail);
}

TEST_CASE("rate sweep") {
  const RateSweep sweep = rate_sweep({4, 8, 16, 32, 64}, {1});
  CHECK(std::abs(sweep.slope + 2.0) < 0.15);
  for (std::size_t i = 1; i < sweep.reports.size(); ++i) {
    CHECK(sweep.reports[i].per_dim_kl_forward < sweep.reports[i - 1].per_dim_kl_forward);
    CHECK(sweep.reports[i].per_dim_kl_reverse < sweep.reports[i - 1].per_dim_kl_reverse);
  }
  CHECK_THROWS_AS(rate_sweep({6}, {1}), ContractError);
}

}  // TEST_SUITE
