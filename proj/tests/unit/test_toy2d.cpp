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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "softbridge/bridge.hpp"
#include "softbridge/reference_bias.hpp"
#include "softbridge/toy2d.hpp"

using namespace softbridge;
using namespace softbridge::toy;

namespace {

double direct_raw(double a0, double a1) {
  // Same three bumps, written out term by term.
  const double c[3][2] = {{-0.68, 0.50}, {0.62, 0.50}, {-0.06, -0.58}};
  const double s[3][2] = {{0.24, 0.24}, {0.24, 0.24}, {0.34, 0.32}};
  const double w[3] = {0.90, 1.00, 0.70};
  double sum = 0.0;
  for (int m = 0; m < 3; ++m) {
    const double u = (a0 - c[m][0]) / s[m][0];
    const double v = (a1 - c[m][1]) / s[m][1];
    sum += w[m] * std::exp(-0.5 * (u * u + v * v));
  }
  return std::log(sum);
}

ToyConfig small_config() {
  ToyConfig c;
  c.width = 16;
  c.batch = 32;
  c.train_steps = 40;
  c.histogram_samples = 2000;
  return c;
}

}  // namespace

TEST_SUITE("toy2d") {

TEST_CASE("critic: argmax, normalization, direct formula") {
  const ToyCritic q;
  const auto& modes = q.modes();
  CHECK(modes[1].center[0] == 0.62);
  CHECK(modes[1].center[1] == 0.50);
  const double at_c2 = q.raw(0.62, 0.50);
  CHECK(at_c2 > q.raw(modes[0].center[0], modes[0].center[1]));
  CHECK(at_c2 > q.raw(modes[2].center[0], modes[2].center[1]));

  // Grid argmax and exact [0, 1] span over the normalization grid.
  const int n = ToyCritic::kGridSize;
  const double e = ToyCritic::kGridEdge, step = 2.0 * e / (n - 1);
  double best = -1e300, lo = 1e300, hi = -1e300;
  double arg0 = 0.0, arg1 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double a0 = -e + i * step, a1 = -e + j * step;
      const double v = q(a0, a1);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v > best) {
        best = v;
        arg0 = a0;
        arg1 = a1;
      }
    }
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
  CHECK(std::hypot(arg0 - 0.62, arg1 - 0.50) < 0.05);

  CHECK(q.raw(0.0, 0.0) == doctest::Approx(direct_raw(0.0, 0.0)).epsilon(1e-14));
  CHECK(q.raw(0.3, -0.9) == doctest::Approx(direct_raw(0.3, -0.9)).epsilon(1e-14));
  // At the origin the third bump carries most of the sum.
  const double t3 = 0.70 * std::exp(-0.5 * (std::pow(0.06 / 0.34, 2) + std::pow(0.58 / 0.32, 2)));
  CHECK(t3 > 0.5 * std::exp(q.raw(0.0, 0.0)));
}

TEST_CASE("critic gradient vs central differences") {
  const ToyCritic q;
  Rng rng(1);
  Matrix a(16, 2);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-0.98, 0.98);
  Matrix grad;
  const Vector v = q.evaluate(a, &grad);
  for (Index b = 0; b < 16; ++b) {
    CHECK(v(b) == doctest::Approx(q(a(b, 0), a(b, 1))).epsilon(1e-14));
    const double e = 1e-6;
    const double g0 = (q(a(b, 0) + e, a(b, 1)) - q(a(b, 0) - e, a(b, 1))) / (2 * e);
    const double g1 = (q(a(b, 0), a(b, 1) + e) - q(a(b, 0), a(b, 1) - e)) / (2 * e);
    CHECK(grad(b, 0) == doctest::Approx(g0).epsilon(1e-6));
    CHECK(grad(b, 1) == doctest::Approx(g1).epsilon(1e-6));
  }
}

TEST_CASE("histogram bookkeeping") {
  Histogram2D h = Histogram2D::empty(-1.0, 1.0, 4);
  h.add(-0.9, -0.9);
  h.add(0.9, -0.1);
  h.add(1.5, 0.0);
  h.add(0.0, 0.0);
  h.normalize(4);
  CHECK(h.total() + h.outside == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(h.outside == 0.25);
  CHECK(h.mass(0, 0) == 0.25);
  CHECK(h.mass(3, 1) == 0.25);
  CHECK(h.bin_center(0) == -0.75);
}

TEST_CASE("reference chain endpoint is nearly uniform") {
  // Slack for the finite-step bias: chi-square noise plus about 2 N KL.
  const int K = 6, bins = 16;
  const std::size_t n = 200000;
  const double per_dim = bias::endpoint_gap(K, {1}).per_dim_kl_reverse;
  Histogram2D h = Histogram2D::empty(-1.0, 1.0, bins);
  Rng rng(2);
  const double hstep = 1.0 / K;
  for (std::size_t i = 0; i < n; ++i) {
    Vector z = sample_base_logistic(2, rng);
    for (int k = 0; k < K; ++k) z = reference_step(z, Vector{{rng.normal(), rng.normal()}}, hstep);
    h.add(std::tanh(z(0)), std::tanh(z(1)));
  }
  h.normalize(n);
  CHECK(h.total() == doctest::Approx(1.0).epsilon(1e-15));
  double chi2 = 0.0;
  const double e = 1.0 / (bins * bins);
  for (Index i = 0; i < h.mass.size(); ++i) {
    const double d = h.mass.data()[i] - e;
    chi2 += static_cast<double>(n) * d * d / e;
  }
  const double dof = bins * bins - 1.0;
  const double slack = dof + 5.0 * std::sqrt(2.0 * dof) + 2.0 * n * (2.0 * per_dim) * 1.5;
  CHECK(chi2 < slack);
  // And far from what a visibly non-uniform law would give.
  CHECK(chi2 > dof / 2.0);
}

TEST_CASE("step-0 latent marginal passes a KS test against the reference") {
  ToyConfig c = small_config();
  const BridgeConfig cfg = c.bridge();
  Rng init(3);
  const BridgeActorParams p = BridgeActorParams::init(cfg, init);
  Rng rng(4);
  const std::size_t n = 100000;
  const EndpointSamples s = endpoint_histogram(p, c, n, rng);
  REQUIRE(s.latents.size() == static_cast<std::size_t>(c.steps) + 1);
  const Histogram2D& h0 = s.latents[0];
  CHECK(h0.total() + h0.outside == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.endpoint.total() + s.endpoint.outside == doctest::Approx(1.0).epsilon(1e-12));
  // The base clip moves at most (1 - clip)/2 of the mass per tail.
  const double clip_shift = (1.0 - kToyBaseClip) / 2.0;
  const double crit = 1.63 / std::sqrt(static_cast<double>(n)) + clip_shift;
  for (int dim = 0; dim < 2; ++dim) {
    const Vector marginal = dim == 0 ? Vector(h0.mass.rowwise().sum()) : Vector(h0.mass.colwise().sum().transpose());
    double cdf = 0.0, worst = 0.0;
    const double width = (h0.hi - h0.lo) / h0.bins;
    const double below_box = 0.5 * (1.0 + std::tanh(h0.lo));
    for (Index i = 0; i < h0.bins; ++i) {
      cdf += marginal(i);
      const double edge = h0.lo + (i + 1) * width;
      worst = std::max(worst, std::abs(below_box + cdf - 0.5 * (1.0 + std::tanh(edge))));
    }
    CHECK(worst < crit);
  }
}

TEST_CASE("training is deterministic per seed and tracks the budget sign") {
  const ToyCritic q;
  const ToyConfig c = small_config();
  const BudgetRun a = train_budget(q, 0.05, 7, c);
  const BudgetRun b = train_budget(q, 0.05, 7, c);
  CHECK(a.alpha_trace == b.alpha_trace);
  CHECK(a.energy_trace == b.energy_trace);
  CHECK(a.target == doctest::Approx(0.05 * 12.0));
  CHECK(a.alpha_trace.size() == static_cast<std::size_t>(c.train_steps));
  const BudgetRun other = train_budget(q, 0.05, 8, c);
  CHECK(other.energy_trace != a.energy_trace);
}

TEST_CASE("very large budget concentrates near the argmax mode") {
  const ToyCritic q;
  const BudgetRun run = train_budget(q, 10.0, 0);
  CHECK(run.alpha_trace.back() < 1e-2);
  const auto& m = run.samples.mode_mass;
  CHECK(m[1] > 0.5);
  CHECK(m[1] > m[0]);
  CHECK(m[1] > m[2]);
}

}  // TEST_SUITE
