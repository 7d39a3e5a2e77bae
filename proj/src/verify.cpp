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

#include "softbridge/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "softbridge/bridge.hpp"
#include "softbridge/critic.hpp"
#include "softbridge/path_oracle.hpp"
#include "softbridge/rng.hpp"
#include "softbridge/softgac.hpp"

namespace softbridge::verify {

GradientCheck actor_gradient_check(std::uint64_t seed, int draws) {
  const Rng root = Rng(seed).split("verify.gradient");
  GradientCheck out;
  out.draws = draws;
  for (int d = 0; d < draws; ++d) {
    Rng rng = root.split(static_cast<std::uint64_t>(d));
    const BridgeConfig cfg = BridgeConfig::make(2, 2, 1, 8);
    BridgeActorParams actor = oracle::random_spread_actor(cfg, rng, 2.0);
    const TwinCritic critic = TwinCritic::init(3, 8, rng);
    const Index batch = 4;
    Matrix obs(batch, 2);
    for (Index i = 0; i < obs.size(); ++i) obs.data()[i] = rng.normal();
    const auto noise = sample_bridge_noise(batch, cfg.steps, 1, rng);
    const double alpha = rng.uniform(0.1, 1.0);

    BridgeActorParams grad = BridgeActorParams::zeros(cfg);
    gac::actor_loss_and_grad(actor, cfg, critic, obs, noise, alpha, &grad);
    const std::vector<double> analytic = flatten(grad.params());

    const ParamList params = actor.params();
    std::vector<double> flat = flatten(params);
    std::vector<double> numeric(flat.size());
    const double eps = 1e-6;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double keep = flat[i];
      flat[i] = keep + eps;
      unflatten(params, flat);
      const double up = gac::actor_loss_and_grad(actor, cfg, critic, obs, noise, alpha, nullptr).loss;
      flat[i] = keep - eps;
      unflatten(params, flat);
      const double down =
          gac::actor_loss_and_grad(actor, cfg, critic, obs, noise, alpha, nullptr).loss;
      flat[i] = keep;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    unflatten(params, flat);

    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      diff2 += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      a2 += analytic[i] * analytic[i];
      n2 += numeric[i] * numeric[i];
    }
    const double rel = std::sqrt(diff2) / std::max(1e-300, std::max(std::sqrt(a2), std::sqrt(n2)));
    out.max_relative_error = std::max(out.max_relative_error, rel);
    out.parameters = flat.size();
  }
  return out;
}

nlohmann::ordered_json run_all(std::uint64_t seed, const VerifyOptions& options) {
  using nlohmann::ordered_json;
  ordered_json report;
  report["seed"] = seed;
  bool passed = true;

  const oracle::OracleSuiteReport suite =
      oracle::run_discrete_suite(options.instances, seed, options.tolerance);
  ordered_json ids = ordered_json::array();
  for (const auto& r : suite.identities) {
    ids.push_back({{"name", r.name},
                   {"max_residual", r.max_residual},
                   {"tolerance", r.tolerance},
                   {"checks", r.checks},
                   {"failures", r.failures},
                   {"passed", r.passed()}});
  }
  report["discrete"] = {{"instances", suite.instances},
                        {"seconds", suite.seconds},
                        {"passed", suite.passed()},
                        {"identities", ids}};
  passed = passed && suite.passed();

  const Rng root = Rng(seed).split("verify");
  {
    Rng rng = root.split("energy_kl");
    const BridgeConfig cfg = BridgeConfig::make(6, 2, 2, 32);
    const BridgeActorParams actor = oracle::random_spread_actor(cfg, rng, 2.0);
    Vector obs(2);
    obs << rng.normal(), rng.normal();
    Rng logistic_rng = rng.split("logistic");
    Rng gaussian_rng = rng.split("gaussian");
    const auto logistic = oracle::energy_kl_monte_carlo(actor, cfg, obs, options.mc_samples,
                                                     logistic_rng, BaseLaw::kLogistic);
    const auto gaussian = oracle::energy_kl_monte_carlo(actor, cfg, obs, options.mc_samples,
                                                     gaussian_rng, BaseLaw::kGaussian);
    auto entry = [&](const oracle::MonteCarloAgreement& m) {
      return ordered_json{{"samples", m.samples},
                          {"mean_energy", m.mean_energy},
                          {"mean_log_ratio", m.mean_log_ratio},
                          {"expected_offset", m.expected_offset},
                          {"difference", m.difference},
                          {"standard_error", m.standard_error},
                          {"z_score", m.z_score()},
                          {"passed", m.within(options.mc_sigmas)}};
    };
    report["control_energy_monte_carlo"] = {{"logistic_base", entry(logistic)},
                                            {"gaussian_base", entry(gaussian)}};
    passed = passed && logistic.within(options.mc_sigmas) && gaussian.within(options.mc_sigmas);
  }

  {
    const GradientCheck g = actor_gradient_check(seed, options.gradient_draws);
    const bool ok = g.max_relative_error < options.gradient_tolerance;
    report["actor_gradient"] = {{"draws", g.draws},
                                {"parameters", g.parameters},
                                {"max_relative_error", g.max_relative_error},
                                {"tolerance", options.gradient_tolerance},
                                {"passed", ok}};
    passed = passed && ok;
  }

  report["passed"] = passed;
  return report;
}

}  // namespace softbridge::verify
