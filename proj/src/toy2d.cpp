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

#include "softbridge/toy2d.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "softbridge/errors.hpp"
#include "softbridge/temperature.hpp"

namespace softbridge::toy {

namespace {

constexpr std::size_t kChunk = 4096;

}  // namespace

std::array<ToyCritic::Mode, 3> ToyCritic::default_modes() {
  return {Mode{{-0.68, 0.50}, {0.24, 0.24}, 0.90}, Mode{{0.62, 0.50}, {0.24, 0.24}, 1.00},
          Mode{{-0.06, -0.58}, {0.34, 0.32}, 0.70}};
}

ToyCritic::ToyCritic() : modes_(default_modes()) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const double step = 2.0 * kGridEdge / (kGridSize - 1);
  for (int i = 0; i < kGridSize; ++i) {
    for (int j = 0; j < kGridSize; ++j) {
      const double v = raw(-kGridEdge + i * step, -kGridEdge + j * step);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  raw_min_ = lo;
  raw_max_ = hi;
}

double ToyCritic::raw(double a0, double a1) const {
  std::array<double, 3> logits{};
  for (std::size_t m = 0; m < 3; ++m) {
    const double d0 = (a0 - modes_[m].center[0]) / modes_[m].width[0];
    const double d1 = (a1 - modes_[m].center[1]) / modes_[m].width[1];
    logits[m] = std::log(modes_[m].weight) - 0.5 * (d0 * d0 + d1 * d1);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (const double l : logits) s += std::exp(l - top);
  return top + std::log(s);
}

double ToyCritic::operator()(double a0, double a1) const {
  return (raw(a0, a1) - raw_min_) / (raw_max_ - raw_min_);
}

Vector ToyCritic::evaluate(const Matrix& actions, Matrix* grad) const {
  require_shape(actions.cols() == 2, "ToyCritic: actions must be [B x 2]");
  const double inv_range = 1.0 / (raw_max_ - raw_min_);
  Vector q(actions.rows());
  if (grad != nullptr) grad->resize(actions.rows(), 2);
  for (Index b = 0; b < actions.rows(); ++b) {
    const double a0 = actions(b, 0);
    const double a1 = actions(b, 1);
    std::array<double, 3> logits{};
    for (std::size_t m = 0; m < 3; ++m) {
      const double d0 = (a0 - modes_[m].center[0]) / modes_[m].width[0];
      const double d1 = (a1 - modes_[m].center[1]) / modes_[m].width[1];
      logits[m] = std::log(modes_[m].weight) - 0.5 * (d0 * d0 + d1 * d1);
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double& l : logits) {
      l = std::exp(l - top);
      s += l;
    }
    q(b) = (top + std::log(s) - raw_min_) * inv_range;
    if (grad != nullptr) {
      double g0 = 0.0, g1 = 0.0;
      for (std::size_t m = 0; m < 3; ++m) {
        const double w = logits[m] / s;
        g0 -= w * (a0 - modes_[m].center[0]) / (modes_[m].width[0] * modes_[m].width[0]);
        g1 -= w * (a1 - modes_[m].center[1]) / (modes_[m].width[1] * modes_[m].width[1]);
      }
      (*grad)(b, 0) = g0 * inv_range;
      (*grad)(b, 1) = g1 * inv_range;
    }
  }
  return q;
}

Histogram2D Histogram2D::empty(double lo, double hi, Index bins) {
  require_contract(hi > lo && bins >= 1, "Histogram2D: invalid box");
  return Histogram2D{lo, hi, bins, Matrix::Zero(bins, bins), 0.0};
}

double Histogram2D::bin_center(Index i) const {
  return lo + (static_cast<double>(i) + 0.5) * (hi - lo) / static_cast<double>(bins);
}

void Histogram2D::add(double x, double y) {
  const double scale = static_cast<double>(bins) / (hi - lo);
  const double fx = (x - lo) * scale;
  const double fy = (y - lo) * scale;
  if (!(fx >= 0.0 && fx < bins && fy >= 0.0 && fy < bins)) {
    outside += 1.0;
    return;
  }
  mass(static_cast<Index>(fx), static_cast<Index>(fy)) += 1.0;
}

void Histogram2D::normalize(std::size_t samples) {
  const double inv = 1.0 / static_cast<double>(samples);
  mass *= inv;
  outside *= inv;
}

BridgeConfig ToyConfig::bridge() const {
  return BridgeConfig::make(steps, static_cast<Index>(dummy_obs.size()), 2, width);
}

Matrix ToyConfig::observations(Index rows) const {
  Matrix obs(rows, static_cast<Index>(dummy_obs.size()));
  for (Index j = 0; j < obs.cols(); ++j) obs.col(j).setConstant(dummy_obs[static_cast<std::size_t>(j)]);
  return obs;
}

std::array<double, 3> mode_masses(const Matrix& actions) {
  const auto modes = ToyCritic::default_modes();
  std::array<double, 3> out{};
  if (actions.rows() == 0) return out;
  for (Index b = 0; b < actions.rows(); ++b) {
    for (std::size_t m = 0; m < 3; ++m) {
      const double d0 = actions(b, 0) - modes[m].center[0];
      const double d1 = actions(b, 1) - modes[m].center[1];
      if (d0 * d0 + d1 * d1 <= kModeRadius * kModeRadius) out[m] += 1.0;
    }
  }
  for (double& v : out) v /= static_cast<double>(actions.rows());
  return out;
}

EndpointSamples endpoint_histogram(const BridgeActorParams& params, const ToyConfig& config,
                                   std::size_t n_samples, Rng& rng) {
  const BridgeConfig cfg = config.bridge();
  EndpointSamples out;
  out.samples = n_samples;
  out.endpoint = Histogram2D::empty(-1.0, 1.0, config.endpoint_bins);
  for (int k = 0; k <= cfg.steps; ++k) {
    out.latents.push_back(
        Histogram2D::empty(-config.latent_extent, config.latent_extent, config.latent_bins));
  }
  std::array<double, 3> counts{};
  double energy_sum = 0.0;
  for (std::size_t done = 0; done < n_samples; done += kChunk) {
    const auto rows = static_cast<Index>(std::min(kChunk, n_samples - done));
    const auto noise = sample_bridge_noise(rows, cfg.steps, 2, rng, config.noise());
    const BridgeBatch batch = bridge_forward(params, cfg, config.observations(rows), noise);
    for (Index b = 0; b < rows; ++b) {
      out.endpoint.add(batch.actions(b, 0), batch.actions(b, 1));
      for (int k = 0; k <= cfg.steps; ++k) {
        out.latents[k].add(batch.latents[k](b, 0), batch.latents[k](b, 1));
      }
    }
    const auto masses = mode_masses(batch.actions);
    for (std::size_t m = 0; m < 3; ++m) counts[m] += masses[m] * static_cast<double>(rows);
    energy_sum += batch.energies().sum();
  }
  if (n_samples > 0) {
    out.endpoint.normalize(n_samples);
    for (auto& h : out.latents) h.normalize(n_samples);
    for (std::size_t m = 0; m < 3; ++m) out.mode_mass[m] = counts[m] / static_cast<double>(n_samples);
    out.mean_energy = energy_sum / static_cast<double>(n_samples);
  }
  return out;
}

BudgetRun train_budget(const ToyCritic& critic, double rho, std::uint64_t seed,
                       const ToyConfig& config) {
  require_contract(rho > 0.0 && std::isfinite(rho), "train_budget: rho must be positive");
  const BridgeConfig cfg = config.bridge();
  const Rng root = Rng(seed).split("toy2d").split(std::bit_cast<std::uint64_t>(rho));
  Rng init_rng = root.split("init");
  Rng noise_rng = root.split("noise");
  Rng eval_rng = root.split("eval");

  BudgetRun run;
  run.rho = rho;
  run.target = rho * cfg.steps * 2.0;
  run.params = BridgeActorParams::init(cfg, init_rng);
  BridgeActorParams grads = BridgeActorParams::zeros(cfg);
  const ParamList param_refs = run.params.params();
  const ParamList grad_refs = grads.params();
  AdamState adam(total_size(param_refs), AdamConfig{config.actor_lr});
  TemperatureDual dual(config.initial_alpha, run.target, config.alpha_lr);

  const Index B = config.batch;
  const Matrix obs = config.observations(B);
  run.alpha_trace.reserve(config.train_steps);
  run.energy_trace.reserve(config.train_steps);
  for (int t = 0; t < config.train_steps; ++t) {
    const auto noise = sample_bridge_noise(B, cfg.steps, 2, noise_rng, config.noise());
    BridgeTape tape;
    BridgeBatch batch;
    try {
      batch = bridge_forward(run.params, cfg, obs, noise, &tape);
    } catch (const DivergenceError& e) {
      throw DivergenceError("toy2d rho=" + std::to_string(rho) + " step " + std::to_string(t) +
                            ": " + e.what());
    }
    Matrix dq;
    critic.evaluate(batch.actions, &dq);
    const double mean_energy = batch.energies().mean();
    const double alpha = dual.alpha();

    set_zero(grad_refs);
    const Matrix d_actions = -dq / static_cast<double>(B);
    const Vector d_energies = Vector::Constant(B, alpha / static_cast<double>(B));
    bridge_backward(run.params, cfg, tape, d_actions, d_energies, grads);
    if (!adam.step(param_refs, grad_refs)) {
      throw DivergenceError("toy2d rho=" + std::to_string(rho) + " step " + std::to_string(t) +
                            ": non-finite actor gradient");
    }
    dual.update(mean_energy);
    run.alpha_trace.push_back(alpha);
    run.energy_trace.push_back(mean_energy);
  }

  const std::size_t n = run.energy_trace.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 5);
  if (n > 0) {
    double s = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) s += run.energy_trace[i];
    run.tail_mean_energy = s / static_cast<double>(tail);
  }
  run.samples = endpoint_histogram(run.params, config, config.histogram_samples, eval_rng);
  return run;
}

}  // namespace softbridge::toy
