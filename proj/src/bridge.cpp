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

#include "softbridge/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "softbridge/errors.hpp"

namespace softbridge {

BridgeConfig BridgeConfig::make(int steps, Index obs_dim, Index action_dim, Index hidden_width,
                                Vector action_scale, Vector action_bias) {
  BridgeConfig cfg;
  cfg.steps = steps;
  cfg.obs_dim = obs_dim;
  cfg.action_dim = action_dim;
  cfg.hidden_width = hidden_width;
  cfg.action_scale = action_scale.size() == 0 ? Vector::Ones(action_dim) : std::move(action_scale);
  cfg.action_bias = action_bias.size() == 0 ? Vector::Zero(action_dim) : std::move(action_bias);
  cfg.h = steps > 0 ? 1.0 / static_cast<double>(steps) : 0.0;
  cfg.validate();
  return cfg;
}

void BridgeConfig::validate() const {
  require_contract(steps >= 1, "BridgeConfig: K must be at least 1");
  require_contract(obs_dim >= 0 && action_dim >= 1 && hidden_width >= 2,
                   "BridgeConfig: invalid dimensions");
  require_contract(obs_dim + action_dim >= 2, "BridgeConfig: block input needs at least 2 features");
  require_contract(h == 1.0 / static_cast<double>(steps), "BridgeConfig: h must equal 1/K");
  require_shape(action_scale.size() == action_dim && action_bias.size() == action_dim,
                "BridgeConfig: action scale/bias dimension mismatch");
  require_contract((action_scale.array() > 0.0).all(), "BridgeConfig: action_scale must be positive");
}

BridgeActorParams BridgeActorParams::init(const BridgeConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index in = cfg.obs_dim + cfg.action_dim;
  BridgeActorParams p;
  p.blocks.reserve(static_cast<std::size_t>(cfg.steps));
  for (int k = 0; k < cfg.steps; ++k) {
    BridgeBlock b;
    b.pre_norm = LayerNorm::identity(in);
    b.trunk = DenseLayer::init(in, cfg.hidden_width, rng);
    b.post_norm = LayerNorm::identity(cfg.hidden_width);
    b.drift_head = DenseLayer::init(cfg.hidden_width, cfg.action_dim, rng);
    b.scale_head = DenseLayer::init(cfg.hidden_width, cfg.action_dim, rng);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

BridgeActorParams BridgeActorParams::zeros(const BridgeConfig& cfg) {
  const Index in = cfg.obs_dim + cfg.action_dim;
  BridgeActorParams p;
  for (int k = 0; k < cfg.steps; ++k) {
    p.blocks.push_back(BridgeBlock{LayerNorm::zeros(in), DenseLayer::zeros(in, cfg.hidden_width),
                                   LayerNorm::zeros(cfg.hidden_width),
                                   DenseLayer::zeros(cfg.hidden_width, cfg.action_dim),
                                   DenseLayer::zeros(cfg.hidden_width, cfg.action_dim)});
  }
  return p;
}

ParamList BridgeActorParams::params() {
  ParamList out;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const std::string prefix = "actor.block" + std::to_string(k);
    blocks[k].pre_norm.append_params(out, prefix + ".pre_norm");
    blocks[k].trunk.append_params(out, prefix + ".trunk");
    blocks[k].post_norm.append_params(out, prefix + ".post_norm");
    blocks[k].drift_head.append_params(out, prefix + ".drift");
    blocks[k].scale_head.append_params(out, prefix + ".scale");
  }
  return out;
}

std::size_t BridgeActorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    n += static_cast<std::size_t>(b.pre_norm.gain.size() + b.pre_norm.offset.size());
    n += static_cast<std::size_t>(b.trunk.weight.size() + b.trunk.bias.size());
    n += static_cast<std::size_t>(b.post_norm.gain.size() + b.post_norm.offset.size());
    n += static_cast<std::size_t>(b.drift_head.weight.size() + b.drift_head.bias.size());
    n += static_cast<std::size_t>(b.scale_head.weight.size() + b.scale_head.bias.size());
  }
  return n;
}

std::size_t bridge_parameter_count(const BridgeConfig& cfg) {
  const auto in = static_cast<std::size_t>(cfg.obs_dim + cfg.action_dim);
  const auto w = static_cast<std::size_t>(cfg.hidden_width);
  const auto d = static_cast<std::size_t>(cfg.action_dim);
  const std::size_t per_block = 2 * in + (in * w + w) + 2 * w + 2 * (w * d + d);
  return per_block * static_cast<std::size_t>(cfg.steps);
}

double path_control_energy(const BridgePath& path) {
  double total = 0.0;
  for (const double c : path.local_costs) total += c;
  return total;
}

BridgePath BridgeBatch::path(Index row) const {
  BridgePath p;
  for (const auto& m : latents) p.latents.push_back(m.row(row).transpose());
  for (const auto& m : drifts) p.drifts.push_back(m.row(row).transpose());
  for (const auto& m : scales) p.scales.push_back(m.row(row).transpose());
  for (const auto& m : noises) p.noises.push_back(m.row(row).transpose());
  for (Index k = 0; k < local_costs.cols(); ++k) p.local_costs.push_back(local_costs(row, k));
  p.action = actions.row(row).transpose();
  p.block_evaluations = block_evaluations;
  return p;
}

// ---------------------------------------------------------------------------
// Base law, reference kernel, costs

double base_latent_from_uniform(double u, double clip_margin) {
  const double bound = 1.0 - clip_margin;
  return std::atanh(std::clamp(u, -bound, bound));
}

namespace {

// log cosh(z) without overflow.
double log_cosh(double z) {
  const double a = std::abs(z);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}
}  // namespace

Vector sample_base_logistic(Index action_dim, Rng& rng, double clip_margin) {
  require_contract(action_dim >= 1, "sample_base_logistic: action_dim must be at least 1");
  Vector z(action_dim);
  for (Index i = 0; i < action_dim; ++i) z(i) = base_latent_from_uniform(rng.uniform(-1.0, 1.0), clip_margin);
  return z;
}

std::vector<Matrix> sample_bridge_noise(Index batch, int steps, Index action_dim, Rng& rng,
                                        const NoiseSpec& spec) {
  std::vector<Matrix> noise(static_cast<std::size_t>(steps) + 1, Matrix(batch, action_dim));
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < action_dim; ++i) {
      noise[0](b, i) = spec.base == BaseLaw::kLogistic
                           ? base_latent_from_uniform(rng.uniform(-1.0, 1.0), spec.clip_margin)
                           : rng.normal();
    }
    for (int k = 1; k <= steps; ++k) {
      for (Index i = 0; i < action_dim; ++i) noise[static_cast<std::size_t>(k)](b, i) = rng.normal();
    }
  }
  return noise;
}

double q_ref_log_density(double z) { return -std::numbers::ln2 - 2.0 * log_cosh(z); }

double q_ref_log_density(const Vector& z) {
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) total += q_ref_log_density(z(i));
  return total;
}

Vector reference_mean(const Vector& z, double h) {
  return z - 2.0 * h * z.array().tanh().matrix();
}

Vector reference_step(const Vector& z, const Vector& eps, double h) {
  require_shape(z.size() == eps.size(), "reference_step: dimension mismatch");
  return reference_mean(z, h) + std::sqrt(2.0 * h) * eps;
}

double local_control_cost(const Vector& actor_mean, const Vector& actor_scale, const Vector& z,
                          double h) {
  require_shape(actor_mean.size() == z.size() && actor_scale.size() == z.size(),
                "local_control_cost: dimension mismatch");
  require_contract((actor_scale.array() > 0.0).all(), "local_control_cost: scale must be positive");
  const Vector mean_gap = actor_mean - reference_mean(z, h);
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double var = actor_scale(i) * actor_scale(i);
    total += 0.5 * (var + mean_gap(i) * mean_gap(i) / (2.0 * h) - 1.0 - std::log(var));
  }
  return total;
}

Vector terminal_map(const Vector& z, const Vector& action_scale, const Vector& action_bias) {
  require_shape(z.size() == action_scale.size() && z.size() == action_bias.size(),
                "terminal_map: dimension mismatch");
  return action_scale.cwiseProduct(z.array().tanh().matrix()) + action_bias;
}

// ---------------------------------------------------------------------------
// Forward / backward

BridgePath actor_forward(const BridgeActorParams& params, const Matrix& noise_rows,
                         const Vector& obs, const BridgeConfig& cfg) {
  require_shape(noise_rows.rows() == cfg.steps + 1 && noise_rows.cols() == cfg.action_dim,
                "actor_forward: noise must be (K+1) x action_dim");
  std::vector<Matrix> noise;
  noise.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (Index k = 0; k <= cfg.steps; ++k) noise.push_back(noise_rows.row(k));
  const Matrix obs_row = obs.transpose();
  return bridge_forward(params, cfg, obs_row, noise).path(0);
}

BridgeBatch bridge_forward(const BridgeActorParams& params, const BridgeConfig& cfg,
                           const Matrix& obs, const std::vector<Matrix>& noise, BridgeTape* tape) {
  const auto K = static_cast<std::size_t>(cfg.steps);
  require_shape(params.blocks.size() == K, "bridge_forward: parameter block count != K");
  require_shape(noise.size() == K + 1, "bridge_forward: need K+1 noise slices");
  const Index batch = noise[0].rows();
  const Index da = cfg.action_dim;
  const Index ds = cfg.obs_dim;
  require_shape(obs.rows() == batch && obs.cols() == ds, "bridge_forward: observation shape mismatch");
  for (const auto& n : noise) {
    require_shape(n.rows() == batch && n.cols() == da, "bridge_forward: noise shape mismatch");
  }

  const double h = cfg.h;
  const double diffusion = std::sqrt(2.0 * h);

  BridgeBatch out;
  out.latents.reserve(K + 1);
  out.drifts.reserve(K);
  out.scales.reserve(K);
  out.noises = noise;
  out.local_costs.resize(batch, static_cast<Index>(K));
  out.latents.push_back(noise[0]);
  if (tape != nullptr) tape->blocks.assign(K, {});

  Matrix input(batch, ds + da);
  if (ds > 0) input.leftCols(ds) = obs;
  for (std::size_t k = 0; k < K; ++k) {
    const BridgeBlock& blk = params.blocks[k];
    const Matrix& z = out.latents.back();
    input.rightCols(da) = z;

    LayerNormCache pre_cache;
    LayerNormCache post_cache;
    Matrix trunk_in = layernorm_forward(blk.pre_norm, input, tape ? &pre_cache : nullptr);
    Matrix trunk_pre = dense_forward(blk.trunk, trunk_in);
    Matrix head_in = layernorm_forward(blk.post_norm, activation_forward(Activation::kElu, trunk_pre),
                                       tape ? &post_cache : nullptr);
    Matrix drift = dense_forward(blk.drift_head, head_in);
    Matrix scale_pre = dense_forward(blk.scale_head, head_in);
    Matrix scale = activation_forward(Activation::kSoftplus, scale_pre);
    ++out.block_evaluations;

    const Matrix& eps = noise[k + 1];
    Matrix z_next = z + h * drift + diffusion * scale.cwiseProduct(eps);

    // 0.5 * sum_i [sigma^2 + h (u + 2 tanh z)^2 / 2 - 1 - log sigma^2]
    const auto gap = drift.array() + 2.0 * z.array().tanh();
    const auto var = scale.array().square();
    out.local_costs.col(static_cast<Index>(k)) =
        0.5 * (var + 0.5 * h * gap.square() - 1.0 - var.log()).rowwise().sum();

    if (!z_next.allFinite() || !scale.allFinite() || !drift.allFinite()) {
      throw DivergenceError("bridge_forward: non-finite value in block " + std::to_string(k));
    }
    if (scale.maxCoeff() > kMaxScale) {
      throw DivergenceError("bridge_forward: scale above guard in block " + std::to_string(k));
    }

    if (tape != nullptr) {
      auto& rec = tape->blocks[k];
      rec.input = input;
      rec.pre_cache = std::move(pre_cache);
      rec.trunk_in = std::move(trunk_in);
      rec.trunk_pre = std::move(trunk_pre);
      rec.post_cache = std::move(post_cache);
      rec.head_in = std::move(head_in);
      rec.scale_pre = std::move(scale_pre);
    }
    out.drifts.push_back(std::move(drift));
    out.scales.push_back(std::move(scale));
    out.latents.push_back(std::move(z_next));
  }

  const Matrix& zk = out.latents.back();
  out.actions = (zk.array().tanh().rowwise() * cfg.action_scale.transpose().array()).rowwise() +
                cfg.action_bias.transpose().array();
  if (!out.local_costs.allFinite()) throw DivergenceError("bridge_forward: non-finite control cost");

  if (tape != nullptr) {
    tape->batch = out;
    tape->mark_recorded();
  }
  return out;
}

void bridge_backward(const BridgeActorParams& params, const BridgeConfig& cfg, BridgeTape& tape,
                     const Matrix& d_actions, const Vector& d_energies, BridgeActorParams& grad) {
  tape.consume();
  const BridgeBatch& b = tape.batch;
  const auto K = static_cast<std::size_t>(cfg.steps);
  const Index batch = b.batch_size();
  const Index da = cfg.action_dim;
  require_shape(d_actions.rows() == batch && d_actions.cols() == da,
                "bridge_backward: action gradient shape mismatch");
  require_shape(d_energies.size() == batch, "bridge_backward: energy gradient size mismatch");
  require_shape(grad.blocks.size() == K, "bridge_backward: gradient block count != K");

  const double h = cfg.h;
  const double diffusion = std::sqrt(2.0 * h);
  const auto w = d_energies.array();

  // a = scale * tanh(z_K) + bias
  const Matrix& zk = b.latents[K];
  Matrix dz = (d_actions.array().rowwise() * cfg.action_scale.transpose().array()) *
              (1.0 - zk.array().tanh().square());

  for (std::size_t k = K; k-- > 0;) {
    const BridgeBlock& blk = params.blocks[k];
    BridgeBlock& g = grad.blocks[k];
    const auto& rec = tape.blocks[k];
    const auto z = b.latents[k].array();
    const auto u = b.drifts[k].array();
    const auto sigma = b.scales[k].array();
    const auto eps = b.noises[k + 1].array();
    const auto t = z.tanh();
    const auto gap = u + 2.0 * t;

    Matrix du = h * dz.array() + (0.5 * h * gap).colwise() * w;
    Matrix dsigma = diffusion * eps * dz.array() + (sigma - sigma.inverse()).colwise() * w;
    Matrix dz_prev = dz.array() + (h * gap * (1.0 - t.square())).colwise() * w;

    const Matrix dscale_pre = activation_backward(Activation::kSoftplus, rec.scale_pre, dsigma);
    dense_backward(blk.drift_head, rec.head_in, du, &g.drift_head, false);
    dense_backward(blk.scale_head, rec.head_in, dscale_pre, &g.scale_head, false);
    // Both heads read head_in; one product writes its gradient once.
    Matrix d_heads(batch, 2 * da);
    d_heads << du, dscale_pre;
    Matrix w_heads(2 * da, blk.drift_head.in_dim());
    w_heads << blk.drift_head.weight, blk.scale_head.weight;
    Matrix d_head_in(batch, w_heads.cols());
    d_head_in.noalias() = d_heads * w_heads;
    const Matrix d_act = layernorm_backward(blk.post_norm, rec.post_cache, d_head_in, &g.post_norm);
    const Matrix d_trunk_pre = activation_backward(Activation::kElu, rec.trunk_pre, d_act);
    const Matrix d_trunk_in = dense_backward(blk.trunk, rec.trunk_in, d_trunk_pre, &g.trunk);
    const Matrix d_input = layernorm_backward(blk.pre_norm, rec.pre_cache, d_trunk_in, &g.pre_norm);

    dz_prev += d_input.rightCols(da);
    dz = std::move(dz_prev);
  }
}

}  // namespace softbridge
