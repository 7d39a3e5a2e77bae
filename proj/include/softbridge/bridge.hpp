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

#ifndef SOFTBRIDGE_BRIDGE_HPP_
#define SOFTBRIDGE_BRIDGE_HPP_

#include <cstddef>
#include <vector>

#include "softbridge/rng.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge {

/*
 * Soft bridge policy.
 *
 * A bridge is a K-step Markov chain in pre-tanh latent space:
 *
 *   z_0 ~ p_0
 *   z_{k+1} = z_k + h u_k(s, z_k) + sqrt(2h) sigma_k(s, z_k) * eps_{k+1}
 *   a = action_scale * tanh(z_K) + action_bias,             h = 1 / K
 *
 * Every step has its own transition block. The reference chain uses drift
 * -2 tanh(z) and unit scale, and starts from the pre-tanh density whose tanh
 * image is uniform. Each actor step contributes the closed-form Gaussian KL
 * between its kernel and the reference kernel at the same z_k; their sum is
 * the path control energy.
 */

// Pre-tanh base clip: |u| <= 1 - kBaseClipMargin before arctanh.
inline constexpr double kBaseClipMargin = 1e-6;
// Scales above this are treated as divergence.
inline constexpr double kMaxScale = 1e3;

struct BridgeConfig {
  int steps = 6;  // K
  Index obs_dim = 1;
  Index action_dim = 1;
  Index hidden_width = 512;
  Vector action_scale;
  Vector action_bias;
  double h = 1.0 / 6.0;  // always 1.0 / steps

  // Unit scale and zero bias when the vectors are empty.
  static BridgeConfig make(int steps, Index obs_dim, Index action_dim, Index hidden_width,
                           Vector action_scale = {}, Vector action_bias = {});
  void validate() const;
};

struct BridgeBlock {
  LayerNorm pre_norm;
  DenseLayer trunk;
  LayerNorm post_norm;
  DenseLayer drift_head;
  DenseLayer scale_head;  // softplus applied on top
};

struct BridgeActorParams {
  std::vector<BridgeBlock> blocks;

  static BridgeActorParams init(const BridgeConfig& cfg, Rng& rng);
  // Same layout, all entries zero (layer-norm gains included). Used as a
  // gradient accumulator.
  static BridgeActorParams zeros(const BridgeConfig& cfg);

  ParamList params();
  std::size_t parameter_count() const;
};

// Closed-form parameter count from the layer dimensions.
std::size_t bridge_parameter_count(const BridgeConfig& cfg);

// One sampled trajectory. Stored values satisfy the recursion exactly.
struct BridgePath {
  std::vector<Vector> latents;  // z_0..z_K
  std::vector<Vector> drifts;   // u_0..u_{K-1}
  std::vector<Vector> scales;   // sigma_0..sigma_{K-1}
  std::vector<Vector> noises;   // eps_0..eps_K; eps_0 is the base latent itself
  std::vector<double> local_costs;
  Vector action;
  std::size_t block_evaluations = 0;
};

double path_control_energy(const BridgePath& path);

// Batched trajectories; every matrix is [batch x action_dim].
struct BridgeBatch {
  std::vector<Matrix> latents;
  std::vector<Matrix> drifts;
  std::vector<Matrix> scales;
  std::vector<Matrix> noises;
  Matrix local_costs;  // [batch x K]
  Matrix actions;
  std::size_t block_evaluations = 0;

  Index batch_size() const { return actions.rows(); }
  Vector energies() const { return local_costs.rowwise().sum(); }
  BridgePath path(Index row) const;
};

// Intermediates of one batched forward pass.
struct BridgeTape : GradTape {
  struct Block {
    Matrix input;  // concat(obs, z_k)
    LayerNormCache pre_cache;
    Matrix trunk_in;
    Matrix trunk_pre;
    LayerNormCache post_cache;
    Matrix head_in;
    Matrix scale_pre;
  };
  std::vector<Block> blocks;
  BridgeBatch batch;
};

enum class BaseLaw {
  kLogistic,  // arctanh of a clipped uniform: the reference base
  kGaussian,  // standard normal, for fixed-base comparisons
};

struct NoiseSpec {
  BaseLaw base = BaseLaw::kLogistic;
  double clip_margin = kBaseClipMargin;
};

// arctanh(u) with u clipped to +-(1 - clip_margin).
double base_latent_from_uniform(double u, double clip_margin = kBaseClipMargin);
// z_0 = arctanh(u), u ~ Uniform(-1, 1)^d clipped to +-(1 - clip_margin).
Vector sample_base_logistic(Index action_dim, Rng& rng, double clip_margin = kBaseClipMargin);

// K+1 matrices [batch x action_dim]. Row b consumes the stream in order:
// base latent, then eps_1..eps_K, so row b is independent of the batch size.
std::vector<Matrix> sample_bridge_noise(Index batch, int steps, Index action_dim, Rng& rng,
                                        const NoiseSpec& spec = {});

// Log density of the pre-tanh uniform law: sum_i [-log 2 - 2 log cosh z_i].
double q_ref_log_density(const Vector& z);
double q_ref_log_density(double z);

Vector reference_mean(const Vector& z, double h);
Vector reference_step(const Vector& z, const Vector& eps, double h);

// KL( N(actor_mean, 2h diag(actor_scale^2)) || N(z - 2h tanh z, 2h I) ).
double local_control_cost(const Vector& actor_mean, const Vector& actor_scale, const Vector& z,
                          double h);

Vector terminal_map(const Vector& z, const Vector& action_scale, const Vector& action_bias);

// noise: [(K+1) x action_dim]; row 0 is the base latent, rows 1..K are
// standard normal draws.
BridgePath actor_forward(const BridgeActorParams& params, const Matrix& noise_rows,
                         const Vector& obs, const BridgeConfig& cfg);

// obs: [batch x obs_dim]. Throws DivergenceError on non-finite values or a
// scale above kMaxScale.
BridgeBatch bridge_forward(const BridgeActorParams& params, const BridgeConfig& cfg,
                           const Matrix& obs, const std::vector<Matrix>& noise,
                           BridgeTape* tape = nullptr);

// Backpropagates d(loss)/d(actions) and d(loss)/d(energy_b) through the
// recorded pass, accumulating into `grad`. Consumes the tape.
void bridge_backward(const BridgeActorParams& params, const BridgeConfig& cfg, BridgeTape& tape,
                     const Matrix& d_actions, const Vector& d_energies, BridgeActorParams& grad);

}  // namespace softbridge

#endif  // SOFTBRIDGE_BRIDGE_HPP_
