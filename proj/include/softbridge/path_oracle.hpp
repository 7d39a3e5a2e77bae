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

#ifndef SOFTBRIDGE_PATH_ORACLE_HPP_
#define SOFTBRIDGE_PATH_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softbridge/bridge.hpp"
#include "softbridge/rng.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge::oracle {

/*
 * Exact path-space identities on finite alphabets.
 *
 * A path is (z_0, ..., z_K) with z_k in {0..M-1}; paths are indexed with z_0
 * as the most significant base-M digit. Every quantity is computed by full
 * enumeration, so identities can be checked to machine precision. The only
 * randomness is in instance generation.
 */

inline constexpr std::size_t kMaxEnumeratedPaths = 10'000'000;

// Markov path law: initial distribution plus one row-stochastic kernel per step.
struct PathLaw {
  Vector base;
  std::vector<Matrix> kernels;

  Index states() const { return base.size(); }
  int horizon() const { return static_cast<int>(kernels.size()); }
  void validate() const;
};

struct DiscretePathSpace {
  PathLaw reference;
  std::vector<int> terminal_map;  // latent state -> action index
  Vector values;                  // Q per action
  double alpha = 1.0;

  Index states() const { return reference.states(); }
  int horizon() const { return reference.horizon(); }
  Index actions() const { return values.size(); }
  void validate() const;
};

// Relative entropy of discrete laws with 0 log(0/q) = 0. Throws ContractError
// when p > 0 where q = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const Vector& p, const Vector& q);

std::vector<double> enumerate_path_probs(const PathLaw& law);
std::vector<int> decode_path(std::size_t code, Index states, int horizon);

// Marginal law of z_k, read off the enumerated path probabilities.
Vector marginal_from_paths(const std::vector<double>& probs, Index states, int horizon, int step);
Vector endpoint_law(const std::vector<double>& probs, Index states,
                    const std::vector<int>& terminal_map, Index actions);

double path_kl(const PathLaw& p, const PathLaw& r);
// Sum of the initial KL and the expected per-step row KLs.
double local_kl_sum(const PathLaw& p, const PathLaw& r);

struct ChainRuleSplit {
  double endpoint_kl = 0.0;
  double conditional_kl = 0.0;
};
ChainRuleSplit chain_rule_decompose(const PathLaw& p, const PathLaw& r,
                                    const std::vector<int>& terminal_map, Index actions);

// E_P[Q(T(z_K))] - alpha KL(P || R), by enumeration.
double soft_objective(const DiscretePathSpace& space, const PathLaw& law);

struct TiltResult {
  PathLaw law;                    // Markov form of the tilted law
  std::vector<double> path_probs;  // explicit dP*/dR * R
  double log_partition = 0.0;     // log Z_Q (unrestricted) or log bar-Z_Q
  Vector conditional_log_partition;  // log Z_Q(z_0) per base state
  double objective = 0.0;          // closed-form optimal value
};

// dP*/dR = exp(Q(T(z_K)) / alpha) / Z_Q.
TiltResult tilt_unrestricted(const DiscretePathSpace& space);
// p_0(z_0) exp(Q / alpha) / Z_Q(z_0) R(tau_{1:K} | z_0); objective
// alpha E_{p0}[log Z_Q(z_0)] - alpha KL(p_0 || r_0).
TiltResult tilt_fixed_base(const DiscretePathSpace& space, const Vector& base);

struct BaseGapReport {
  double gap = 0.0;                 // Delta(s)
  double path_kl = 0.0;             // KL(P*_{Q,p0} || P*_Q)
  double endpoint_kl = 0.0;         // KL(pi*_{Q,p0} || pi*_Q)
  double objective_gap = 0.0;       // unrestricted minus fixed-base optimum
  double initial_kl_to_tilt = 0.0;  // KL(p_0 || P*_{Q,0})
  double identity_residual = 0.0;   // |path_kl - gap / alpha|
  double objective_residual = 0.0;  // |objective_gap - gap|
  double tilt_residual = 0.0;       // |initial_kl_to_tilt - gap / alpha|
  bool ok(double tol) const;
};
BaseGapReport base_gap_identities(const DiscretePathSpace& space, const Vector& base);

struct ProjectionReport {
  double actor_loss = 0.0;  // enumerated E[alpha (log dP/dR - base term) - Q]
  double identity_rhs = 0.0;
  double residual = 0.0;
};
ProjectionReport actor_projection_identity(const DiscretePathSpace& space, const Vector& base,
                                           const PathLaw& actor);

// Instance generation (seeded; the only randomness in this module).
Vector random_simplex(Rng& rng, Index n, double zero_prob = 0.0);
PathLaw random_law(Rng& rng, Index states, int horizon);
PathLaw random_law_with_base(Rng& rng, const Vector& base, int horizon);
DiscretePathSpace random_space(Rng& rng, int max_states, int max_horizon);
// Mixes `law` toward a random law with the same base; stays absolutely continuous.
PathLaw perturb_law(Rng& rng, const PathLaw& law, double weight, bool keep_base);

// Aggregated sweep over random instances.
struct IdentityResult {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  bool passed() const { return failures == 0; }
};

struct OracleSuiteReport {
  std::size_t instances = 0;
  std::vector<IdentityResult> identities;
  double seconds = 0.0;
  bool passed() const;
};

OracleSuiteReport run_discrete_suite(std::size_t instances, std::uint64_t seed,
                                     double tolerance = 1e-9);

// ---------------------------------------------------------------------------
// Continuous spot checks on the Gaussian bridge.

// sum_k [log q_k(z_{k+1} | z_k) - log r_k(z_{k+1} | z_k)] from the stored
// path values, using raw Gaussian log-densities.
double transition_log_ratio(const BridgePath& path, double h);

// KL(N(0, 1) || q_ref) per dimension, by trapezoid quadrature on [-12, 12].
double gaussian_base_kl_to_reference();

struct MonteCarloAgreement {
  std::size_t samples = 0;
  double mean_energy = 0.0;
  double mean_log_ratio = 0.0;
  double expected_offset = 0.0;  // analytic difference log_ratio - energy
  double difference = 0.0;       // mean(log_ratio - energy) - expected_offset
  double standard_error = 0.0;   // of the paired difference
  double z_score() const { return standard_error > 0 ? difference / standard_error : 0.0; }
  bool within(double n_se) const;
};

// Samples paths at a fixed observation. With a logistic base the log ratio
// has no base term and expected_offset is 0; with a Gaussian base the base
// log ratio log p0(z0) - log q_ref(z0) is included and the offset is
// d_a * gaussian_base_kl_to_reference().
MonteCarloAgreement energy_kl_monte_carlo(const BridgeActorParams& params, const BridgeConfig& cfg,
                                       const Vector& obs, std::size_t samples, Rng& rng,
                                       BaseLaw base = BaseLaw::kLogistic);

// Random actor with enlarged head weights so the transitions differ visibly
// from the reference.
BridgeActorParams random_spread_actor(const BridgeConfig& cfg, Rng& rng, double head_gain);

}  // namespace softbridge::oracle

#endif  // SOFTBRIDGE_PATH_ORACLE_HPP_
