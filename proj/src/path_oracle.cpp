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

#include "softbridge/path_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "softbridge/errors.hpp"

namespace softbridge::oracle {

namespace {

constexpr double kStochasticTol = 1e-12;

std::size_t path_count(Index states, int horizon) {
  double n = std::pow(static_cast<double>(states), horizon + 1);
  require_contract(n <= static_cast<double>(kMaxEnumeratedPaths),
                   "enumerate_path_probs: " + std::to_string(static_cast<long long>(n)) +
                       " paths exceeds the enumeration cap");
  std::size_t count = 1;
  for (int k = 0; k <= horizon; ++k) count *= static_cast<std::size_t>(states);
  return count;
}

double log_ratio_or_zero(double p, double q) {
  if (p == 0.0) return 0.0;
  require_contract(q > 0.0, "absolute continuity violated: p > 0 where reference is 0");
  return std::log(p / q);
}

}  // namespace

void PathLaw::validate() const {
  const Index m = states();
  require_contract(m >= 1, "PathLaw: empty alphabet");
  require_contract(std::abs(base.sum() - 1.0) <= kStochasticTol && (base.array() >= 0.0).all(),
                   "PathLaw: base is not a probability vector");
  for (const auto& kern : kernels) {
    require_shape(kern.rows() == m && kern.cols() == m, "PathLaw: kernel must be M x M");
    require_contract((kern.array() >= 0.0).all(), "PathLaw: negative kernel entry");
    const Vector rows = kern.rowwise().sum();
    require_contract(((rows.array() - 1.0).abs() <= kStochasticTol).all(),
                     "PathLaw: kernel rows must sum to 1");
  }
}

void DiscretePathSpace::validate() const {
  reference.validate();
  require_contract(alpha > 0.0, "DiscretePathSpace: alpha must be positive");
  require_shape(static_cast<Index>(terminal_map.size()) == states(),
                "DiscretePathSpace: terminal map must cover every state");
  for (const int a : terminal_map) {
    require_contract(a >= 0 && a < actions(), "DiscretePathSpace: terminal map out of range");
  }
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_shape(p.size() == q.size(), "kl_divergence: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] == 0.0 ? 0.0 : p[i] * log_ratio_or_zero(p[i], q[i]);
  return total;
}

double kl_divergence(const Vector& p, const Vector& q) {
  return kl_divergence(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                       std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

std::vector<double> enumerate_path_probs(const PathLaw& law) {
  law.validate();
  const Index m = law.states();
  const std::size_t total = path_count(m, law.horizon());
  std::vector<double> probs(law.base.data(), law.base.data() + m);
  probs.reserve(total);
  for (const auto& kern : law.kernels) {
    std::vector<double> next(probs.size() * static_cast<std::size_t>(m));
    for (std::size_t prefix = 0; prefix < probs.size(); ++prefix) {
      const auto last = static_cast<Index>(prefix % static_cast<std::size_t>(m));
      for (Index j = 0; j < m; ++j) {
        next[prefix * static_cast<std::size_t>(m) + static_cast<std::size_t>(j)] =
            probs[prefix] * kern(last, j);
      }
    }
    probs = std::move(next);
  }
  return probs;
}

std::vector<int> decode_path(std::size_t code, Index states, int horizon) {
  std::vector<int> path(static_cast<std::size_t>(horizon) + 1);
  for (int k = horizon; k >= 0; --k) {
    path[static_cast<std::size_t>(k)] = static_cast<int>(code % static_cast<std::size_t>(states));
    code /= static_cast<std::size_t>(states);
  }
  return path;
}

Vector marginal_from_paths(const std::vector<double>& probs, Index states, int horizon, int step) {
  Vector marginal = Vector::Zero(states);
  for (std::size_t code = 0; code < probs.size(); ++code) {
    marginal(decode_path(code, states, horizon)[static_cast<std::size_t>(step)]) += probs[code];
  }
  return marginal;
}

Vector endpoint_law(const std::vector<double>& probs, Index states,
                    const std::vector<int>& terminal_map, Index actions) {
  Vector law = Vector::Zero(actions);
  const auto m = static_cast<std::size_t>(states);
  for (std::size_t code = 0; code < probs.size(); ++code) law(terminal_map[code % m]) += probs[code];
  return law;
}

double path_kl(const PathLaw& p, const PathLaw& r) {
  require_shape(p.states() == r.states() && p.horizon() == r.horizon(), "path_kl: layout mismatch");
  return kl_divergence(enumerate_path_probs(p), enumerate_path_probs(r));
}

double local_kl_sum(const PathLaw& p, const PathLaw& r) {
  require_shape(p.states() == r.states() && p.horizon() == r.horizon(),
                "local_kl_sum: layout mismatch");
  double total = kl_divergence(p.base, r.base);
  Vector marginal = p.base;
  for (int k = 0; k < p.horizon(); ++k) {
    const auto& pk = p.kernels[static_cast<std::size_t>(k)];
    const auto& rk = r.kernels[static_cast<std::size_t>(k)];
    for (Index z = 0; z < p.states(); ++z) {
      if (marginal(z) == 0.0) continue;
      const Vector prow = pk.row(z).transpose();
      const Vector rrow = rk.row(z).transpose();
      total += marginal(z) * kl_divergence(prow, rrow);
    }
    marginal = (marginal.transpose() * pk).transpose();
  }
  return total;
}

ChainRuleSplit chain_rule_decompose(const PathLaw& p, const PathLaw& r,
                                    const std::vector<int>& terminal_map, Index actions) {
  const auto pp = enumerate_path_probs(p);
  const auto rp = enumerate_path_probs(r);
  const Vector pe = endpoint_law(pp, p.states(), terminal_map, actions);
  const Vector re = endpoint_law(rp, r.states(), terminal_map, actions);
  ChainRuleSplit split;
  split.endpoint_kl = kl_divergence(pe, re);
  const auto m = static_cast<std::size_t>(p.states());
  for (std::size_t code = 0; code < pp.size(); ++code) {
    if (pp[code] == 0.0) continue;
    const int a = terminal_map[code % m];
    split.conditional_kl +=
        pp[code] * (log_ratio_or_zero(pp[code], rp[code]) - std::log(pe(a) / re(a)));
  }
  return split;
}

namespace {

double soft_objective_cached(const DiscretePathSpace& space, const std::vector<double>& ref_probs,
                             const std::vector<double>& probs) {
  const auto m = static_cast<std::size_t>(space.states());
  double value = 0.0;
  double kl = 0.0;
  for (std::size_t code = 0; code < probs.size(); ++code) {
    if (probs[code] == 0.0) continue;
    value += probs[code] * space.values(space.terminal_map[code % m]);
    kl += probs[code] * log_ratio_or_zero(probs[code], ref_probs[code]);
  }
  return value - space.alpha * kl;
}

struct Messages {
  std::vector<Vector> beta;  // beta_0..beta_K, shifted by exp(-q_max / alpha)
  double q_max = 0.0;
};

Messages backward_messages(const DiscretePathSpace& space) {
  space.validate();
  const Index m = space.states();
  const int K = space.horizon();
  Messages msg;
  msg.q_max = space.values.maxCoeff();
  msg.beta.assign(static_cast<std::size_t>(K) + 1, Vector(m));
  for (Index z = 0; z < m; ++z) {
    msg.beta[static_cast<std::size_t>(K)](z) =
        std::exp((space.values(space.terminal_map[static_cast<std::size_t>(z)]) - msg.q_max) /
                 space.alpha);
  }
  for (int k = K - 1; k >= 0; --k) {
    msg.beta[static_cast<std::size_t>(k)] =
        space.reference.kernels[static_cast<std::size_t>(k)] * msg.beta[static_cast<std::size_t>(k) + 1];
  }
  return msg;
}

std::vector<Matrix> tilted_kernels(const DiscretePathSpace& space, const Messages& msg) {
  std::vector<Matrix> kernels;
  for (int k = 0; k < space.horizon(); ++k) {
    const Matrix& rk = space.reference.kernels[static_cast<std::size_t>(k)];
    const Vector& here = msg.beta[static_cast<std::size_t>(k)];
    const Vector& next = msg.beta[static_cast<std::size_t>(k) + 1];
    Matrix tilted = rk;
    for (Index z = 0; z < rk.rows(); ++z) {
      if (here(z) > 0.0) tilted.row(z) = rk.row(z).cwiseProduct(next.transpose()) / here(z);
    }
    kernels.push_back(std::move(tilted));
  }
  return kernels;
}

// exp((Q(T(z_K)) - q_max) / alpha) for the path's terminal state.
double terminal_weight(const DiscretePathSpace& space, const Messages& msg, std::size_t code) {
  const auto m = static_cast<std::size_t>(space.states());
  return msg.beta[static_cast<std::size_t>(space.horizon())](static_cast<Index>(code % m));
}

std::size_t base_state(std::size_t code, Index states, int horizon) {
  for (int k = 0; k < horizon; ++k) code /= static_cast<std::size_t>(states);
  return code;
}

}  // namespace

double soft_objective(const DiscretePathSpace& space, const PathLaw& law) {
  return soft_objective_cached(space, enumerate_path_probs(space.reference), enumerate_path_probs(law));
}

TiltResult tilt_unrestricted(const DiscretePathSpace& space) {
  const Messages msg = backward_messages(space);
  const Vector& beta0 = msg.beta[0];
  const Vector& r0 = space.reference.base;
  const double shifted_z = r0.dot(beta0);

  TiltResult out;
  out.log_partition = std::log(shifted_z) + msg.q_max / space.alpha;
  out.conditional_log_partition = beta0.array().log() + msg.q_max / space.alpha;
  out.law.base = r0.cwiseProduct(beta0) / shifted_z;
  out.law.kernels = tilted_kernels(space, msg);
  out.path_probs = enumerate_path_probs(space.reference);
  for (std::size_t code = 0; code < out.path_probs.size(); ++code) {
    out.path_probs[code] *= terminal_weight(space, msg, code) / shifted_z;
  }
  out.objective = space.alpha * out.log_partition;
  return out;
}

TiltResult tilt_fixed_base(const DiscretePathSpace& space, const Vector& base) {
  require_shape(base.size() == space.states(), "tilt_fixed_base: base dimension mismatch");
  require_contract(std::abs(base.sum() - 1.0) <= kStochasticTol && (base.array() >= 0.0).all(),
                   "tilt_fixed_base: base is not a probability vector");
  const Vector& r0 = space.reference.base;
  for (Index z = 0; z < base.size(); ++z) {
    require_contract(base(z) == 0.0 || r0(z) > 0.0,
                     "tilt_fixed_base: base not absolutely continuous w.r.t. the reference base");
  }
  const Messages msg = backward_messages(space);
  const Vector& beta0 = msg.beta[0];

  TiltResult out;
  out.conditional_log_partition = beta0.array().log() + msg.q_max / space.alpha;
  out.log_partition = std::log(r0.dot(beta0)) + msg.q_max / space.alpha;
  out.law.base = base;
  out.law.kernels = tilted_kernels(space, msg);
  out.path_probs = enumerate_path_probs(space.reference);
  const Index m = space.states();
  for (std::size_t code = 0; code < out.path_probs.size(); ++code) {
    const auto z0 = static_cast<Index>(base_state(code, m, space.horizon()));
    if (base(z0) == 0.0) {
      out.path_probs[code] = 0.0;
      continue;
    }
    out.path_probs[code] *= (base(z0) / r0(z0)) * terminal_weight(space, msg, code) / beta0(z0);
  }
  double expected_log_z = 0.0;
  for (Index z = 0; z < m; ++z) {
    if (base(z) > 0.0) expected_log_z += base(z) * out.conditional_log_partition(z);
  }
  out.objective = space.alpha * expected_log_z - space.alpha * kl_divergence(base, r0);
  return out;
}

bool BaseGapReport::ok(double tol) const {
  return gap >= -tol && identity_residual <= tol && objective_residual <= tol &&
         tilt_residual <= tol && endpoint_kl <= path_kl + tol;
}

BaseGapReport base_gap_identities(const DiscretePathSpace& space, const Vector& base) {
  const TiltResult free_tilt = tilt_unrestricted(space);
  const TiltResult fixed_tilt = tilt_fixed_base(space, base);
  const double alpha = space.alpha;

  double expected_log_z = 0.0;
  for (Index z = 0; z < base.size(); ++z) {
    if (base(z) > 0.0) expected_log_z += base(z) * free_tilt.conditional_log_partition(z);
  }
  BaseGapReport rep;
  rep.gap = alpha * (free_tilt.log_partition - expected_log_z +
                     kl_divergence(base, space.reference.base));
  rep.path_kl = kl_divergence(fixed_tilt.path_probs, free_tilt.path_probs);
  const Vector fixed_end =
      endpoint_law(fixed_tilt.path_probs, space.states(), space.terminal_map, space.actions());
  const Vector free_end =
      endpoint_law(free_tilt.path_probs, space.states(), space.terminal_map, space.actions());
  rep.endpoint_kl = kl_divergence(fixed_end, free_end);
  const auto ref_probs = enumerate_path_probs(space.reference);
  rep.objective_gap = free_tilt.objective - soft_objective_cached(space, ref_probs, fixed_tilt.path_probs);
  rep.initial_kl_to_tilt = kl_divergence(base, free_tilt.law.base);
  rep.identity_residual = std::abs(rep.path_kl - rep.gap / alpha);
  rep.objective_residual = std::abs(rep.objective_gap - rep.gap);
  rep.tilt_residual = std::abs(rep.initial_kl_to_tilt - rep.gap / alpha);
  return rep;
}

ProjectionReport actor_projection_identity(const DiscretePathSpace& space, const Vector& base,
                                           const PathLaw& actor) {
  require_contract((actor.base - base).cwiseAbs().maxCoeff() <= kStochasticTol,
                   "actor_projection_identity: actor base differs from p_0");
  const TiltResult free_tilt = tilt_unrestricted(space);
  const auto actor_probs = enumerate_path_probs(actor);
  const auto ref_probs = enumerate_path_probs(space.reference);
  const Vector& r0 = space.reference.base;
  const Index m = space.states();
  const double alpha = space.alpha;

  ProjectionReport rep;
  for (std::size_t code = 0; code < actor_probs.size(); ++code) {
    const double p = actor_probs[code];
    if (p == 0.0) continue;
    const auto z0 = static_cast<Index>(base_state(code, m, space.horizon()));
    const double transition_log_ratio =
        log_ratio_or_zero(p, ref_probs[code]) - log_ratio_or_zero(base(z0), r0(z0));
    const double q = space.values(space.terminal_map[code % static_cast<std::size_t>(m)]);
    rep.actor_loss += p * (alpha * transition_log_ratio - q);
  }
  rep.identity_rhs = alpha * kl_divergence(actor_probs, free_tilt.path_probs) -
                     alpha * free_tilt.log_partition - alpha * kl_divergence(base, r0);
  rep.residual = std::abs(rep.actor_loss - rep.identity_rhs);
  return rep;
}

// ---------------------------------------------------------------------------
// Instance generation

Vector random_simplex(Rng& rng, Index n, double zero_prob) {
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    w(i) = rng.uniform() < zero_prob ? 0.0 : -std::log(1.0 - rng.uniform());
  }
  if (w.sum() <= 0.0) w(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))) = 1.0;
  return w / w.sum();
}

PathLaw random_law(Rng& rng, Index states, int horizon) {
  return random_law_with_base(rng, random_simplex(rng, states), horizon);
}

PathLaw random_law_with_base(Rng& rng, const Vector& base, int horizon) {
  PathLaw law;
  law.base = base;
  const Index m = base.size();
  for (int k = 0; k < horizon; ++k) {
    Matrix kern(m, m);
    for (Index z = 0; z < m; ++z) kern.row(z) = random_simplex(rng, m).transpose();
    law.kernels.push_back(std::move(kern));
  }
  return law;
}

DiscretePathSpace random_space(Rng& rng, int max_states, int max_horizon) {
  DiscretePathSpace space;
  Index m = 0;
  int horizon = 0;
  do {
    m = 2 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(max_states - 1)));
    horizon = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_horizon)));
  } while (std::pow(static_cast<double>(m), horizon + 1) > 1e5);
  space.reference = random_law(rng, m, horizon);
  const Index actions = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)));
  space.terminal_map.resize(static_cast<std::size_t>(m));
  for (auto& a : space.terminal_map) a = static_cast<int>(rng.below(static_cast<std::uint64_t>(actions)));
  space.values.resize(actions);
  for (Index a = 0; a < actions; ++a) space.values(a) = 2.0 * rng.normal();
  space.alpha = rng.uniform(0.25, 2.0);
  return space;
}

PathLaw perturb_law(Rng& rng, const PathLaw& law, double weight, bool keep_base) {
  PathLaw out = law;
  const Index m = law.states();
  if (!keep_base) out.base = (1.0 - weight) * law.base + weight * random_simplex(rng, m);
  for (auto& kern : out.kernels) {
    for (Index z = 0; z < m; ++z) {
      kern.row(z) = (1.0 - weight) * kern.row(z) + weight * random_simplex(rng, m).transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

bool OracleSuiteReport::passed() const {
  return std::all_of(identities.begin(), identities.end(),
                     [](const IdentityResult& r) { return r.passed(); });
}

namespace {

struct Tally {
  std::vector<IdentityResult> results;
  double tol;

  IdentityResult& get(const std::string& name) {
    for (auto& r : results) {
      if (r.name == name) return r;
    }
    results.push_back({name, 0.0, tol, 0, 0});
    return results.back();
  }
  // Residual must be <= tol.
  void residual(const std::string& name, double value) {
    auto& r = get(name);
    ++r.checks;
    r.max_residual = std::max(r.max_residual, value);
    if (!(value <= tol)) ++r.failures;
  }
  // Boolean property; residual is the size of the violation.
  void property(const std::string& name, bool ok, double violation) {
    auto& r = get(name);
    ++r.checks;
    r.max_residual = std::max(r.max_residual, std::max(violation, 0.0));
    if (!ok) ++r.failures;
  }
};

}  // namespace

OracleSuiteReport run_discrete_suite(std::size_t instances, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  Rng master(seed);
  Tally tally{{}, tolerance};

  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = master.split(i);
    const DiscretePathSpace space = random_space(rng, 6, 5);
    const Index m = space.states();
    const int K = space.horizon();
    const PathLaw& ref = space.reference;
    const double alpha = space.alpha;
    const auto ref_probs = enumerate_path_probs(ref);

    // Enumeration substrate.
    const PathLaw actor = random_law(rng, m, K);
    const auto actor_probs = enumerate_path_probs(actor);
    double mass = 0.0;
    for (const double p : actor_probs) mass += p;
    tally.residual("enumeration_normalization", std::abs(mass - 1.0));
    Vector chain = actor.base;
    double marginal_err = 0.0;
    for (int k = 0; k <= K; ++k) {
      marginal_err = std::max(
          marginal_err, (marginal_from_paths(actor_probs, m, K, k) - chain).cwiseAbs().maxCoeff());
      if (k < K) chain = (chain.transpose() * actor.kernels[static_cast<std::size_t>(k)]).transpose();
    }
    tally.residual("enumeration_marginals", marginal_err);

    // Path-space lift of the endpoint KL.
    const double full = kl_divergence(actor_probs, ref_probs);
    const ChainRuleSplit split = chain_rule_decompose(actor, ref, space.terminal_map, space.actions());
    tally.residual("endpoint_lift_decomposition",
                   std::abs(full - split.endpoint_kl - split.conditional_kl));
    tally.property("endpoint_lift_nonnegative",
                   split.endpoint_kl >= -tolerance && split.conditional_kl >= -tolerance,
                   -std::min(split.endpoint_kl, split.conditional_kl));
    tally.property("data_processing_endpoint_le_path", split.endpoint_kl <= full + tolerance,
                   split.endpoint_kl - full);
    tally.residual("local_kl_chain_rule", std::abs(full - local_kl_sum(actor, ref)));

    // Unrestricted tilt.
    const TiltResult free_tilt = tilt_unrestricted(space);
    const double best = soft_objective_cached(space, ref_probs, free_tilt.path_probs);
    tally.residual("unrestricted_tilt_value", std::abs(best - alpha * free_tilt.log_partition));
    const auto markov_probs = enumerate_path_probs(free_tilt.law);
    double markov_err = 0.0;
    for (std::size_t c = 0; c < markov_probs.size(); ++c) {
      markov_err = std::max(markov_err, std::abs(markov_probs[c] - free_tilt.path_probs[c]));
    }
    tally.residual("unrestricted_tilt_markov_form", markov_err);
    {
      const Vector ref_end = endpoint_law(ref_probs, m, space.terminal_map, space.actions());
      Vector boltzmann(space.actions());
      for (Index a = 0; a < space.actions(); ++a) {
        boltzmann(a) = ref_end(a) * std::exp(space.values(a) / alpha - free_tilt.log_partition);
      }
      const Vector tilt_end = endpoint_law(free_tilt.path_probs, m, space.terminal_map, space.actions());
      tally.residual("unrestricted_tilt_boltzmann_endpoint",
                     (tilt_end - boltzmann).cwiseAbs().maxCoeff());
    }
    for (int j = 0; j < 100; ++j) {
      const PathLaw other = perturb_law(rng, free_tilt.law, rng.uniform(0.01, 1.0), false);
      const auto other_probs = enumerate_path_probs(other);
      const double value = soft_objective_cached(space, ref_probs, other_probs);
      const double gibbs = alpha * free_tilt.log_partition -
                           alpha * kl_divergence(other_probs, free_tilt.path_probs);
      tally.residual("gibbs_variational_identity", std::abs(value - gibbs));
      tally.property("unrestricted_tilt_optimality", value < best, value - best);
    }

    // Fixed-base optimum.
    const Vector p0 = random_simplex(rng, m, 0.2);
    const TiltResult fixed_tilt = tilt_fixed_base(space, p0);
    const double fixed_best = soft_objective_cached(space, ref_probs, fixed_tilt.path_probs);
    tally.residual("fixed_base_objective", std::abs(fixed_best - fixed_tilt.objective));
    {
      const auto fixed_markov = enumerate_path_probs(fixed_tilt.law);
      double err = 0.0;
      double cond_err = 0.0;
      const Vector free_base = free_tilt.law.base;
      for (std::size_t c = 0; c < fixed_markov.size(); ++c) {
        err = std::max(err, std::abs(fixed_markov[c] - fixed_tilt.path_probs[c]));
        const auto z0 = static_cast<Index>(base_state(c, m, K));
        if (p0(z0) > 0.0) {
          const double fixed_cond = fixed_tilt.path_probs[c] / p0(z0);
          const double free_cond = free_tilt.path_probs[c] / free_base(z0);
          cond_err = std::max(cond_err, std::abs(fixed_cond - free_cond));
        }
      }
      tally.residual("fixed_base_markov_form", err);
      tally.residual("fixed_base_conditional_structure", cond_err);
    }
    for (int j = 0; j < 100; ++j) {
      const PathLaw other = random_law_with_base(rng, p0, K);
      const double value = soft_objective_cached(space, ref_probs, enumerate_path_probs(other));
      tally.property("fixed_base_optimality", value <= fixed_best + tolerance, value - fixed_best);
    }

    // Base-constraint gap.
    const BaseGapReport gap = base_gap_identities(space, p0);
    tally.property("base_gap_nonnegative", gap.gap >= -tolerance, -gap.gap);
    tally.residual("base_gap_path_kl_identity", gap.identity_residual);
    tally.residual("base_gap_objective_difference", gap.objective_residual);
    tally.residual("base_gap_initial_kl_to_tilt", gap.tilt_residual);
    tally.property("base_gap_endpoint_bound", gap.endpoint_kl <= gap.gap / alpha + tolerance,
                   gap.endpoint_kl - gap.gap / alpha);
    const BaseGapReport equality = base_gap_identities(space, free_tilt.law.base);
    tally.residual("base_gap_equality_case",
                   std::max({std::abs(equality.gap), equality.path_kl, equality.endpoint_kl}));

    // Actor projection.
    const PathLaw projected = random_law_with_base(rng, p0, K);
    tally.residual("actor_projection_identity",
                   actor_projection_identity(space, p0, projected).residual);
    const double optimum_loss = actor_projection_identity(space, p0, fixed_tilt.law).actor_loss;
    for (int j = 0; j < 20; ++j) {
      const PathLaw other = perturb_law(rng, fixed_tilt.law, rng.uniform(0.01, 1.0), true);
      const ProjectionReport rep = actor_projection_identity(space, p0, other);
      tally.residual("actor_projection_identity", rep.residual);
      tally.property("actor_projection_minimizer", rep.actor_loss >= optimum_loss - tolerance,
                     optimum_loss - rep.actor_loss);
    }
  }

  OracleSuiteReport report;
  report.instances = instances;
  report.identities = std::move(tally.results);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Continuous checks

namespace {
double gaussian_log_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}
}  // namespace

double transition_log_ratio(const BridgePath& path, double h) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.latents.size(); ++k) {
    const Vector& z = path.latents[k];
    const Vector& z_next = path.latents[k + 1];
    for (Index i = 0; i < z.size(); ++i) {
      const double actor_mean = z(i) + h * path.drifts[k](i);
      const double actor_var = 2.0 * h * path.scales[k](i) * path.scales[k](i);
      const double ref_mean = z(i) - 2.0 * h * std::tanh(z(i));
      total += gaussian_log_density(z_next(i), actor_mean, actor_var) -
               gaussian_log_density(z_next(i), ref_mean, 2.0 * h);
    }
  }
  return total;
}

double gaussian_base_kl_to_reference() {
  const int n = 24001;
  const double lo = -12.0;
  const double hi = 12.0;
  const double dz = (hi - lo) / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = lo + i * dz;
    const double log_p = gaussian_log_density(z, 0.0, 1.0);
    const double weight = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    total += weight * std::exp(log_p) * (log_p - q_ref_log_density(z));
  }
  return total * dz;
}

bool MonteCarloAgreement::within(double n_se) const {
  return std::abs(difference) < n_se * standard_error;
}

MonteCarloAgreement energy_kl_monte_carlo(const BridgeActorParams& params, const BridgeConfig& cfg,
                                       const Vector& obs, std::size_t samples, Rng& rng,
                                       BaseLaw base) {
  const Index chunk = 4096;
  NoiseSpec spec;
  spec.base = base;
  double sum_c = 0.0;
  double sum_lr = 0.0;
  double sum_d = 0.0;
  double sum_d2 = 0.0;
  std::size_t done = 0;
  while (done < samples) {
    const Index n = static_cast<Index>(std::min<std::size_t>(chunk, samples - done));
    const auto noise = sample_bridge_noise(n, cfg.steps, cfg.action_dim, rng, spec);
    const Matrix obs_batch = obs.transpose().replicate(n, 1);
    const BridgeBatch batch = bridge_forward(params, cfg, obs_batch, noise);
    const Vector energies = batch.energies();
    for (Index b = 0; b < n; ++b) {
      const BridgePath path = batch.path(b);
      double lr = transition_log_ratio(path, cfg.h);
      if (base == BaseLaw::kGaussian) {
        for (Index i = 0; i < cfg.action_dim; ++i) {
          const double z0 = path.latents[0](i);
          lr += gaussian_log_density(z0, 0.0, 1.0) - q_ref_log_density(z0);
        }
      }
      const double c = energies(b);
      sum_c += c;
      sum_lr += lr;
      const double d = lr - c;
      sum_d += d;
      sum_d2 += d * d;
    }
    done += static_cast<std::size_t>(n);
  }
  const auto n = static_cast<double>(samples);
  MonteCarloAgreement out;
  out.samples = samples;
  out.mean_energy = sum_c / n;
  out.mean_log_ratio = sum_lr / n;
  out.expected_offset =
      base == BaseLaw::kGaussian ? static_cast<double>(cfg.action_dim) * gaussian_base_kl_to_reference()
                                 : 0.0;
  const double mean_d = sum_d / n;
  const double var_d = std::max(0.0, (sum_d2 / n - mean_d * mean_d) * n / (n - 1.0));
  out.difference = mean_d - out.expected_offset;
  out.standard_error = std::sqrt(var_d / n);
  return out;
}

BridgeActorParams random_spread_actor(const BridgeConfig& cfg, Rng& rng, double head_gain) {
  BridgeActorParams p = BridgeActorParams::init(cfg, rng);
  for (auto& blk : p.blocks) {
    blk.drift_head.weight *= head_gain;
    blk.scale_head.weight *= head_gain;
    for (Index i = 0; i < blk.drift_head.bias.size(); ++i) {
      blk.drift_head.bias(i) = 0.5 * rng.normal();
      blk.scale_head.bias(i) = 0.5 * rng.normal();
    }
  }
  return p;
}

}  // namespace softbridge::oracle
