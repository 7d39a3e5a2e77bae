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

#include "softbridge/cli.hpp"

#include <malloc.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "softbridge/envs.hpp"
#include "softbridge/errors.hpp"
#include "softbridge/io.hpp"
#include "softbridge/reference_bias.hpp"
#include "softbridge/softgac.hpp"
#include "softbridge/toy2d.hpp"
#include "softbridge/verify.hpp"

namespace softbridge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream in(item);
    T v{};
    in >> v;
    if (!in || !in.eof()) throw UsageError(what + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

io::KeyValueConfig load_config(const Globals& g, const std::set<std::string>& allowed) {
  io::KeyValueConfig cfg = g.config.empty() ? io::KeyValueConfig{} : io::KeyValueConfig::load(g.config);
  cfg.require_known(allowed);
  return cfg;
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::optional<std::size_t> instances;
  std::optional<std::size_t> mc_samples;
};

int run_verify(const Globals& g, const VerifyArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(g, {"instances", "tolerance", "mc_samples", "gradient_draws"});
  verify::VerifyOptions opt;
  opt.instances = static_cast<std::size_t>(cfg.get_int("instances", static_cast<std::int64_t>(opt.instances)));
  opt.tolerance = cfg.get_double("tolerance", opt.tolerance);
  opt.mc_samples = static_cast<std::size_t>(cfg.get_int("mc_samples", static_cast<std::int64_t>(opt.mc_samples)));
  opt.gradient_draws = static_cast<int>(cfg.get_int("gradient_draws", opt.gradient_draws));
  if (a.instances) opt.instances = *a.instances;
  if (a.mc_samples) opt.mc_samples = *a.mc_samples;
  if (opt.instances < 1 || opt.mc_samples < 2 || opt.gradient_draws < 1) {
    throw UsageError("verify: instances, mc_samples and gradient_draws must be positive");
  }

  const ordered_json report = verify::run_all(g.seed, opt);
  out << report.dump(2) << '\n';
  if (!g.out.empty()) {
    io::RunDirectory dir(g.out);
    write_json(dir.file("verify.json"), report);
    write_json(dir.file("config.json"), {{"command", "verify"},
                                         {"seed", g.seed},
                                         {"instances", opt.instances},
                                         {"tolerance", opt.tolerance},
                                         {"mc_samples", opt.mc_samples},
                                         {"gradient_draws", opt.gradient_draws}});
    dir.finalize("verify", g.seed, seconds_since(t0));
  }
  return report["passed"].get<bool>() ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------

struct BiasArgs {
  std::optional<int> k;
  std::optional<std::string> dims;
  std::optional<std::string> sweep;
};

io::CsvTable bias_table(const std::vector<bias::BiasReport>& reports, const std::vector<int>& dims) {
  io::CsvTable t;
  t.header = {"K", "per_dim_kl_forward", "per_dim_kl_reverse"};
  for (const int d : dims) t.header.push_back("G_d" + std::to_string(d));
  for (const int d : dims) t.header.push_back("entropy_d" + std::to_string(d));
  for (const auto& r : reports) {
    std::vector<double> row{static_cast<double>(r.steps), r.per_dim_kl_forward, r.per_dim_kl_reverse};
    row.insert(row.end(), r.gap.begin(), r.gap.end());
    row.insert(row.end(), r.entropy.begin(), r.entropy.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

int run_bias(const Globals& g, const BiasArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(g, {"k", "dims", "sweep", "grid_lo", "grid_hi", "grid_n"});
  const int k = a.k ? *a.k : static_cast<int>(cfg.get_int("k", 6));
  const auto dims = parse_list<int>(a.dims ? *a.dims : cfg.get_string("dims", "19,21,38"), "--dims");
  const std::string sweep_text = a.sweep ? *a.sweep : cfg.get_string("sweep", "");
  bias::GridSpec grid;
  grid.lo = cfg.get_double("grid_lo", grid.lo);
  grid.hi = cfg.get_double("grid_hi", grid.hi);
  grid.n = static_cast<Index>(cfg.get_int("grid_n", grid.n));
  if (k < 1) throw UsageError("bias: --k must be at least 1");
  for (const int d : dims) {
    if (d < 1) throw UsageError("bias: --dims entries must be positive");
  }

  std::vector<bias::BiasReport> reports{bias::endpoint_gap(k, dims, grid)};
  std::optional<bias::RateSweep> sweep;
  std::vector<int> sweep_ks;
  if (!sweep_text.empty()) {
    sweep_ks = parse_list<int>(sweep_text, "--sweep");
    for (const int s : sweep_ks) {
      if (s < 1) throw UsageError("bias: --sweep entries must be at least 1");
    }
    if (sweep_ks.size() < 2) throw UsageError("bias: --sweep needs at least two values");
    sweep = bias::rate_sweep(sweep_ks, dims, grid);
    for (const auto& r : sweep->reports) reports.push_back(r);
  }
  const io::CsvTable table = bias_table(reports, dims);

  std::ostringstream summary;
  summary << "K=" << k << " per-dim KL(q_ref||p_K)=" << io::format_double(reports[0].per_dim_kl_forward)
          << " KL(p_K||q_ref)=" << io::format_double(reports[0].per_dim_kl_reverse) << '\n';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "  d_a=%d  G=%.5f nats  entropy=%.5f nats\n", dims[i],
                  reports[0].gap[i], reports[0].entropy[i]);
    summary << line;
  }
  if (sweep) {
    char line[96];
    std::snprintf(line, sizeof line, "  log-log slope over K={%s}: %.4f\n", join(sweep_ks).c_str(),
                  sweep->slope);
    summary << line;
  }
  out << summary.str();

  if (!g.out.empty()) {
    const ordered_json echo{{"command", "bias"},     {"k", k},
                            {"dims", dims},          {"sweep", sweep_ks},
                            {"grid_lo", grid.lo},    {"grid_hi", grid.hi},
                            {"grid_n", grid.n},      {"seed", g.seed}};
    const fs::path target(g.out);
    if (target.extension() == ".csv") {
      // A bare CSV path: write next to it and rename into place.
      fs::path tmp = target;
      tmp += ".partial";
      if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
      io::write_csv(tmp, table);
      fs::rename(tmp, target);
    } else {
      io::RunDirectory dir(target);
      io::write_csv(dir.file("bias.csv"), table);
      ordered_json echo_full = echo;
      if (sweep) echo_full["slope"] = sweep->slope;
      write_json(dir.file("config.json"), echo_full);
      dir.finalize("bias", g.seed, seconds_since(t0));
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ToyArgs {
  std::optional<std::string> rho;
  std::optional<int> steps;
  std::optional<std::string> out_dir;
};

io::CsvTable histogram_table(const toy::Histogram2D& h, const std::string& x, const std::string& y) {
  io::CsvTable t;
  t.header = {x, y, "mass"};
  for (Index i = 0; i < h.bins; ++i) {
    for (Index j = 0; j < h.bins; ++j) t.rows.push_back({h.bin_center(i), h.bin_center(j), h.mass(i, j)});
  }
  return t;
}

std::string rho_label(double rho) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "rho_%g", rho);
  return buf;
}

int run_toy(const Globals& g, const ToyArgs& a, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(g, {"rho", "K", "width", "batch", "train_steps", "actor_lr", "alpha_lr",
                                   "initial_alpha", "histogram_samples", "endpoint_bins", "latent_bins"});
  toy::ToyConfig tc;
  tc.steps = static_cast<int>(cfg.get_int("K", tc.steps));
  tc.width = static_cast<Index>(cfg.get_int("width", tc.width));
  tc.batch = static_cast<Index>(cfg.get_int("batch", tc.batch));
  tc.train_steps = static_cast<int>(cfg.get_int("train_steps", tc.train_steps));
  tc.actor_lr = cfg.get_double("actor_lr", tc.actor_lr);
  tc.alpha_lr = cfg.get_double("alpha_lr", tc.alpha_lr);
  tc.initial_alpha = cfg.get_double("initial_alpha", tc.initial_alpha);
  tc.histogram_samples = static_cast<std::size_t>(
      cfg.get_int("histogram_samples", static_cast<std::int64_t>(tc.histogram_samples)));
  tc.endpoint_bins = static_cast<Index>(cfg.get_int("endpoint_bins", tc.endpoint_bins));
  tc.latent_bins = static_cast<Index>(cfg.get_int("latent_bins", tc.latent_bins));
  if (a.steps) tc.train_steps = *a.steps;
  const auto rhos = parse_list<double>(
      a.rho ? *a.rho : cfg.get_string("rho", "0.01,0.05,0.09,0.14,0.22"), "--rho");
  for (const double r : rhos) {
    if (!(r > 0.0)) throw UsageError("toy2d: every rho must be positive");
  }
  if (tc.train_steps < 1 || tc.batch < 1 || tc.width < 1 || tc.steps < 1) {
    throw UsageError("toy2d: steps, batch, width and K must be positive");
  }
  const std::string target = a.out_dir ? *a.out_dir : (g.out.empty() ? "toy2d" : g.out);

  const toy::ToyCritic critic;
  io::RunDirectory dir(target);
  io::CsvTable summary;
  summary.header = {"rho", "target", "tail_mean_energy", "tail_ratio", "final_alpha",
                    "mode1_mass", "mode2_mass", "mode3_mass", "eval_mean_energy"};

  io::CsvTable critic_grid;
  critic_grid.header = {"a0", "a1", "q"};
  const int display = 101;
  for (int i = 0; i < display; ++i) {
    for (int j = 0; j < display; ++j) {
      const double a0 = -0.99 + 1.98 * i / (display - 1);
      const double a1 = -0.99 + 1.98 * j / (display - 1);
      critic_grid.rows.push_back({a0, a1, critic(a0, a1)});
    }
  }

  for (const double rho : rhos) {
    const auto tr = Clock::now();
    const toy::BudgetRun run = toy::train_budget(critic, rho, g.seed, tc);
    const std::string sub = rho_label(rho) + "/";
    io::write_csv(dir.file(sub + "critic.csv"), critic_grid);
    io::write_csv(dir.file(sub + "endpoint.csv"), histogram_table(run.samples.endpoint, "a0", "a1"));
    for (std::size_t k = 0; k < run.samples.latents.size(); ++k) {
      io::write_csv(dir.file(sub + "latent_step_" + std::to_string(k) + ".csv"),
                    histogram_table(run.samples.latents[k], "z0", "z1"));
    }
    io::CsvTable alpha{{"step", "alpha"}, {}};
    io::CsvTable energy{{"step", "mean_energy"}, {}};
    for (std::size_t t = 0; t < run.alpha_trace.size(); ++t) {
      alpha.rows.push_back({static_cast<double>(t), run.alpha_trace[t]});
      energy.rows.push_back({static_cast<double>(t), run.energy_trace[t]});
    }
    io::write_csv(dir.file(sub + "alpha_trace.csv"), alpha);
    io::write_csv(dir.file(sub + "energy_trace.csv"), energy);
    const auto& m = run.samples.mode_mass;
    summary.rows.push_back({rho, run.target, run.tail_mean_energy, run.tail_mean_energy / run.target,
                            run.alpha_trace.empty() ? tc.initial_alpha : run.alpha_trace.back(), m[0],
                            m[1], m[2], run.samples.mean_energy});
    char line[256];
    std::snprintf(line, sizeof line,
                  "rho=%g target=%.4f tail C=%.4f (ratio %.3f) modes=[%.3f %.3f %.3f] %.1fs\n", rho,
                  run.target, run.tail_mean_energy, run.tail_mean_energy / run.target, m[0], m[1], m[2],
                  seconds_since(tr));
    err << line << std::flush;
  }
  io::write_csv(dir.file("summary.csv"), summary);
  write_json(dir.file("config.json"), {{"command", "toy2d"},
                                       {"seed", g.seed},
                                       {"rho", rhos},
                                       {"K", tc.steps},
                                       {"width", tc.width},
                                       {"batch", tc.batch},
                                       {"train_steps", tc.train_steps},
                                       {"actor_lr", tc.actor_lr},
                                       {"alpha_lr", tc.alpha_lr},
                                       {"initial_alpha", tc.initial_alpha},
                                       {"histogram_samples", tc.histogram_samples},
                                       {"endpoint_bins", tc.endpoint_bins},
                                       {"latent_bins", tc.latent_bins},
                                       {"base_clip", toy::kToyBaseClip},
                                       {"dummy_obs", tc.dummy_obs}});
  dir.finalize("toy2d", g.seed, seconds_since(t0));
  out << "wrote " << target << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::optional<std::string> env;
  std::optional<std::size_t> steps;
};

const std::set<std::string> kTrainKeys = {
    "env",           "gamma",       "batch",           "utd",         "policy_delay",
    "learn_starts",  "polyak",      "rho_ctrl",        "K",           "actor_width",
    "critic_width",  "actor_lr",    "critic_lr",       "alpha_lr",    "initial_alpha",
    "buffer_capacity", "total_steps", "eval_every",    "eval_episodes", "deterministic_eval"};

gac::TrainConfig resolve_train_config(const io::KeyValueConfig& cfg, const std::string& env_name) {
  gac::TrainConfig tc = gac::default_config(env_name);
  tc.gamma = cfg.get_double("gamma", tc.gamma);
  tc.batch = static_cast<Index>(cfg.get_int("batch", tc.batch));
  tc.utd = static_cast<int>(cfg.get_int("utd", tc.utd));
  tc.policy_delay = static_cast<int>(cfg.get_int("policy_delay", tc.policy_delay));
  tc.learn_starts = static_cast<std::size_t>(cfg.get_int("learn_starts", static_cast<std::int64_t>(tc.learn_starts)));
  tc.polyak = cfg.get_double("polyak", tc.polyak);
  tc.rho_ctrl = cfg.get_double("rho_ctrl", tc.rho_ctrl);
  tc.steps = static_cast<int>(cfg.get_int("K", tc.steps));
  tc.actor_width = static_cast<Index>(cfg.get_int("actor_width", tc.actor_width));
  tc.critic_width = static_cast<Index>(cfg.get_int("critic_width", tc.critic_width));
  tc.actor_lr = cfg.get_double("actor_lr", tc.actor_lr);
  tc.critic_lr = cfg.get_double("critic_lr", tc.critic_lr);
  tc.alpha_lr = cfg.get_double("alpha_lr", tc.alpha_lr);
  tc.initial_alpha = cfg.get_double("initial_alpha", tc.initial_alpha);
  tc.buffer_capacity = static_cast<std::size_t>(
      cfg.get_int("buffer_capacity", static_cast<std::int64_t>(tc.buffer_capacity)));
  tc.total_steps = static_cast<std::size_t>(cfg.get_int("total_steps", static_cast<std::int64_t>(tc.total_steps)));
  tc.eval_every = static_cast<std::size_t>(cfg.get_int("eval_every", static_cast<std::int64_t>(tc.eval_every)));
  tc.eval_episodes = static_cast<int>(cfg.get_int("eval_episodes", tc.eval_episodes));
  tc.deterministic_eval = cfg.get_bool("deterministic_eval", tc.deterministic_eval);
  return tc;
}

ordered_json train_config_json(const gac::TrainConfig& tc, const std::string& env, std::uint64_t seed) {
  return {{"command", "train"},
          {"env", env},
          {"seed", seed},
          {"gamma", tc.gamma},
          {"batch", tc.batch},
          {"utd", tc.utd},
          {"policy_delay", tc.policy_delay},
          {"learn_starts", tc.learn_starts},
          {"polyak", tc.polyak},
          {"rho_ctrl", tc.rho_ctrl},
          {"K", tc.steps},
          {"actor_width", tc.actor_width},
          {"critic_width", tc.critic_width},
          {"actor_lr", tc.actor_lr},
          {"critic_lr", tc.critic_lr},
          {"alpha_lr", tc.alpha_lr},
          {"initial_alpha", tc.initial_alpha},
          {"buffer_capacity", tc.buffer_capacity},
          {"total_steps", tc.total_steps},
          {"eval_every", tc.eval_every},
          {"eval_episodes", tc.eval_episodes},
          {"deterministic_eval", tc.deterministic_eval}};
}

int run_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(g, kTrainKeys);
  const std::string env_name = a.env ? *a.env : cfg.get_string("env", "pendulum");
  const auto env = env::make_env(env_name);
  gac::TrainConfig tc = resolve_train_config(cfg, env_name);
  if (a.steps) tc.total_steps = *a.steps;
  try {
    tc.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const std::string target = g.out.empty() ? "run" : g.out;
  io::RunDirectory dir(target);

  const gac::TrainResult res = gac::train(tc, *env, g.seed, [&](const gac::CurveRecord& r) {
    char line[200];
    std::snprintf(line, sizeof line, "step %zu  return %.2f +- %.2f  alpha %.4g  C %.4f  (%.0fs)\n", r.step,
                  r.eval_return_mean, r.eval_return_std, r.alpha, r.mean_energy, seconds_since(t0));
    err << line << std::flush;
  });

  io::CsvTable curve{{"step", "eval_return_mean", "eval_return_std", "alpha", "mean_energy"}, {}};
  for (const auto& r : res.curve) {
    curve.rows.push_back({static_cast<double>(r.step), r.eval_return_mean, r.eval_return_std, r.alpha,
                          r.mean_energy});
  }
  io::write_csv(dir.file("curve.csv"), curve);
  if (!res.evaluations.empty()) {
    io::CsvTable episodes{{"episode", "return", "balanced", "goal"}, {}};
    const auto& last = res.evaluations.back();
    for (std::size_t i = 0; i < last.episodes.size(); ++i) {
      const auto& e = last.episodes[i];
      episodes.rows.push_back({static_cast<double>(i), e.ret, e.balanced ? 1.0 : 0.0,
                               static_cast<double>(e.goal)});
    }
    io::write_csv(dir.file("final_eval.csv"), episodes);
  }
  gac::Agent agent = res.agent;
  ParamList ckpt;
  const auto append = [&ckpt](const ParamList& list, const std::string& prefix) {
    for (ParamRef p : list) {
      p.name = prefix + p.name;
      ckpt.push_back(std::move(p));
    }
  };
  append(agent.actor.params(), "actor/");
  append(agent.critic.params(), "critic/");
  append(agent.actor_target.params(), "actor_target/");
  append(agent.critic_target.params(), "critic_target/");
  double log_alpha = agent.dual.log_alpha();
  ckpt.push_back(ParamRef{"log_alpha", 1, 1, std::span<double>(&log_alpha, 1)});
  io::write_checkpoint(dir.file("checkpoint.bin"), ckpt);

  ordered_json echo = train_config_json(tc, env_name, g.seed);
  write_json(dir.file("config.json"), echo);
  ordered_json stats{{"env_steps", res.env_steps},
                     {"critic_updates", res.critic_updates},
                     {"actor_updates", res.actor_updates},
                     {"skipped_updates", res.skipped_updates},
                     {"control_target", res.control_target},
                     {"tail_mean_energy", res.tail_mean_energy},
                     {"diverged", res.diverged},
                     {"divergence_message", res.divergence_message}};
  write_json(dir.file("stats.json"), stats);
  dir.finalize("train", g.seed, seconds_since(t0));
  out << "wrote " << target << '\n';
  if (res.diverged) {
    err << "training diverged: " << res.divergence_message << '\n';
    return kExitFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::optional<std::string> env;
  std::optional<std::string> k;
  std::optional<int> width;
  std::optional<std::size_t> n;
};

int run_bench(const Globals& g, const BenchArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto cfg = load_config(g, {"env", "k", "width", "n"});
  const std::string env_name = a.env ? *a.env : cfg.get_string("env", "pendulum");
  const auto ks = parse_list<int>(a.k ? *a.k : cfg.get_string("k", "2,6,12"), "--k");
  const int width = a.width ? *a.width : static_cast<int>(cfg.get_int("width", 512));
  const std::size_t n = a.n ? *a.n : static_cast<std::size_t>(cfg.get_int("n", 10000));
  if (width < 1 || n < 1) throw UsageError("infer-bench: width and n must be positive");
  const auto env = env::make_env(env_name);
  const auto& spec = env->spec();

  io::CsvTable table{{"K", "width", "calls", "median_us", "p95_us", "block_evaluations",
                      "parameter_count", "analytic_parameter_count"},
                     {}};
  const Rng root = Rng(g.seed).split("infer-bench");
  for (const int k : ks) {
    if (k < 1) throw UsageError("infer-bench: every K must be at least 1");
    const BridgeConfig bc = BridgeConfig::make(k, spec.obs_dim, spec.action_dim, width,
                                               spec.action_scale(), spec.action_bias());
    Rng init = root.split(static_cast<std::uint64_t>(k));
    const BridgeActorParams actor = BridgeActorParams::init(bc, init);
    Rng noise = init.split("noise");
    const gac::InferenceStats s = gac::infer_bench(actor, bc, n, noise);
    table.rows.push_back({static_cast<double>(k), static_cast<double>(width), static_cast<double>(s.calls),
                          s.median_us, s.p95_us, static_cast<double>(s.block_evaluations),
                          static_cast<double>(s.parameter_count),
                          static_cast<double>(s.analytic_parameter_count)});
    char line[200];
    std::snprintf(line, sizeof line, "K=%d width=%d median %.2f us p95 %.2f us blocks %zu params %zu\n", k,
                  width, s.median_us, s.p95_us, s.block_evaluations, s.parameter_count);
    out << line;
  }
  if (!g.out.empty()) {
    io::RunDirectory dir(g.out);
    io::write_csv(dir.file("bench.csv"), table);
    write_json(dir.file("config.json"), {{"command", "infer-bench"},
                                         {"env", env_name},
                                         {"k", ks},
                                         {"width", width},
                                         {"n", n},
                                         {"seed", g.seed}});
    dir.finalize("infer-bench", g.seed, seconds_since(t0));
  }
  return kExitOk;
}

}  // namespace

void configure_process() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"softbridge: soft bridge policies, oracles and desk-scale experiments", "softbridge"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--out", g.out, "Output path (directory; bias also accepts a .csv file)");
  app.add_option("--config", g.config, "Plain-text key = value configuration file");

  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle suite and print a JSON report");
  VerifyArgs va;
  verify_cmd->add_option("--instances", va.instances, "Random discrete instances");
  verify_cmd->add_option("--mc-samples", va.mc_samples, "Paths per Monte Carlo check");

  auto* bias_cmd = app.add_subcommand("bias", "Endpoint bias of the finite-step reference");
  BiasArgs ba;
  bias_cmd->add_option("--k", ba.k, "Number of bridge steps");
  bias_cmd->add_option("--dims", ba.dims, "Comma-separated action dimensions");
  bias_cmd->add_option("--sweep", ba.sweep, "Comma-separated K values for the rate fit");

  auto* toy_cmd = app.add_subcommand("toy2d", "Fixed-critic 2D bridge across control budgets");
  ToyArgs ta;
  toy_cmd->add_option("--rho", ta.rho, "Comma-separated control budgets");
  toy_cmd->add_option("--steps", ta.steps, "Gradient steps per budget");
  toy_cmd->add_option("--out-dir", ta.out_dir, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Off-policy training on a built-in environment");
  TrainArgs tra;
  train_cmd->add_option("--env", tra.env, "pendulum or reach");
  train_cmd->add_option("--steps", tra.steps, "Total environment steps");

  auto* bench_cmd = app.add_subcommand("infer-bench", "Per-action inference latency");
  BenchArgs be;
  bench_cmd->add_option("--env", be.env, "pendulum or reach");
  bench_cmd->add_option("--k", be.k, "Comma-separated K values");
  bench_cmd->add_option("--width", be.width, "Hidden width");
  bench_cmd->add_option("--n", be.n, "Timed calls per K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (verify_cmd->parsed()) return run_verify(g, va, out);
    if (bias_cmd->parsed()) return run_bias(g, ba, out);
    if (toy_cmd->parsed()) return run_toy(g, ta, out, err);
    if (train_cmd->parsed()) return run_train(g, tra, out, err);
    if (bench_cmd->parsed()) return run_bench(g, be, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace softbridge::cli
