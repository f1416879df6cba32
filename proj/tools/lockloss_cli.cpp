// Batch entry point: one subcommand per experiment, flat key=value config,
// CSV outputs plus summary.txt in --output-dir.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lockloss/lockloss.hpp"

namespace {

using namespace lockloss;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;    // name, body
  std::vector<std::pair<std::string, std::string>> results;  // appended to summary.txt
  bool numerical_failure = false;

  void result(const std::string& key, double v) { results.emplace_back(key, format_double(v)); }
  void result(const std::string& key, const std::string& v) { results.emplace_back(key, v); }
};

struct KeySpec {
  std::string key;
  std::string help;
};

struct Subcommand {
  std::string name;
  std::string help;
  std::vector<KeySpec> keys;
  std::function<Outputs(const ExperimentConfig&)> run;
};

std::string dashed(std::string k) {
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

int get_order(const ExperimentConfig& cfg) {
  const long long order = cfg.get_int("order", 1);
  if (order != 1 && order != 2) throw ConfigError("order must be 1 or 2");
  return static_cast<int>(order);
}

int get_required_order(const ExperimentConfig& cfg) {
  cfg.require("order");
  return get_order(cfg);
}

double positive(const ExperimentConfig& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key + " must be positive");
  return v;
}

std::size_t count_at_least(const ExperimentConfig& cfg, const std::string& key, long long fallback, long long lo) {
  const long long v = cfg.get_int(key, fallback);
  if (v < lo) throw ConfigError(key + " must be >= " + std::to_string(lo));
  return static_cast<std::size_t>(v);
}

unsigned get_workers(const ExperimentConfig& cfg) {
  const long long w = cfg.get_int("workers", 0);
  if (w < 0) throw ConfigError("workers must be >= 0");
  return static_cast<unsigned>(w);
}

std::vector<double> get_epsilons(const ExperimentConfig& cfg, std::vector<double> fallback) {
  std::vector<double> eps;
  if (cfg.has("epsilon_grid")) {
    eps = cfg.get_double_list("epsilon_grid");
  } else if (cfg.has("epsilon")) {
    eps = {cfg.get_double("epsilon")};
  } else if (!fallback.empty()) {
    eps = cfg.get_double_list("epsilon_grid", std::move(fallback));
  } else {
    throw ConfigError("missing required key 'epsilon' or 'epsilon_grid'");
  }
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("every epsilon must be positive");
  }
  return eps;
}

template <class F>
std::string to_csv(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::vector<std::string> state_columns(int order, const char* base) {
  if (order == 1) return {base};
  return {base, std::string(base) + "_dot"};
}

// --- simulate -------------------------------------------------------------

Outputs run_simulate(const ExperimentConfig& cfg) {
  const int order = get_required_order(cfg);
  cfg.require("epsilon");
  const double eps = positive(cfg, "epsilon", 0.0);
  const double horizon = positive(cfg, "horizon", 100.0);
  const double dt = positive(cfg, "dt", 0.01);
  const std::uint64_t seed = cfg.get_uint64("master_seed", 1);
  const std::uint64_t stream_id = cfg.get_uint64("stream_id", 0);
  detail::step_count(horizon, dt);

  const NoiseStream base{seed, stream_id};
  const PhaseSystem sys = build_system(order, eps);
  const Path x = simulate_signal(sys, horizon, dt, base.substream(0));
  const Path dy = simulate_measurement_increments(x, eps, base.substream(1));
  const ErrorDynamics dyn = ekf_error_drift(order);
  std::vector<double> x0(dyn.dim(), 0.0);
  const ErrorSdeResult err =
      simulate_error_sde(dyn, dyn.noise, dyn.epsilon_like(eps), x0, horizon, dt, base.substream(2));
  const auto slips = detect_slips(err.path);

  Outputs out;
  out.files.emplace_back("signal.csv", to_csv([&](std::ostream& os) { write_csv(os, x, state_columns(order, "x")); }));
  out.files.emplace_back("measurements.csv",
                         to_csv([&](std::ostream& os) { write_csv(os, dy, {"dy_sin", "dy_cos"}); }));
  out.files.emplace_back("error.csv", to_csv([&](std::ostream& os) {
                           write_csv(os, err.path, order == 1 ? std::vector<std::string>{"e"}
                                                              : std::vector<std::string>{"e", "phi"});
                         }));
  out.files.emplace_back("slips.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"t_start", "t_cross", "t_end", "n"});
                           for (const auto& s : slips) w.row(s.t_start, s.t_cross, s.t_end, s.n);
                         }));
  out.result("slips", std::to_string(slips.size()));
  return out;
}

// --- mtll-mc --------------------------------------------------------------

Outputs run_mtll_mc(const ExperimentConfig& cfg) {
  const int order = get_order(cfg);
  const std::vector<double> eps = get_epsilons(cfg, {});
  const std::size_t runs = count_at_least(cfg, "runs", 2000, 1);
  const double dt = positive(cfg, "dt", 0.01);
  const std::uint64_t seed = cfg.get_uint64("master_seed", 1);
  const unsigned workers = get_workers(cfg);
  cfg.require("horizon");
  std::vector<double> horizons = cfg.get_double_list("horizon");
  if (horizons.size() == 1) horizons.assign(eps.size(), horizons[0]);
  if (horizons.size() != eps.size()) throw ConfigError("horizon must be one value or one per epsilon");
  for (double h : horizons) detail::step_count(h, dt);

  std::vector<MtllEstimate> est;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    est.push_back(estimate_mtll_mc(order, eps[i], runs, horizons[i], dt, seed, workers));
  }
  Outputs out;
  out.files.emplace_back("mtll.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"epsilon", "runs", "n_events", "censored", "mtll_mean", "mtll_stderr"});
                           for (const auto& e : est) w.row(e.epsilon, e.runs, e.n_events, e.censored, e.mean, e.std_error);
                         }));
  std::vector<MtllEstimate> fit_input;
  for (const auto& e : est) {
    if (!e.lower_bound) fit_input.push_back(e);
    if (e.lower_bound) out.result("lower_bound_epsilon", e.epsilon);
  }
  if (fit_input.size() >= 2) {
    const ExponentFit fit = fit_mtll_exponent(fit_input);
    out.result("exponent", fit.slope);
    out.result("exponent_stderr", fit.slope_stderr);
    out.result("intercept", fit.intercept);
  }
  return out;
}

// --- cost-stats / order-stats ---------------------------------------------

TrajectoryFamily build_family(const ExperimentConfig& cfg, int order, double eps, bool with_null) {
  const double horizon = positive(cfg, "horizon", 10.0);
  const double dt = positive(cfg, "dt", 0.01);
  const std::size_t samples = detail::step_count(horizon, dt) + 1;
  const std::vector<double> starts = cfg.get_double_list("bump_starts", {4.0});
  std::vector<double> widths = cfg.get_double_list("bump_width", {2.0});
  if (widths.size() == 1) widths.assign(starts.size(), widths[0]);
  if (widths.size() != starts.size()) throw ConfigError("bump_width must be one value or one per bump start");
  TrajectoryFamily fam;
  fam.order = order;
  fam.epsilon = eps;
  if (with_null) fam.members.push_back(null_trajectory(order, 0.0, dt, samples));
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!(widths[i] > 0.0)) throw ConfigError("bump_width must be positive");
    if (starts[i] < 0.0 || starts[i] + widths[i] > horizon) throw ConfigError("bumps must fit inside the horizon");
    fam.members.push_back(bump_trajectory(order, 0.0, dt, samples, starts[i], widths[i]));
  }
  return fam;
}

Outputs run_cost_stats(const ExperimentConfig& cfg) {
  const int order = get_order(cfg);
  const double eps = positive(cfg, "epsilon", 1.0);
  const std::size_t draws = count_at_least(cfg, "draws", 0, 0);
  const std::uint64_t seed = cfg.get_uint64("master_seed", 1);
  const unsigned workers = get_workers(cfg);
  const TrajectoryFamily fam = build_family(cfg, order, eps, false);
  const CostStats st = compute_cost_stats(fam);
  const auto n = static_cast<Eigen::Index>(st.size());

  Outputs out;
  out.files.emplace_back("cost_stats.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"member_id", "m", "variance"});
                           for (Eigen::Index i = 0; i < n; ++i) w.row(i, st.means[static_cast<std::size_t>(i)], st.cov(i, i));
                         }));
  out.files.emplace_back("covariance.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"i", "j", "sigma"});
                           for (Eigen::Index i = 0; i < n; ++i) {
                             for (Eigen::Index j = 0; j < n; ++j) w.row(i, j, st.cov(i, j));
                           }
                         }));
  if (draws > 0) {
    const Path signal =
        simulate_signal(build_system(order, eps), fam.members[0].r.duration(), fam.members[0].r.dt(),
                        NoiseStream{seed, 0}.substream(0));
    const Eigen::MatrixXd x = sample_delta_j_batch(fam, signal, seed, draws, 1, workers);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centred = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(draws > 1 ? draws - 1 : 1);
    out.files.emplace_back("delta_j_moments.csv", to_csv([&](std::ostream& os) {
                             CsvWriter w(os, {"i", "j", "mc_mean_i", "mc_cov", "sigma"});
                             for (Eigen::Index i = 0; i < n; ++i) {
                               for (Eigen::Index j = 0; j < n; ++j) w.row(i, j, mean(i), cov(i, j), st.cov(i, j));
                             }
                           }));
  }
  out.result("members", std::to_string(st.size()));
  return out;
}

Outputs run_order_stats(const ExperimentConfig& cfg) {
  const int order = get_order(cfg);
  const double eps = positive(cfg, "epsilon", 1.0);
  const std::size_t draws = count_at_least(cfg, "draws", 100000, 1);
  const std::uint64_t seed = cfg.get_uint64("master_seed", 1);
  const unsigned workers = get_workers(cfg);
  const TrajectoryFamily fam = build_family(cfg, order, eps, true);
  const CostStats st = compute_cost_stats(fam);
  const std::vector<double> freq = argmin_frequencies(st, draws, NoiseStream{seed, 0}, workers);

  Outputs out;
  out.files.emplace_back("argmin.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"member_id", "m", "freq", "log_freq"});
                           for (std::size_t i = 0; i < freq.size(); ++i) {
                             w.row(i, st.means[i], freq[i], std::log(freq[i]));
                           }
                         }));
  out.result("null_frequency", freq[0]);
  return out;
}

// --- action-min / counterexample ------------------------------------------

Outputs run_action_min(const ExperimentConfig& cfg) {
  const int order = get_required_order(cfg);
  ActionProblem p;
  p.order = order;
  p.grid_points = count_at_least(cfg, "grid_points", 2001, 32);
  const long long slips = cfg.get_int("slips", 1);
  p.boundary.e_start = 0.0;
  p.boundary.e_end = 2.0 * std::numbers::pi * static_cast<double>(slips);
  if (order == 2) {
    p.boundary.edot_start = 0.0;
    p.boundary.edot_end = 0.0;
  }
  const std::string horizon = cfg.get_string("horizon", "free");
  if (horizon != "free") p.horizon = positive(cfg, "horizon", 0.0);
  const ActionResult r = minimize_action(p);

  Outputs out;
  out.files.emplace_back("path.csv", to_csv([&](std::ostream& os) {
                           write_csv(os, r.path, order == 1 ? std::vector<std::string>{"e"}
                                                            : std::vector<std::string>{"e", "edot"});
                         }));
  out.files.emplace_back("result.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"order", "value", "converged", "iterations"});
                           w.row(order, r.value, r.converged, r.iterations);
                         }));
  out.files.emplace_back("sweep.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"horizon", "value", "converged"});
                           for (const auto& s : r.sweep) w.row(s.horizon, s.value, s.converged);
                         }));
  out.result("value", r.value);
  out.result("converged", r.converged ? "true" : "false");
  out.result("iterations", std::to_string(r.iterations));
  out.result("residual", r.residual);
  out.result("solved_horizon", r.horizon);
  out.numerical_failure = !r.converged;
  return out;
}

Outputs run_counterexample(const ExperimentConfig& cfg) {
  const std::size_t grid = count_at_least(cfg, "grid_points", 2001, 32);
  const CounterexampleResult c = counterexample_actions(grid);
  Outputs out;
  out.files.emplace_back("counterexample.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"system", "functional", "exponent", "reported", "converged"});
                           w.row("tau1", "1/2 int (e' + 2 sin(e/2))^2", c.tau1_exponent, c.tau1_reported,
                                 c.tau1.converged);
                           w.row("tau2", "1/2 int (e' + sin e)^2", c.tau2_exponent, c.tau2_reported, c.tau2.converged);
                         }));
  out.files.emplace_back("path_tau1.csv", to_csv([&](std::ostream& os) { write_csv(os, c.tau1.path, {"e"}); }));
  out.files.emplace_back("path_tau2.csv", to_csv([&](std::ostream& os) { write_csv(os, c.tau2.path, {"e"}); }));
  out.result("tau1_exponent", c.tau1_exponent);
  out.result("tau1_reported", c.tau1_reported);
  out.result("tau2_exponent", c.tau2_exponent);
  out.result("tau2_reported", c.tau2_reported);
  out.result("tau1_exceeds_tau2", c.tau1_exponent > c.tau2_exponent ? "true" : "false");
  out.result("note",
             "completing the square gives 16 for tau1 under sqrt(eps) noise; 8 corresponds to sqrt(2 eps) noise");
  out.numerical_failure = !c.tau1.converged || !c.tau2.converged;
  return out;
}

// --- eikonal ---------------------------------------------------------------

Outputs run_eikonal(const ExperimentConfig& cfg) {
  EikonalOptions opt;
  const std::size_t n_rays = count_at_least(cfg, "n_rays", 64, 8);
  opt.r0 = positive(cfg, "r0", opt.r0);
  opt.dt = positive(cfg, "dt", opt.dt);
  opt.t_max = positive(cfg, "t_max", opt.t_max);
  opt.workers = get_workers(cfg);
  const std::size_t csv_stride = count_at_least(cfg, "csv_stride", 10, 1);
  if (opt.r0 > 0.1) throw ConfigError("r0 must be small (<= 0.1)");

  Outputs out;
  CausalExponentResult res;
  try {
    res = causal_exponent_second_order(n_rays, opt);
  } catch (const std::runtime_error& e) {
    throw NumericalError(e.what());
  }
  out.files.emplace_back("rays.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"ray_id", "t", "e", "phi", "pe", "pphi", "Phi"});
                           for (std::size_t i = 0; i < res.rays.size(); ++i) {
                             const auto& s = res.rays[i].samples;
                             for (std::size_t k = 0; k < s.size(); ++k) {
                               if (k % csv_stride == 0 || k + 1 == s.size()) {
                                 w.row(i, s[k].t, s[k].e, s[k].phi, s[k].pe, s[k].pphi, s[k].Phi);
                               }
                             }
                           }
                         }));
  double max_h = 0.0;
  for (const auto& r : res.rays) max_h = std::max(max_h, r.max_abs_h);
  out.result("Phi_saddle", res.Phi_saddle);
  out.result("Phi_mirror", res.Phi_mirror);
  out.result("exponent", res.exponent);
  out.result("max_abs_hamiltonian", max_h);
  out.result("rays", std::to_string(res.rays.size()));
  return out;
}

// --- figures / cnr-gap -----------------------------------------------------

Outputs run_figures(const ExperimentConfig& cfg) {
  std::vector<double> inv_default;
  for (int i = 1; i <= 40; ++i) inv_default.push_back(0.25 * i);
  std::vector<double> eps_default;
  for (double x : inv_default) eps_default.push_back(1.0 / x);
  const std::vector<double> eps = get_epsilons(cfg, eps_default);
  std::vector<double> cnr_default;
  for (int i = 0; i <= 40; ++i) cnr_default.push_back(-3.0 + 0.5 * i);
  const std::vector<double> cnr = cfg.get_double_list("cnr_db_grid", cnr_default);
  const std::size_t grid = count_at_least(cfg, "grid_points", 2001, 32);
  const std::size_t n_rays = count_at_least(cfg, "n_rays", 64, 8);
  EikonalOptions eo;
  eo.workers = get_workers(cfg);

  ActionProblem p2;
  p2.order = 2;
  p2.grid_points = grid;
  p2.boundary.edot_start = 0.0;
  p2.boundary.edot_end = 0.0;
  const ActionResult smoother2 = minimize_action(p2);
  CausalExponentResult ekf2;
  try {
    ekf2 = causal_exponent_second_order(n_rays, eo);
  } catch (const std::runtime_error& e) {
    throw NumericalError(e.what());
  }
  // order-1 EKF: gradient flow in -cos e, barrier 2 at noise 2 eps
  const double barrier = -std::cos(std::numbers::pi) + std::cos(0.0);
  const std::vector<ExponentRecord> records{
      {Estimator::smoother, 1, instanton_first_order().value, ExponentSource::analytic},
      {Estimator::ekf, 1, barrier, ExponentSource::analytic},
      {Estimator::smoother, 2, smoother2.value, ExponentSource::collocation},
      {Estimator::ekf, 2, ekf2.exponent, ExponentSource::eikonal}};

  Outputs out;
  out.files.emplace_back("exponents.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"estimator", "order", "exponent", "source"});
                           for (const auto& r : records) w.row(to_string(r.estimator), r.order, r.exponent, to_string(r.source));
                         }));
  for (int order : {1, 2}) {
    const auto a = figure_vs_inverse_epsilon(records, order, eps);
    const auto b = figure_vs_cnr(records, order, cnr);
    out.files.emplace_back("mtll_vs_inv_epsilon_order" + std::to_string(order) + ".csv",
                           to_csv([&](std::ostream& os) { write_figure_csv(os, a); }));
    out.files.emplace_back("mtll_vs_cnr_order" + std::to_string(order) + ".csv",
                           to_csv([&](std::ostream& os) { write_figure_csv(os, b); }));
    out.result("cnr_gap_db_order" + std::to_string(order),
               cnr_gap(order, records[static_cast<std::size_t>(2 * (order - 1))].exponent,
                       records[static_cast<std::size_t>(2 * (order - 1) + 1)].exponent));
  }
  for (const auto& r : records) {
    out.result(to_string(r.estimator) + "_order" + std::to_string(r.order) + "_exponent", r.exponent);
  }
  out.result("pre_exponential_factor", "1");
  out.numerical_failure = !smoother2.converged;
  return out;
}

Outputs run_cnr_gap(const ExperimentConfig& cfg) {
  const int order = get_required_order(cfg);
  cfg.require("exp_nc");
  cfg.require("exp_c");
  const double nc = positive(cfg, "exp_nc", 0.0);
  const double c = positive(cfg, "exp_c", 0.0);
  const double gap = cnr_gap(order, nc, c);
  Outputs out;
  out.files.emplace_back("cnr_gap.csv", to_csv([&](std::ostream& os) {
                           CsvWriter w(os, {"order", "exp_nc", "exp_c", "gap_db"});
                           w.row(order, nc, c, gap);
                         }));
  out.result("gap_db", gap);
  return out;
}

std::vector<Subcommand> subcommands() {
  const KeySpec order{"order", "system order (1 or 2)"};
  const KeySpec eps{"epsilon", "noise intensity"};
  const KeySpec eps_grid{"epsilon_grid", "comma-separated noise intensities"};
  const KeySpec dt{"dt", "time step"};
  const KeySpec horizon{"horizon", "time horizon"};
  const KeySpec grid{"grid_points", "collocation grid points"};
  const KeySpec family_starts{"bump_starts", "comma-separated slip bump start times"};
  const KeySpec family_width{"bump_width", "bump width (one value or one per start)"};
  return {
      {"simulate", "simulate signal, measurements and EKF error", {order, eps, horizon, dt, {"stream_id", "stream id"}},
       run_simulate},
      {"mtll-mc",
       "Monte Carlo MTLL of the causal EKF",
       {order, eps, eps_grid, {"horizon", "horizon per run (one value or one per epsilon)"}, dt, {"runs", "runs per epsilon"}},
       run_mtll_mc},
      {"cost-stats",
       "cost-difference statistics of a bump family",
       {order, eps, horizon, dt, family_starts, family_width, {"draws", "Monte Carlo draws (0: none)"}},
       run_cost_stats},
      {"order-stats",
       "argmin frequencies of {null} + bump family",
       {order, eps, horizon, dt, family_starts, family_width, {"draws", "Gaussian draws"}},
       run_order_stats},
      {"action-min",
       "minimise the smoother rate functional",
       {order, grid, {"horizon", "'free' or a fixed horizon"}, {"slips", "slip multiplicity n (e_end = 2 pi n)"}},
       run_action_min},
      {"counterexample", "exponents of the two counterexample error equations", {grid}, run_counterexample},
      {"eikonal",
       "second-order causal quasi-potential from characteristics",
       {{"n_rays", "rays launched"}, {"r0", "launch radius"}, dt, {"t_max", "ray time limit"},
        {"csv_stride", "write every k-th stored sample"}},
       run_eikonal},
      {"figures",
       "MTLL curves against 1/epsilon and CNR for both orders",
       {eps_grid, {"cnr_db_grid", "comma-separated CNR values (dB)"}, grid, {"n_rays", "rays launched"}},
       run_figures},
      {"cnr-gap",
       "smoother vs EKF CNR gap from two exponents",
       {order, {"exp_nc", "smoother exponent"}, {"exp_c", "EKF exponent"}},
       run_cnr_gap},
  };
}

void write_outputs(const std::filesystem::path& dir, const std::string& name, const ExperimentConfig& cfg,
                   const Outputs& out) {
  std::filesystem::create_directories(dir);
  for (const auto& [file, body] : out.files) {
    std::ofstream f(dir / file, std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error("cannot write " + (dir / file).string());
  }
  std::ostringstream s;
  s << "subcommand=" << name << '\n';
  for (const auto& [k, v] : cfg.resolved()) s << k << '=' << v << '\n';
  for (const auto& [k, v] : out.results) s << k << '=' << v << '\n';
  std::ofstream f(dir / "summary.txt", std::ios::binary);
  f << s.str();
  std::cout << s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-of-lock laboratory for smoothed and causal phase estimation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  const std::vector<Subcommand> subs = subcommands();
  struct Bound {
    CLI::App* app;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<Bound> bound(subs.size());
  std::string config_path;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    auto* sc = app.add_subcommand(subs[i].name, subs[i].help);
    bound[i].app = sc;
    std::vector<KeySpec> keys = subs[i].keys;
    keys.push_back({"output_dir", "directory for CSV outputs and summary.txt (required)"});
    keys.push_back({"master_seed", "64-bit master seed"});
    keys.push_back({"workers", "worker thread cap (0: hardware concurrency)"});
    for (const auto& k : keys) {
      bound[i].options[k.key] = sc->add_option("--" + dashed(k.key), bound[i].values[k.key], k.help);
    }
    sc->add_option("--config", config_path, "key=value config file; flags override it");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << app.help();
    return kExitConfig;
  }

  std::size_t chosen = 0;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (bound[i].app->parsed()) chosen = i;
  }
  const Subcommand& sub = subs[chosen];
  Bound& b = bound[chosen];

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
      cfg = ExperimentConfig::parse(in);
      for (const auto& [k, v] : cfg.entries()) {
        if (!b.options.count(k)) throw ConfigError("config key '" + k + "' is not used by " + sub.name);
      }
    }
    for (const auto& [k, opt] : b.options) {
      if (opt->count() > 0) cfg.set(k, b.values[k]);
    }
    cfg.require("output_dir");
    const std::filesystem::path dir = cfg.get_string("output_dir");
    cfg.get_uint64("master_seed", 1);
    get_workers(cfg);

    Outputs out;
    try {
      out = sub.run(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    write_outputs(dir, sub.name, cfg, out);
    if (out.numerical_failure) {
      std::cerr << sub.name << ": solver did not converge\n";
      return kExitNumerical;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n\n" << b.app->help();
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
