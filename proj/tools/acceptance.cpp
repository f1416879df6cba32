// Acceptance run: one PASS/FAIL line per criterion, exit status = number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lockloss/lockloss.hpp"

namespace {

using namespace lockloss;
using Clock = std::chrono::steady_clock;

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [X]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void run(int id, const char* title, const std::function<Verdict()>& body, double limit_s) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail += std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0.0) v.check(secs < limit_s, fmt("runtime %.1f s < %.0f s", secs, limit_s));
  if (!v.pass) ++failures;
  std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
  std::fflush(stdout);
}

ActionProblem second_order_problem(std::size_t grid) {
  ActionProblem p;
  p.order = 2;
  p.grid_points = grid;
  p.boundary.edot_start = 0.0;
  p.boundary.edot_end = 0.0;
  return p;
}

Verdict criterion_first_order_smoother() {
  Verdict v;
  ActionProblem p;
  p.order = 1;
  const ActionResult r = minimize_action(p);
  v.check(std::abs(r.value - 8.0) <= 0.01 * 8.0, fmt("collocation %.6f within 1%% of 8", r.value));
  v.check(r.converged, "collocation converged");
  const ActionResult inst = instanton_first_order();
  v.check(inst.value == 8.0, fmt("closed-form instanton %.17g == 8", inst.value));
  return v;
}

Verdict criterion_second_order_smoother() {
  Verdict v;
  const ActionResult a = minimize_action(second_order_problem(2001));
  const ActionResult b = minimize_action(second_order_problem(4001));
  v.check(std::abs(a.value - 5.0) <= 0.15 * 5.0, fmt("value %.6f within 15%% of 5", a.value));
  const double change = std::abs(b.value - a.value) / a.value;
  v.check(change < 0.02, fmt("grid doubling 2001 -> 4001: %.6f -> %.6f (%.2e rel) < 2%%", a.value, b.value, change));
  v.check(a.converged && b.converged, "both converged");
  return v;
}

Verdict criterion_second_order_causal() {
  Verdict v;
  const CausalExponentResult r = causal_exponent_second_order();
  v.check(std::abs(r.Phi_saddle - 0.6) <= 0.1, fmt("Phi(pi,0) = %.4f in 0.6 +/- 0.1", r.Phi_saddle));
  v.check(std::abs(r.exponent - 0.85) <= 0.15, fmt("exponent %.4f in 0.85 +/- 0.15", r.exponent));
  return v;
}

Verdict criterion_first_order_mc() {
  Verdict v;
  const std::vector<double> eps{0.5, 0.4, 1.0 / 3.0, 0.25};
  constexpr std::size_t kRuns = 2000;
  constexpr std::size_t kMinSlips = 2000;
  constexpr double kDt = 0.01;
  constexpr std::uint64_t kSeed = 20241014;
  std::vector<MtllEstimate> est;
  std::string slips;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    // pilot: size the horizon so the main run expects ~1.3 * kMinSlips slips
    double h = 50.0;
    MtllEstimate pilot;
    for (;;) {
      pilot = estimate_mtll_mc(1, eps[i], 200, h, kDt, kSeed + 1000 + i);
      if (pilot.n_events >= 100) break;
      h *= 4.0;
    }
    const double horizon = std::ceil(1.3 * static_cast<double>(kMinSlips) * pilot.mean / kRuns);
    est.push_back(estimate_mtll_mc(1, eps[i], kRuns, horizon, kDt, kSeed));
    const auto& e = est.back();
    slips += (i ? ", " : "") + fmt("eps=%.4g: tau=%.4g, slips=", e.epsilon, e.mean) + std::to_string(e.n_events);
    v.check(e.n_events >= kMinSlips, fmt("eps=%.4g has >= 2000 slips", e.epsilon));
  }
  const ExponentFit fit = fit_mtll_exponent(est);
  v.check(std::abs(fit.slope - 2.0) <= 0.2 * 2.0,
          fmt("slope %.4f +/- %.4f within 2 +/- 20%%", fit.slope, fit.slope_stderr));
  v.detail += " (" + slips + ")";
  return v;
}

Verdict criterion_cnr_gaps() {
  Verdict v;
  const double g1 = cnr_gap(1, 8.0, 2.0);
  const double g2 = cnr_gap(2, 5.0, 0.85);
  v.check(std::abs(g1 - 12.04) <= 0.01, fmt("order 1: %.4f dB vs 12.04 +/- 0.01", g1));
  v.check(std::abs(g2 - 10.25) <= 0.01, fmt("order 2: %.4f dB vs 10.25 +/- 0.01", g2));
  return v;
}

Verdict criterion_delta_j_stats() {
  Verdict v;
  constexpr double kT = 10.0, kDt = 0.01, kEps = 0.5;
  constexpr std::size_t kDraws = 100000;
  const std::size_t samples = static_cast<std::size_t>(std::llround(kT / kDt)) + 1;
  TrajectoryFamily fam;
  fam.order = 1;
  fam.epsilon = kEps;
  fam.members = {bump_trajectory(1, 0.0, kDt, samples, 2.0, 3.0),   // A
                 bump_trajectory(1, 0.0, kDt, samples, 3.5, 3.0),   // B, overlaps A
                 bump_trajectory(1, 0.0, kDt, samples, 7.0, 2.5)};  // C, disjoint from A and B
  const CostStats st = compute_cost_stats(fam);
  const Path signal = simulate_signal(build_system(1, kEps), kT, kDt, NoiseStream{7, 0});
  const Eigen::MatrixXd x = sample_delta_j_batch(fam, signal, 11, kDraws);
  const double n = static_cast<double>(kDraws);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / (n - 1.0);
  int worst_mean = 0, worst_cov = 0;
  double zmax = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double se = std::sqrt(st.cov(i, i) / n);
    const double z = std::abs(mean(i) - st.means[static_cast<std::size_t>(i)]) / se;
    zmax = std::max(zmax, z);
    if (z > 3.0) ++worst_mean;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double se_c = std::sqrt((st.cov(i, i) * st.cov(j, j) + st.cov(i, j) * st.cov(i, j)) / (n - 1.0));
      const double zc = std::abs(cov(i, j) - st.cov(i, j)) / se_c;
      zmax = std::max(zmax, zc);
      if (zc > 3.0) ++worst_cov;
    }
  }
  v.check(worst_mean == 0, "means within 3 SE of m_i");
  v.check(worst_cov == 0, "variances/covariances within 3 SE of sigma_ij");
  v.check(st.cov(0, 1) > 0.0, fmt("overlap covariance sigma_AB = %.4f > 0", st.cov(0, 1)));
  const double se_ac = std::sqrt(st.cov(0, 0) * st.cov(2, 2) / (n - 1.0));
  // r_A sits at 2 pi only up to the trapezoid re-integration error, hence the relative bound
  const double scale = std::sqrt(st.cov(0, 0) * st.cov(2, 2));
  v.check(std::abs(st.cov(0, 2)) < 1e-6 * scale && std::abs(cov(0, 2)) <= 3.0 * se_ac,
          fmt("disjoint: sigma_AC = %.2e, sample %.3f (3 SE = %.3f)", st.cov(0, 2), cov(0, 2), 3.0 * se_ac));
  v.detail += fmt(" (max |z| = %.2f)", zmax);
  return v;
}

Verdict criterion_order_statistics() {
  Verdict v;
  constexpr double kT = 10.0, kDt = 0.01;
  constexpr std::size_t kDraws = 4000000;
  const std::size_t samples = static_cast<std::size_t>(std::llround(kT / kDt)) + 1;
  const std::vector<double> inv_eps{1.0, 1.5, 2.0, 2.5};
  // nested families: {null, slip} plus centred width variants of the slip
  const std::vector<std::vector<double>> ladder{{}, {4.8}, {4.8, 4.5, 4.3}, {4.8, 4.5, 4.3, 4.2, 4.1, 4.05}};
  std::vector<double> fitted, cell;
  double m = 0.0;
  for (std::size_t f = 0; f < ladder.size(); ++f) {
    TrajectoryFamily fam;
    fam.order = 1;
    fam.epsilon = 1.0;
    fam.members = {null_trajectory(1, 0.0, kDt, samples), bump_trajectory(1, 0.0, kDt, samples, 3.0, 4.0)};
    for (double w : ladder[f]) fam.members.push_back(bump_trajectory(1, 0.0, kDt, samples, 5.0 - 0.5 * w, w));
    const CostStats st = compute_cost_stats(fam);
    m = st.means[1];
    std::vector<double> freq;
    for (std::size_t i = 0; i < inv_eps.size(); ++i) {
      freq.push_back(argmin_frequencies(st.scaled_to(1.0 / inv_eps[i]), kDraws, NoiseStream{99, f * 16 + i})[1]);
    }
    fitted.push_back(fit_argmin_exponent(inv_eps, freq, kDraws).slope);
    cell.push_back(argmin_cell_exponent(st, 1));
  }
  v.check(fitted[0] >= m / 8.0 && fitted[0] <= m / 2.0,
          fmt("two-member exponent %.4f in [m/8, m/2] = [%.4f, %.4f]", fitted[0], m / 8.0, m / 2.0));
  v.check(std::abs(cell[0] - m / 8.0) < 1e-9 * m, fmt("two-member cell exponent %.6f = m/8", cell[0]));
  bool bracket = true, monotone = true;
  std::string seq;
  for (std::size_t f = 0; f < fitted.size(); ++f) {
    bracket = bracket && fitted[f] >= m / 8.0 && fitted[f] <= m / 2.0 && cell[f] <= m / 2.0;
    if (f > 0) monotone = monotone && cell[f] >= cell[f - 1] - 1e-9;
    seq += (f ? ", " : "") + fmt("%.3f (cell %.4f)", fitted[f], cell[f]);
  }
  v.check(bracket, "every family in [m/8, m/2]");
  v.check(monotone, "cell exponent nondecreasing under densification");
  v.check(fitted.back() > fitted.front(), "densest fitted exponent exceeds two-member exponent");
  v.detail += " (fitted: " + seq + ")";
  return v;
}

Verdict criterion_counterexample() {
  Verdict v;
  const CounterexampleResult c = counterexample_actions();
  v.check(std::abs(c.tau2_exponent - 4.0) <= 0.02 * 4.0, fmt("tau2 exponent %.5f within 2%% of 4", c.tau2_exponent));
  v.check(std::abs(c.tau1_exponent - 16.0) <= 0.02 * 16.0,
          fmt("tau1 exponent %.5f (completing the square: 16; reported: %.0f)", c.tau1_exponent, c.tau1_reported));
  v.check(c.tau1_exponent > c.tau2_exponent, "tau1 exponent > tau2 exponent");
  v.check(c.tau1.converged && c.tau2.converged, "both converged");
  return v;
}

double max_rel_gradient_error(const auto& act, const Eigen::VectorXd& x) {
  Eigen::VectorXd g;
  act.gradient(x, g);
  double err = 0.0;
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = act.value(xp);
    xp(i) = x(i) - h;
    const double fm = act.value(xp);
    xp(i) = x(i);
    err = std::max(err, std::abs((fp - fm) / (2.0 * h) - g(i)));
  }
  return err / std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);
}

Verdict criterion_invariants() {
  Verdict v;
  // gradient vs central differences at random feasible points
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 0.3);
  double worst = 0.0;
  constexpr std::size_t kNodes = 201;
  const Boundary bc{0.0, 2.0 * kPi, 0.0, 0.0};
  const collocation::FirstOrderAction a1(collocation::smoother_lagrangian(phase_detector_potential()), 0.0, 2.0 * kPi,
                                         0.1, kNodes);
  const collocation::SecondOrderAction a2(phase_detector_potential(), bc, 0.1, kNodes);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd ramp = collocation::ramp_guess(bc, 20.0, kNodes);
    Eigen::VectorXd x = ramp.segment(1, kNodes - 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += nd(gen);
    worst = std::max(worst, max_rel_gradient_error(a1, x));
    worst = std::max(worst, max_rel_gradient_error(a2, x));
  }
  v.check(worst < 1e-6, fmt("gradient vs central differences: %.2e < 1e-6 (20 points, both orders)", worst));

  // Hamiltonian conservation along characteristics
  const auto rays = launch_characteristics(32, 1e-3, 1e-3);
  double hmax = 0.0;
  bool monotone = true;
  for (const auto& r : rays) {
    hmax = std::max(hmax, r.max_abs_h);
    for (std::size_t k = 1; k < r.samples.size(); ++k) monotone = monotone && r.samples[k].Phi >= r.samples[k - 1].Phi;
  }
  v.check(hmax < 1e-6, fmt("|H| along rays: %.2e < 1e-6", hmax));

  // cov diagonal = 4 eps m
  const std::size_t samples = 1001;
  TrajectoryFamily fam;
  fam.order = 2;
  fam.epsilon = 0.3;
  fam.members = {null_trajectory(2, 0.0, 0.01, samples), bump_trajectory(2, 0.0, 0.01, samples, 2.0, 3.0),
                 bump_trajectory(2, 0.0, 0.01, samples, 4.0, 4.0)};
  const CostStats st = compute_cost_stats(fam);
  double diag = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double direct = cov_sigma(fam.members[i].r, fam.members[i].u, fam.members[i].r, fam.members[i].u, 0.3);
    const double expect = 4.0 * 0.3 * st.means[i];
    if (expect > 0.0) diag = std::max({diag, std::abs(st.cov(ii, ii) - expect) / expect, std::abs(direct - expect) / expect});
  }
  v.check(diag < 1e-10, fmt("cov diagonal vs 4 eps m: %.2e < 1e-10", diag));

  // worker-count determinism
  const MtllEstimate w1 = estimate_mtll_mc(1, 0.5, 64, 400.0, 0.01, 3, 1);
  const MtllEstimate w4 = estimate_mtll_mc(1, 0.5, 64, 400.0, 0.01, 3, 4);
  const auto f1 = argmin_frequencies(st, 50000, NoiseStream{4, 0}, 1);
  const auto f4 = argmin_frequencies(st, 50000, NoiseStream{4, 0}, 4);
  const Path sig = simulate_signal(build_system(2, 0.3), 10.0, 0.01, NoiseStream{1, 1});
  const Eigen::MatrixXd d1 = sample_delta_j_batch(fam, sig, 8, 200, 0, 1);
  const Eigen::MatrixXd d4 = sample_delta_j_batch(fam, sig, 8, 200, 0, 4);
  const bool same = w1.mean == w4.mean && w1.std_error == w4.std_error && w1.n_events == w4.n_events && f1 == f4 &&
                    d1 == d4;
  v.check(same, "bit-exact across 1 and 4 workers (MTLL, argmin, dJ batch)");
  return v;
}

}  // namespace

int main() {
  run(1, "first-order smoother exponent", criterion_first_order_smoother, 10.0);
  run(2, "second-order smoother exponent", criterion_second_order_smoother, 300.0);
  run(3, "second-order causal quasi-potential", criterion_second_order_causal, 120.0);
  run(4, "first-order causal exponent (Monte Carlo)", criterion_first_order_mc, 600.0);
  run(5, "CNR gaps", criterion_cnr_gaps, 0.0);
  run(6, "dJ statistics", criterion_delta_j_stats, 60.0);
  run(7, "order-statistics exponent bracket", criterion_order_statistics, 0.0);
  run(8, "counterexample suite", criterion_counterexample, 0.0);
  run(9, "invariant suites", criterion_invariants, 0.0);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
