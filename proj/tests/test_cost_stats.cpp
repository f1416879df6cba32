#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lockloss/cost_stats.hpp"
#include "lockloss/sde.hpp"

using namespace lockloss;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDt = 0.01;
constexpr std::size_t kSamples = 1001;  // T = 10

TrajectoryFamily family(int order, double eps, std::vector<Trajectory> members) {
  TrajectoryFamily f;
  f.order = order;
  f.epsilon = eps;
  f.members = std::move(members);
  return f;
}

Trajectory bump(double start, double width, int order = 1) {
  return bump_trajectory(order, 0.0, kDt, kSamples, start, width);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Two-sample Kolmogorov-Smirnov p-value (asymptotic Kolmogorov distribution).
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("action of simple trajectories", "[cost]") {
  CHECK(action_m(Path(0.0, kDt, 1, kSamples), Path(0.0, kDt, 1, kSamples)) == 0.0);

  // linear ramp r = 2 pi t on [0, 1]: int 4 sin^2(pi t) dt + (2 pi)^2 = 2 + 4 pi^2
  constexpr std::size_t n = 10001;
  Path r(0.0, 1e-4, 1, n), u(0.0, 1e-4, 1, n);
  for (std::size_t k = 0; k < n; ++k) {
    r(k) = 2.0 * kPi * r.time(k);
    u(k) = 2.0 * kPi;
  }
  CHECK(action_m(r, u) == Approx(2.0 + 4.0 * kPi * kPi).epsilon(1e-8));
  CHECK(action_m(r, u) == Approx(41.478).epsilon(1e-4));
}

TEST_CASE("action of the first-order instanton is 16", "[cost]") {
  // r = 4 atan(e^t) solves r' = 2 sin(r/2); m = int 8 / cosh^2 t dt
  constexpr double L = 20.0, h = 1e-3;
  const auto n = static_cast<std::size_t>(2.0 * L / h) + 1;
  Path r(-L, h, 1, n), u(-L, h, 1, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = r.time(k);
    r(k) = 4.0 * std::atan(std::exp(t));
    u(k) = 2.0 / std::cosh(t);
  }
  CHECK(action_m(r, u) == Approx(16.0 * std::tanh(L)).epsilon(1e-6));
}

TEST_CASE("action rejects mismatched grids", "[cost]") {
  CHECK_THROWS_AS(action_m(Path(0.0, 0.01, 1, 10), Path(0.0, 0.01, 1, 11)), std::invalid_argument);
  CHECK_THROWS_AS(cov_sigma(Path(0.0, 0.01, 1, 10), Path(0.0, 0.01, 1, 10), Path(0.0, 0.02, 1, 10),
                            Path(0.0, 0.02, 1, 10), 1.0),
                  std::invalid_argument);
}

TEST_CASE("bump trajectories satisfy the constraint", "[cost]") {
  for (int order : {1, 2}) {
    const PhaseSystem s = build_system(order, 1.0);
    const Trajectory t = bump(2.0, 3.0, order);
    CHECK(constraint_residual(t, s.A, s.B) < 1e-6);
    CHECK(t.r(kSamples - 1, 0) == Approx(2.0 * kPi).epsilon(1e-3));
  }
}

TEST_CASE("covariance examples", "[cost]") {
  const Trajectory a = bump(1.0, 2.0), c = bump(6.0, 3.0), z = null_trajectory(1, 0.0, kDt, kSamples);
  const double scale = std::sqrt(cov_sigma(a.r, a.u, a.r, a.u, 0.4) * cov_sigma(c.r, c.u, c.r, c.u, 0.4));
  CHECK(std::abs(cov_sigma(a.r, a.u, c.r, c.u, 0.4)) < 1e-6 * scale);
  CHECK(cov_sigma(a.r, a.u, a.r, a.u, 0.4) == Approx(4.0 * 0.4 * action_m(a.r, a.u)).epsilon(1e-12));
  CHECK(cov_sigma(a.r, a.u, z.r, z.u, 0.4) == 0.0);
}

TEST_CASE("cost statistics invariants", "[cost]") {
  for (int order : {1, 2}) {
    const TrajectoryFamily f = family(order, 0.3,
                                      {null_trajectory(order, 0.0, kDt, kSamples), bump(1.0, 3.0, order),
                                       bump(2.0, 3.0, order), bump(6.5, 2.5, order), bump(3.0, 6.0, order)});
    const CostStats st = compute_cost_stats(f);
    REQUIRE(st.size() == 5);
    for (std::size_t i = 0; i < st.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      CHECK(std::abs(st.cov(ii, ii) - 4.0 * 0.3 * st.means[i]) <= 1e-10 * std::max(1.0, st.cov(ii, ii)));
    }
    CHECK((st.cov - st.cov.transpose()).norm() == 0.0);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(st.cov).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-10 * st.cov.trace());
    const CostStats half = st.scaled_to(0.15);
    CHECK(half.cov(1, 1) == Approx(0.5 * st.cov(1, 1)));
    CHECK(half.means == st.means);
  }
}

TEST_CASE("noise-free cost differences equal the means", "[cost]") {
  const TrajectoryFamily f0 = family(1, 0.0, {bump(2.0, 3.0), bump(4.0, 2.0)});
  const PhaseSystem s = build_system(1, 1.0);
  const Path signal = simulate_linear_sde(s.A, s.B, 0.0, 10.0, kDt, {1, 0});
  const std::vector<double> dj = sample_delta_j(f0, signal, {1, 1}, {1, 2});
  const CostStats st = compute_cost_stats(f0);
  REQUIRE(dj.size() == 2);
  CHECK(dj[0] == Approx(st.means[0]).epsilon(1e-12));
  CHECK(dj[1] == Approx(st.means[1]).epsilon(1e-12));
}

TEST_CASE("Monte Carlo moments match the Gaussian law", "[cost][slow]") {
  constexpr std::size_t draws = 100000;
  constexpr double eps = 0.5;
  const TrajectoryFamily f = family(1, eps, {bump(2.0, 3.0), bump(3.0, 3.0)});
  const CostStats st = compute_cost_stats(f);
  const Path signal = simulate_signal(build_system(1, eps), 10.0, kDt, {2, 0});
  const Eigen::MatrixXd x = sample_delta_j_batch(f, signal, 5, draws);
  const double n = draws;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / (n - 1.0);
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(std::abs(mean(i) - st.means[i]) <= 3.0 * std::sqrt(st.cov(i, i) / n));
    CHECK(std::abs(cov(i, i) - st.cov(i, i)) <= 3.0 * st.cov(i, i) * std::sqrt(2.0 / (n - 1.0)));
  }
  CHECK(st.cov(0, 1) > 0.0);
  const double se01 = std::sqrt((st.cov(0, 0) * st.cov(1, 1) + st.cov(0, 1) * st.cov(0, 1)) / (n - 1.0));
  CHECK(std::abs(cov(0, 1) - st.cov(0, 1)) <= 3.0 * se01);
}

TEST_CASE("cost law does not depend on the signal realisation", "[cost]") {
  constexpr std::size_t draws = 5000;
  const TrajectoryFamily f = family(1, 0.5, {bump(2.0, 3.0)});
  const PhaseSystem s = build_system(1, 0.5);
  const Eigen::MatrixXd a = sample_delta_j_batch(f, simulate_signal(s, 10.0, kDt, {3, 0}), 6, draws);
  const Eigen::MatrixXd b = sample_delta_j_batch(f, simulate_signal(s, 10.0, kDt, {3, 1}), 7, draws);
  std::vector<double> va(a.data(), a.data() + draws), vb(b.data(), b.data() + draws);
  CHECK(ks_p_value(va, vb) > 0.01);
}

TEST_CASE("delta-J batches are worker-count invariant", "[cost]") {
  const TrajectoryFamily f = family(2, 0.3, {bump(2.0, 3.0, 2), bump(4.0, 4.0, 2)});
  const Path signal = simulate_signal(build_system(2, 0.3), 10.0, kDt, {1, 1});
  CHECK(sample_delta_j_batch(f, signal, 8, 64, 0, 1) == sample_delta_j_batch(f, signal, 8, 64, 0, 3));
}

TEST_CASE("argmin of the null family", "[cost]") {
  const TrajectoryFamily f = family(1, 0.5, {null_trajectory(1, 0.0, kDt, kSamples)});
  const auto freq = argmin_frequencies(f, 1000, {1, 0});
  REQUIRE(freq.size() == 1);
  CHECK(freq[0] == 1.0);
  CHECK_THROWS_AS(argmin_frequencies(f, 0, {1, 0}), std::invalid_argument);
  const TrajectoryFamily no_null = family(1, 0.5, {bump(2.0, 3.0)});
  CHECK_THROWS_AS(argmin_frequencies(no_null, 10, {1, 0}), std::invalid_argument);
}

TEST_CASE("two-member argmin is a Gaussian tail with exponent m/8", "[cost]") {
  const TrajectoryFamily f = family(1, 1.0, {null_trajectory(1, 0.0, kDt, kSamples), bump(3.0, 4.0)});
  const CostStats st = compute_cost_stats(f);
  const double m = st.means[1];
  constexpr std::size_t draws = 2000000;
  const std::vector<double> inv_eps{1.0, 1.5, 2.0, 2.5};
  std::vector<double> freq;
  for (std::size_t i = 0; i < inv_eps.size(); ++i) {
    const double eps = 1.0 / inv_eps[i];
    const auto fr = argmin_frequencies(st.scaled_to(eps), draws, {4, i});
    const double p = normal_cdf(-std::sqrt(m / (4.0 * eps)));  // P(m + N(0, 4 eps m) < 0)
    CHECK(std::abs(fr[1] - p) <= 3.0 * std::sqrt(p * (1.0 - p) / draws));
    CHECK(fr[0] + fr[1] == Approx(1.0));
    freq.push_back(fr[1]);
  }
  const double slope = fit_argmin_exponent(inv_eps, freq, draws).slope;
  CHECK(slope >= m / 8.0);
  CHECK(slope <= m / 2.0);
  CHECK(argmin_cell_exponent(st, 1) == Approx(m / 8.0).epsilon(1e-9));
  CHECK(argmin_cell_exponent(st, 0) == 0.0);
}

TEST_CASE("argmin exponent grows as the family densifies", "[cost][slow]") {
  // null, the reference slip bump(3, 4), then 48 wider variants with the same centre
  std::vector<Trajectory> members{null_trajectory(1, 0.0, kDt, kSamples), bump(3.0, 4.0)};
  for (int j = 1; j <= 48; ++j) {
    const double w = 4.0 + 0.8 * j / 48.0;
    members.push_back(bump(5.0 - 0.5 * w, w));
  }
  const TrajectoryFamily dense = family(1, 1.0, members);
  const CostStats st = compute_cost_stats(dense);
  const double m = st.means[1];

  std::vector<double> cell;
  for (std::size_t n : {2u, 5u, 10u, 20u, 35u, 50u}) {
    CostStats sub;
    sub.epsilon = st.epsilon;
    sub.means.assign(st.means.begin(), st.means.begin() + n);
    sub.cov = st.cov.topLeftCorner(n, n);
    cell.push_back(argmin_cell_exponent(sub, 1));
  }
  for (std::size_t i = 1; i < cell.size(); ++i) CHECK(cell[i] >= cell[i - 1] - 1e-9);
  CHECK(cell.back() > cell.front());
  CHECK(cell.back() <= m / 2.0);

  constexpr std::size_t draws = 1000000;
  const std::vector<double> inv_eps{1.0, 1.5, 2.0, 2.5};
  auto fitted = [&](const CostStats& s) {
    std::vector<double> freq;
    for (std::size_t i = 0; i < inv_eps.size(); ++i) {
      freq.push_back(argmin_frequencies(s.scaled_to(1.0 / inv_eps[i]), draws, {9, i})[1]);
    }
    return fit_argmin_exponent(inv_eps, freq, draws).slope;
  };
  CostStats two;
  two.epsilon = st.epsilon;
  two.means = {st.means[0], st.means[1]};
  two.cov = st.cov.topLeftCorner(2, 2);
  const double slope2 = fitted(two);
  const double slope50 = fitted(st);
  CHECK(slope50 > slope2);
  CHECK(slope50 <= m / 2.0);
}

TEST_CASE("argmin frequencies are worker-count invariant", "[cost]") {
  const TrajectoryFamily f =
      family(1, 0.7, {null_trajectory(1, 0.0, kDt, kSamples), bump(3.0, 4.0), bump(2.0, 5.0), bump(6.0, 3.0)});
  CHECK(argmin_frequencies(f, 30000, {2, 2}, 1) == argmin_frequencies(f, 30000, {2, 2}, 4));
}
