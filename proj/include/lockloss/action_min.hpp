#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lockloss/newton.hpp"
#include "lockloss/path.hpp"

namespace lockloss {

/// Scalar function with its first two derivatives.
struct ScalarField {
  std::function<double(double)> value;
  std::function<double(double)> slope;
  std::function<double(double)> curvature;
};

/// 4 sin^2(e/2) = 2 - 2 cos e.
inline ScalarField phase_detector_potential() {
  return {[](double e) { return 2.0 - 2.0 * std::cos(e); }, [](double e) { return 2.0 * std::sin(e); },
          [](double e) { return 2.0 * std::cos(e); }};
}

inline ScalarField zero_field() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

struct Boundary {
  double e_start = 0.0;
  double e_end = 2.0 * std::numbers::pi;
  std::optional<double> edot_start;  // order 2 only
  std::optional<double> edot_end;
};

/// Rate functional to minimise over paths e(.) on [0, T]:
///   smoother (drift unset):  1/2 int [ V(e) + xi^2 ] dt,  xi = e' (order 1) or e'' (order 2)
///   drift set (order 1):     1/2 int ( e' - b(e) )^2 dt
struct ActionProblem {
  int order = 1;
  ScalarField potential = phase_detector_potential();
  std::optional<ScalarField> drift;
  Boundary boundary;
  std::optional<double> horizon;  // unset: free horizon
  std::size_t grid_points = 2001;
  std::vector<double> horizon_sweep{10.0, 20.0, 40.0, 80.0};
  double sweep_tolerance = 0.005;
  NewtonOptions solver;
};

struct SweepPoint {
  double horizon = 0.0;
  double value = 0.0;
  bool converged = false;
};

struct ActionResult {
  double value = 0.0;
  Path path;     // e, plus e' for order 2
  Path control;  // xi
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  double horizon = 0.0;
  std::vector<SweepPoint> sweep;
};

namespace collocation {

struct LagrangianTerms {
  double L, Le, Lv, Lee, Lev, Lvv;
};

using Lagrangian = std::function<LagrangianTerms(double e, double v)>;

inline Lagrangian smoother_lagrangian(ScalarField V) {
  return [V = std::move(V)](double e, double v) {
    return LagrangianTerms{0.5 * (V.value(e) + v * v), 0.5 * V.slope(e), v, 0.5 * V.curvature(e), 0.0, 1.0};
  };
}

inline Lagrangian drift_lagrangian(ScalarField b) {
  return [b = std::move(b)](double e, double v) {
    const double r = v - b.value(e);
    const double bp = b.slope(e);
    return LagrangianTerms{0.5 * r * r, -r * bp, r, bp * bp - r * b.curvature(e), -bp, 1.0};
  };
}

/// Order-1 action  sum_k dt L( (e_k + e_{k+1})/2, (e_{k+1} - e_k)/dt ),
/// with e_0 and e_M fixed; unknowns are the interior nodes.
class FirstOrderAction {
 public:
  FirstOrderAction(Lagrangian lag, double e_start, double e_end, double dt, std::size_t nodes)
      : lag_(std::move(lag)), e_start_(e_start), e_end_(e_end), dt_(dt), nodes_(nodes) {
    if (nodes < 3) throw std::invalid_argument("FirstOrderAction: need at least 3 nodes");
  }

  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(nodes_ - 2); }
  double dt() const { return dt_; }

  Eigen::VectorXd full(const Eigen::VectorXd& x) const {
    Eigen::VectorXd e(static_cast<Eigen::Index>(nodes_));
    e(0) = e_start_;
    e.segment(1, unknowns()) = x;
    e(e.size() - 1) = e_end_;
    return e;
  }

  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd e = full(x);
    double s = 0.0;
    for (Eigen::Index k = 0; k + 1 < e.size(); ++k) {
      s += lag_(0.5 * (e(k) + e(k + 1)), (e(k + 1) - e(k)) / dt_).L;
    }
    return s * dt_;
  }

  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    const Eigen::VectorXd e = full(x);
    g.setZero(unknowns());
    for (Eigen::Index k = 0; k + 1 < e.size(); ++k) {
      const auto t = lag_(0.5 * (e(k) + e(k + 1)), (e(k + 1) - e(k)) / dt_);
      if (k >= 1) g(k - 1) += 0.5 * dt_ * t.Le - t.Lv;
      if (k + 1 <= unknowns()) g(k) += 0.5 * dt_ * t.Le + t.Lv;
    }
  }

  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd e = full(x);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(4 * e.size()));
    const double s[2] = {-1.0 / dt_, 1.0 / dt_};
    for (Eigen::Index k = 0; k + 1 < e.size(); ++k) {
      const auto t = lag_(0.5 * (e(k) + e(k + 1)), (e(k + 1) - e(k)) / dt_);
      const Eigen::Index idx[2] = {k - 1, k};  // unknown index of nodes k, k+1
      for (int a = 0; a < 2; ++a) {
        if (idx[a] < 0 || idx[a] >= unknowns()) continue;
        for (int b = 0; b < 2; ++b) {
          if (idx[b] < 0 || idx[b] >= unknowns()) continue;
          const double h = 0.25 * t.Lee + 0.5 * t.Lev * (s[a] + s[b]) + t.Lvv * s[a] * s[b];
          trip.emplace_back(idx[a], idx[b], dt_ * h);
        }
      }
    }
    Eigen::SparseMatrix<double> H(unknowns(), unknowns());
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
  }

 private:
  Lagrangian lag_;
  double e_start_, e_end_, dt_;
  std::size_t nodes_;
};

/// Order-2 smoother action  1/2 sum_k w_k [ V(e_k) + u_k^2 ],  u = second
/// central difference, trapezoid weights w. Prescribed end slopes enter
/// through ghost nodes e_{-1} = e_1 - 2 dt e'(0), e_{M+1} = e_{M-1} + 2 dt e'(T);
/// without them the end second differences are dropped.
class SecondOrderAction {
 public:
  SecondOrderAction(ScalarField V, const Boundary& bc, double dt, std::size_t nodes)
      : V_(std::move(V)), bc_(bc), dt_(dt), nodes_(nodes) {
    if (nodes < 4) throw std::invalid_argument("SecondOrderAction: need at least 4 nodes");
    const auto M = static_cast<Eigen::Index>(nodes - 1);
    const double h2 = 1.0 / (dt * dt);
    w_ = Eigen::VectorXd::Constant(M + 1, dt);
    w_(0) = w_(M) = 0.5 * dt;
    wu_ = w_;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index k = 1; k < M; ++k) {
      trip.emplace_back(k, k - 1, h2);
      trip.emplace_back(k, k, -2.0 * h2);
      trip.emplace_back(k, k + 1, h2);
    }
    if (bc.edot_start) {
      trip.emplace_back(0, 0, -2.0 * h2);
      trip.emplace_back(0, 1, 2.0 * h2);
    } else {
      wu_(0) = 0.0;
    }
    if (bc.edot_end) {
      trip.emplace_back(M, M, -2.0 * h2);
      trip.emplace_back(M, M - 1, 2.0 * h2);
    } else {
      wu_(M) = 0.0;
    }
    Eigen::SparseMatrix<double> D(M + 1, M + 1);
    D.setFromTriplets(trip.begin(), trip.end());
    const Eigen::SparseMatrix<double> Dfree = D.middleCols(1, unknowns());
    quad_ = Eigen::SparseMatrix<double>(Dfree.transpose() * wu_.asDiagonal() * Dfree);
  }

  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(nodes_ - 2); }
  double dt() const { return dt_; }

  Eigen::VectorXd full(const Eigen::VectorXd& x) const {
    Eigen::VectorXd e(static_cast<Eigen::Index>(nodes_));
    e(0) = bc_.e_start;
    e.segment(1, unknowns()) = x;
    e(e.size() - 1) = bc_.e_end;
    return e;
  }

  /// Second differences evaluated as differences of first differences, which
  /// keeps the rounding error O(eps |e'| / dt) instead of O(eps |e| / dt^2).
  Eigen::VectorXd control(const Eigen::VectorXd& e) const {
    const Eigen::Index M = e.size() - 1;
    const double h2 = 1.0 / (dt_ * dt_);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(M + 1);
    for (Eigen::Index k = 1; k < M; ++k) u(k) = ((e(k + 1) - e(k)) - (e(k) - e(k - 1))) * h2;
    if (bc_.edot_start) u(0) = 2.0 * ((e(1) - e(0)) - dt_ * *bc_.edot_start) * h2;
    if (bc_.edot_end) u(M) = 2.0 * ((e(M - 1) - e(M)) + dt_ * *bc_.edot_end) * h2;
    return u;
  }

  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd e = full(x);
    const Eigen::VectorXd u = control(e);
    double s = 0.0;
    for (Eigen::Index k = 0; k < e.size(); ++k) s += w_(k) * V_.value(e(k)) + wu_(k) * u(k) * u(k);
    return 0.5 * s;
  }

  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    const Eigen::VectorXd e = full(x);
    const Eigen::VectorXd u = control(e);
    // D^T y, with the ghost rows 0 and M entering twice
    Eigen::VectorXd y = wu_.cwiseProduct(u);
    const Eigen::Index M = e.size() - 1;
    y(0) *= 2.0;
    y(M) *= 2.0;
    const double h2 = 1.0 / (dt_ * dt_);
    g.resize(unknowns());
    for (Eigen::Index j = 1; j < M; ++j) {
      const double a = j - 1 == 0 ? y(0) : wu_(j - 1) * u(j - 1);
      const double c = j + 1 == M ? y(M) : wu_(j + 1) * u(j + 1);
      const double b = wu_(j) * u(j);
      g(j - 1) = 0.5 * w_(j) * V_.slope(e(j)) + ((a - b) - (b - c)) * h2;
    }
  }

  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd e = full(x);
    Eigen::SparseMatrix<double> H = quad_;
    for (Eigen::Index i = 0; i < unknowns(); ++i) H.coeffRef(i, i) += 0.5 * w_(i + 1) * V_.curvature(e(i + 1));
    return H;
  }

 private:
  ScalarField V_;
  Boundary bc_;
  double dt_;
  std::size_t nodes_;
  Eigen::VectorXd w_, wu_;
  Eigen::SparseMatrix<double> quad_;
};

inline double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

/// Smoothstep ramp e_start -> e_end over the middle half of [0, T].
inline Eigen::VectorXd ramp_guess(const Boundary& bc, double T, std::size_t nodes) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(nodes));
  const double dt = T / static_cast<double>(nodes - 1);
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    e(k) = bc.e_start + (bc.e_end - bc.e_start) * smoothstep((t - 0.25 * T) / (0.5 * T));
  }
  return e;
}

/// Re-centres a solution on a longer horizon: the old path is shifted to the
/// middle and padded with the boundary values.
inline Eigen::VectorXd recentre(const Eigen::VectorXd& old_e, double old_T, double new_T, std::size_t nodes) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(nodes));
  const double new_dt = new_T / static_cast<double>(nodes - 1);
  const double old_dt = old_T / static_cast<double>(old_e.size() - 1);
  const double shift = 0.5 * (new_T - old_T);
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    const double s = static_cast<double>(k) * new_dt - shift;
    if (s <= 0.0) {
      e(k) = old_e(0);
    } else if (s >= old_T) {
      e(k) = old_e(old_e.size() - 1);
    } else {
      const double pos = s / old_dt;
      const auto j = std::min(static_cast<Eigen::Index>(pos), old_e.size() - 2);
      const double lam = pos - static_cast<double>(j);
      e(k) = (1.0 - lam) * old_e(j) + lam * old_e(j + 1);
    }
  }
  return e;
}

}  // namespace collocation

namespace detail {

inline ActionResult solve_fixed_horizon(const ActionProblem& p, double T, const Eigen::VectorXd& guess) {
  const std::size_t nodes = p.grid_points;
  const double dt = T / static_cast<double>(nodes - 1);
  ActionResult res;
  res.horizon = T;
  Eigen::VectorXd e;
  if (p.order == 1) {
    const collocation::Lagrangian lag =
        p.drift ? collocation::drift_lagrangian(*p.drift) : collocation::smoother_lagrangian(p.potential);
    collocation::FirstOrderAction act(lag, p.boundary.e_start, p.boundary.e_end, dt, nodes);
    const NewtonReport rep = minimize_newton(act, guess.segment(1, act.unknowns()), p.solver);
    e = act.full(rep.x);
    res.value = rep.value;
    res.converged = rep.converged;
    res.iterations = rep.iterations;
    res.residual = rep.residual;
    res.path = Path(0.0, dt, 1, nodes);
    res.control = Path(0.0, dt, 1, nodes);
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      res.path(kk, 0) = e(k);
      const Eigen::Index lo = std::max<Eigen::Index>(k - 1, 0);
      const Eigen::Index hi = std::min<Eigen::Index>(k + 1, e.size() - 1);
      res.control(kk, 0) = (e(hi) - e(lo)) / (static_cast<double>(hi - lo) * dt);
    }
  } else {
    collocation::SecondOrderAction act(p.potential, p.boundary, dt, nodes);
    const NewtonReport rep = minimize_newton(act, guess.segment(1, act.unknowns()), p.solver);
    e = act.full(rep.x);
    const Eigen::VectorXd u = act.control(e);
    res.value = rep.value;
    res.converged = rep.converged;
    res.iterations = rep.iterations;
    res.residual = rep.residual;
    res.path = Path(0.0, dt, 2, nodes);
    res.control = Path(0.0, dt, 1, nodes);
    const Eigen::Index M = e.size() - 1;
    for (Eigen::Index k = 0; k <= M; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      res.path(kk, 0) = e(k);
      double slope;
      if (k == 0) {
        slope = p.boundary.edot_start ? *p.boundary.edot_start : (e(1) - e(0)) / dt;
      } else if (k == M) {
        slope = p.boundary.edot_end ? *p.boundary.edot_end : (e(M) - e(M - 1)) / dt;
      } else {
        slope = (e(k + 1) - e(k - 1)) / (2.0 * dt);
      }
      res.path(kk, 1) = slope;
      res.control(kk, 0) = u(k);
    }
  }
  return res;
}

}  // namespace detail

/// Direct collocation of the rate functional. A fixed horizon is solved once
/// from the ramp guess; a free horizon walks through horizon_sweep (each
/// solve warm-started from the previous one, re-centred) until successive
/// values agree to sweep_tolerance, and reports the smallest value seen.
inline ActionResult minimize_action(const ActionProblem& p) {
  if (p.order != 1 && p.order != 2) throw std::invalid_argument("minimize_action: order must be 1 or 2");
  if (p.drift && p.order != 1) throw std::invalid_argument("minimize_action: drift functionals are order 1");
  if (p.grid_points < 32) throw std::invalid_argument("minimize_action: grid_points must be >= 32");
  if (p.horizon && !(*p.horizon > 0.0)) throw std::invalid_argument("minimize_action: horizon must be positive");

  const std::size_t nodes = p.grid_points;
  if (p.horizon) {
    return detail::solve_fixed_horizon(p, *p.horizon, collocation::ramp_guess(p.boundary, *p.horizon, nodes));
  }
  if (p.horizon_sweep.empty()) throw std::invalid_argument("minimize_action: empty horizon sweep");

  std::optional<ActionResult> best;
  std::vector<SweepPoint> sweep;
  Eigen::VectorXd guess;
  double prev_T = 0.0;
  bool sweep_converged = false;
  for (std::size_t i = 0; i < p.horizon_sweep.size(); ++i) {
    const double T = p.horizon_sweep[i];
    if (!(T > 0.0)) throw std::invalid_argument("minimize_action: sweep horizons must be positive");
    guess = i == 0 ? collocation::ramp_guess(p.boundary, T, nodes) : collocation::recentre(guess, prev_T, T, nodes);
    ActionResult r = detail::solve_fixed_horizon(p, T, guess);
    sweep.push_back({T, r.value, r.converged});
    guess.resize(static_cast<Eigen::Index>(nodes));
    for (std::size_t k = 0; k < nodes; ++k) guess(static_cast<Eigen::Index>(k)) = r.path(k, 0);
    prev_T = T;
    const bool improved = !best || r.value < best->value;
    if (i > 0) {
      const double last = sweep[i - 1].value;
      if (std::abs(r.value - last) <= p.sweep_tolerance * std::abs(last)) sweep_converged = true;
    }
    if (improved) best = std::move(r);
    if (sweep_converged) break;
  }
  best->sweep = std::move(sweep);
  best->converged = best->converged && sweep_converged;
  return *best;
}

/// Closed-form first-order instanton e' = 2 sin(e/2), i.e. e(t) = 4 atan(exp(t - T/2)),
/// sampled on [0, T] with the ends pinned to 0 and 2 pi. The value is
/// 1/2 int [4 sin^2(e/2) + e'^2] dt = int_0^{2 pi} 2 sin(e/2) de = 8.
inline ActionResult instanton_first_order(double T = 40.0, std::size_t grid_points = 4001) {
  if (grid_points < 3 || !(T > 0.0)) throw std::invalid_argument("instanton_first_order: bad grid");
  constexpr double pi = std::numbers::pi;
  const double dt = T / static_cast<double>(grid_points - 1);
  ActionResult r;
  r.horizon = T;
  r.path = Path(0.0, dt, 1, grid_points);
  r.control = Path(0.0, dt, 1, grid_points);
  for (std::size_t k = 0; k < grid_points; ++k) {
    double e = 4.0 * std::atan(std::exp(r.path.time(k) - 0.5 * T));
    if (k == 0) e = 0.0;
    if (k + 1 == grid_points) e = 2.0 * pi;
    r.path(k, 0) = e;
    r.control(k, 0) = 2.0 * std::sin(0.5 * e);
  }
  // [-4 cos(e/2)] from 0 to 2 pi
  r.value = -4.0 * std::cos(pi) + 4.0 * std::cos(0.0);
  r.converged = true;
  return r;
}

/// sum_k 2 |sin(ebar_k / 2)| |e_{k+1} - e_k|: the completing-the-square bound
/// on the discrete order-1 smoother action of a path.
inline double first_order_square_bound(const Path& e) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) {
    s += 2.0 * std::abs(std::sin(0.25 * (e(k, 0) + e(k + 1, 0)))) * std::abs(e(k + 1, 0) - e(k, 0));
  }
  return s;
}

struct CounterexampleResult {
  double tau1_exponent = 0.0;  // 1/2 inf int (e' + 2 sin(e/2))^2, 0 -> 2 pi
  double tau2_exponent = 0.0;  // 1/2 inf int (e' + sin e)^2,      0 -> 2 pi
  double tau1_reported = 8.0;
  double tau2_reported = 4.0;
  ActionResult tau1;
  ActionResult tau2;
};

/// Freidlin-Wentzell exponents of the two error equations with identical
/// linearisations,  e' = -2 sin(e/2) + noise  and  e' = -sin e + noise.
inline CounterexampleResult counterexample_actions(std::size_t grid_points = 2001) {
  ActionProblem p;
  p.order = 1;
  p.grid_points = grid_points;
  CounterexampleResult out;

  p.drift = ScalarField{[](double e) { return -2.0 * std::sin(0.5 * e); },
                        [](double e) { return -std::cos(0.5 * e); },
                        [](double e) { return 0.5 * std::sin(0.5 * e); }};
  out.tau1 = minimize_action(p);
  out.tau1_exponent = out.tau1.value;

  p.drift = ScalarField{[](double e) { return -std::sin(e); }, [](double e) { return -std::cos(e); },
                        [](double e) { return std::sin(e); }};
  out.tau2 = minimize_action(p);
  out.tau2_exponent = out.tau2.value;
  return out;
}

}  // namespace lockloss
