#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lockloss/csv.hpp"
#include "lockloss/parallel.hpp"

namespace lockloss {

// Quasi-potential of the second-order EKF error (e, phi):
//   H = (phi/2 - sin e) p_e - sin e p_phi + p_e^2 + 2 p_e p_phi + 2 p_phi^2 = 0.

struct CharacteristicSample {
  double t = 0.0;
  double e = 0.0;
  double phi = 0.0;
  double pe = 0.0;
  double pphi = 0.0;
  double Phi = 0.0;
};

struct Characteristic {
  double launch_angle = 0.0;
  std::vector<CharacteristicSample> samples;
  bool truncated = false;  // left the (e, phi) window
  double max_abs_h = 0.0;  // over every integration step
};

struct EikonalOptions {
  double r0 = 1e-3;
  double dt = 1e-3;
  double t_max = 120.0;
  double Phi_max = 3.0;
  double e_window = 2.0 * std::numbers::pi;
  double phi_window = 8.0;
  std::size_t record_stride = 10;
  int aim_iterations = 60;
  std::size_t aim_pairs = 4;
  unsigned workers = 0;
};

inline double hamiltonian(double e, double phi, double pe, double pphi) {
  const double s = std::sin(e);
  return (0.5 * phi - s) * pe - s * pphi + pe * pe + 2.0 * pe * pphi + 2.0 * pphi * pphi;
}

/// S with Phi ~ 1/2 z^T S z near the origin: S = P^{-1}, J P + P J^T = -2 Q,
/// J the drift Jacobian at 0 and Q the momentum quadratic form.
inline Eigen::Matrix2d quadratic_quasi_potential() {
  Eigen::Matrix2d J;
  J << -1.0, 0.5, -1.0, 0.0;
  Eigen::Matrix2d Q;
  Q << 1.0, 1.0, 1.0, 2.0;
  // vec(P) over (p11, p12, p22) for the symmetric 2x2 Lyapunov equation
  Eigen::Matrix3d M;
  M << 2.0 * J(0, 0), 2.0 * J(0, 1), 0.0,                  //
      J(1, 0), J(0, 0) + J(1, 1), J(0, 1),                 //
      0.0, 2.0 * J(1, 0), 2.0 * J(1, 1);
  const Eigen::Vector3d rhs(-2.0 * Q(0, 0), -2.0 * Q(0, 1), -2.0 * Q(1, 1));
  const Eigen::Vector3d v = M.fullPivLu().solve(rhs);
  Eigen::Matrix2d P;
  P << v(0), v(1), v(1), v(2);
  return P.inverse();
}

namespace detail {

using EikonalState = std::array<double, 5>;  // e, phi, pe, pphi, Phi

inline EikonalState characteristic_rhs(const EikonalState& y) {
  const double s = std::sin(y[0]);
  const double c = std::cos(y[0]);
  const double pe = y[2];
  const double pp = y[3];
  const double de = 0.5 * y[1] - s + 2.0 * pe + 2.0 * pp;
  const double dphi = -s + 2.0 * pe + 4.0 * pp;
  return {de, dphi, c * (pe + pp), -0.5 * pe, pe * de + pp * dphi};
}

inline EikonalState rk4_step(const EikonalState& y, double h) {
  auto axpy = [](const EikonalState& a, double s, const EikonalState& b) {
    EikonalState r;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const EikonalState k1 = characteristic_rhs(y);
  const EikonalState k2 = characteristic_rhs(axpy(y, 0.5 * h, k1));
  const EikonalState k3 = characteristic_rhs(axpy(y, 0.5 * h, k2));
  const EikonalState k4 = characteristic_rhs(axpy(y, h, k3));
  EikonalState out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

struct ClosestApproach {
  double distance = 0.0;
  double Phi = 0.0;  // at the target, first-order corrected
  std::size_t index = 0;
  double side = 0.0;  // sign of tangent x (target - closest point)
};

inline ClosestApproach closest_approach(const Characteristic& ray, double te, double tphi) {
  const auto& s = ray.samples;
  if (s.empty()) throw std::invalid_argument("closest_approach: empty characteristic");
  ClosestApproach best;
  best.distance = std::hypot(s[0].e - te, s[0].phi - tphi);
  double best_lam = 0.0;
  std::size_t best_seg = 0;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double ax = s[k].e, ay = s[k].phi;
    const double dx = s[k + 1].e - ax, dy = s[k + 1].phi - ay;
    const double len2 = dx * dx + dy * dy;
    const double lam = len2 > 0.0 ? std::clamp(((te - ax) * dx + (tphi - ay) * dy) / len2, 0.0, 1.0) : 0.0;
    const double d = std::hypot(ax + lam * dx - te, ay + lam * dy - tphi);
    if (d < best.distance) {
      best.distance = d;
      best_lam = lam;
      best_seg = k;
    }
  }
  best.index = best_seg;
  const auto& a = s[best_seg];
  const auto& b = s.size() > 1 ? s[best_seg + 1] : s[best_seg];
  // inverse-distance weighting between the bracketing samples
  const double da = std::hypot(a.e - te, a.phi - tphi);
  const double db = std::hypot(b.e - te, b.phi - tphi);
  double wa, wb;
  if (da == 0.0 || db == 0.0) {
    wa = da == 0.0 ? 1.0 : 0.0;
    wb = 1.0 - wa;
  } else {
    wa = 1.0 / da;
    wb = 1.0 / db;
  }
  const double ws = wa + wb;
  CharacteristicSample m;
  m.e = a.e + best_lam * (b.e - a.e);
  m.phi = a.phi + best_lam * (b.phi - a.phi);
  m.pe = (wa * a.pe + wb * b.pe) / ws;
  m.pphi = (wa * a.pphi + wb * b.pphi) / ws;
  m.Phi = (wa * a.Phi + wb * b.Phi) / ws;
  // p is grad Phi on the characteristic: carry the value across the residual gap
  best.Phi = m.Phi + m.pe * (te - m.e) + m.pphi * (tphi - m.phi);
  const double tx = b.e - a.e, ty = b.phi - a.phi;
  best.side = tx * (tphi - m.phi) - ty * (te - m.e);
  return best;
}

}  // namespace detail

/// Integrates one characteristic launched at angle theta on the circle
/// |z| = r0 with p = S z and Phi = 1/2 z^T S z, by fixed-step RK4.
inline Characteristic integrate_characteristic(double theta, const EikonalOptions& opt = {}) {
  if (!(opt.dt > 0.0) || !(opt.r0 > 0.0) || !(opt.t_max > 0.0) || opt.record_stride < 1) {
    throw std::invalid_argument("integrate_characteristic: bad options");
  }
  static const Eigen::Matrix2d S = quadratic_quasi_potential();
  const Eigen::Vector2d z(opt.r0 * std::cos(theta), opt.r0 * std::sin(theta));
  const Eigen::Vector2d p = S * z;
  detail::EikonalState y{z(0), z(1), p(0), p(1), 0.5 * z.dot(S * z)};

  Characteristic ray;
  ray.launch_angle = theta;
  auto record = [&](double t) { ray.samples.push_back({t, y[0], y[1], y[2], y[3], y[4]}); };
  record(0.0);
  ray.max_abs_h = std::abs(hamiltonian(y[0], y[1], y[2], y[3]));
  const auto steps = static_cast<std::size_t>(std::ceil(opt.t_max / opt.dt));
  double t = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const detail::EikonalState next = detail::rk4_step(y, opt.dt);
    if (std::abs(next[0]) > opt.e_window || std::abs(next[1]) > opt.phi_window || !std::isfinite(next[4])) {
      ray.truncated = true;
      break;
    }
    y = next;
    t = static_cast<double>(k) * opt.dt;
    ray.max_abs_h = std::max(ray.max_abs_h, std::abs(hamiltonian(y[0], y[1], y[2], y[3])));
    if (y[4] > opt.Phi_max) break;
    if (k % opt.record_stride == 0) record(t);
  }
  if (ray.samples.back().t != t) record(t);
  return ray;
}

/// n_rays characteristics at equally spaced launch angles.
inline std::vector<Characteristic> launch_characteristics(std::size_t n_rays, double r0, double dt,
                                                          EikonalOptions opt = {}) {
  if (n_rays < 8) throw std::invalid_argument("launch_characteristics: n_rays must be >= 8");
  if (!(r0 > 0.0) || r0 > 0.1) throw std::invalid_argument("launch_characteristics: r0 must be small and positive");
  opt.r0 = r0;
  opt.dt = dt;
  std::vector<Characteristic> rays(n_rays);
  parallel_for(n_rays, opt.workers, [&](std::size_t i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_rays);
    rays[i] = integrate_characteristic(theta, opt);
  });
  return rays;
}

/// Bisects launch angles between neighbouring rays that pass the target on
/// opposite sides, converging on the ray through the target. The aimed rays
/// are returned (up to opt.aim_pairs of them, nearest brackets first).
inline std::vector<Characteristic> aim_characteristics(std::span<const Characteristic> rays, double te,
                                                       double tphi, const EikonalOptions& opt = {}) {
  const std::size_t n = rays.size();
  if (n < 2) return {};
  std::vector<detail::ClosestApproach> ca(n);
  for (std::size_t i = 0; i < n; ++i) ca[i] = detail::closest_approach(rays[i], te, tphi);

  std::vector<std::pair<double, std::size_t>> brackets;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    if ((ca[i].side > 0.0) != (ca[j].side > 0.0)) {
      brackets.emplace_back(std::min(ca[i].distance, ca[j].distance), i);
    }
  }
  std::sort(brackets.begin(), brackets.end());
  if (brackets.size() > opt.aim_pairs) brackets.resize(opt.aim_pairs);

  std::vector<Characteristic> out(brackets.size());
  parallel_for(brackets.size(), opt.workers, [&](std::size_t b) {
    const std::size_t i = brackets[b].second;
    const std::size_t j = (i + 1) % n;
    double lo = rays[i].launch_angle;
    double hi = rays[j].launch_angle;
    if (hi < lo) hi += 2.0 * std::numbers::pi;
    const bool lo_side = ca[i].side > 0.0;
    Characteristic best = ca[i].distance < ca[j].distance ? rays[i] : rays[j];
    double best_d = std::min(ca[i].distance, ca[j].distance);
    for (int it = 0; it < opt.aim_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      Characteristic r = integrate_characteristic(mid, opt);
      const auto c = detail::closest_approach(r, te, tphi);
      if ((c.side > 0.0) == lo_side) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (c.distance < best_d) {
        best_d = c.distance;
        best = std::move(r);
      }
    }
    out[b] = std::move(best);
  });
  return out;
}

/// Phi(point): minimum over rays passing within `radius` of the value at
/// closest approach (IDW between the bracketing samples, then continued to
/// the point along p = grad Phi).
inline double quasi_potential_at(std::span<const Characteristic> rays, double e, double phi, double radius = 0.2) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rays) {
    if (r.samples.empty()) continue;
    const auto c = detail::closest_approach(r, e, phi);
    if (c.distance <= radius) best = std::min(best, c.Phi);
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("quasi_potential_at: no characteristic passes within " + std::to_string(radius) +
                             " of the point; launch more rays or aim at it");
  }
  return best;
}

/// lim eps ln tau in units of eps, from Phi computed in units of eps' = eps / sqrt 2.
inline double causal_exponent_from_quasi_potential(double Phi) { return std::numbers::sqrt2 * Phi; }

struct CausalExponentResult {
  double Phi_saddle = 0.0;         // Phi(pi, 0)
  double Phi_mirror = 0.0;         // Phi(-pi, 0)
  double exponent = 0.0;
  std::vector<Characteristic> rays;  // coarse bundle followed by the aimed rays
};

inline CausalExponentResult causal_exponent_second_order(std::size_t n_rays = 64, EikonalOptions opt = {}) {
  constexpr double pi = std::numbers::pi;
  CausalExponentResult res;
  res.rays = launch_characteristics(n_rays, opt.r0, opt.dt, opt);
  auto plus = aim_characteristics(res.rays, pi, 0.0, opt);
  auto minus = aim_characteristics(res.rays, -pi, 0.0, opt);
  for (auto& r : plus) res.rays.push_back(std::move(r));
  for (auto& r : minus) res.rays.push_back(std::move(r));
  res.Phi_saddle = quasi_potential_at(res.rays, pi, 0.0);
  res.Phi_mirror = quasi_potential_at(res.rays, -pi, 0.0);
  res.exponent = causal_exponent_from_quasi_potential(res.Phi_saddle);
  return res;
}

/// CSV `ray_id,t,e,phi,pe,pphi,Phi`.
inline void write_rays_csv(std::ostream& os, std::span<const Characteristic> rays) {
  CsvWriter w(os, {"ray_id", "t", "e", "phi", "pe", "pphi", "Phi"});
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (const auto& s : rays[i].samples) w.row(i, s.t, s.e, s.phi, s.pe, s.pphi, s.Phi);
  }
}

}  // namespace lockloss
