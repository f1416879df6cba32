#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "lockloss/models.hpp"
#include "lockloss/path.hpp"
#include "lockloss/rng.hpp"

namespace lockloss {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxDim = 2;
using State = std::array<double, kMaxDim>;

namespace detail {

inline std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
  const double ratio = T / dt;
  if (ratio < 1.0 - 1e-9) throw std::invalid_argument("T must be at least dt");
  return static_cast<std::size_t>(std::llround(ratio));
}

}  // namespace detail

/// Euler-Maruyama for  dx = drift(x) dt + sqrt(2 epsilon_like) G dW.
///
/// `drift(const State&, State&)` fills the first n entries. `observe(k, t, x)`
/// is called for the initial state and after every step; returning true stops
/// the integration. Exactly K normals are consumed per step, whatever the
/// noise level, so streams stay aligned across noise intensities. Returns the
/// index of the last observed sample.
template <class Drift, class Observer>
std::size_t integrate_euler_maruyama(Drift&& drift, const Matrix& noise, double epsilon_like, State x,
                                     std::size_t steps, double t0, double dt, GaussianSource& rng,
                                     Observer&& observe) {
  const std::size_t n = noise.rows;
  const std::size_t m = noise.cols;
  if (n == 0 || n > kMaxDim || m == 0 || m > kMaxDim) {
    throw std::invalid_argument("integrate_euler_maruyama: unsupported noise matrix shape");
  }
  if (!(epsilon_like >= 0.0)) throw std::invalid_argument("integrate_euler_maruyama: negative noise intensity");
  const double amp = std::sqrt(2.0 * epsilon_like * dt);
  const double g00 = noise(0, 0);
  const double g01 = m > 1 ? noise(0, 1) : 0.0;
  const double g10 = n > 1 ? noise(1, 0) : 0.0;
  const double g11 = n > 1 && m > 1 ? noise(1, 1) : 0.0;

  if (observe(std::size_t{0}, t0, x)) return 0;
  State f{};
  for (std::size_t k = 1; k <= steps; ++k) {
    drift(x, f);
    const double w0 = rng.normal();
    const double w1 = m > 1 ? rng.normal() : 0.0;
    if (!std::isfinite(f[0]) || (n > 1 && !std::isfinite(f[1]))) {
      throw NumericalError("Euler-Maruyama: non-finite drift at t = " +
                           std::to_string(t0 + static_cast<double>(k - 1) * dt));
    }
    x[0] += f[0] * dt + amp * (g00 * w0 + g01 * w1);
    if (n > 1) x[1] += f[1] * dt + amp * (g10 * w0 + g11 * w1);
    if (observe(k, t0 + static_cast<double>(k) * dt, x)) return k;
  }
  return steps;
}

/// Linear signal model  x_{k+1} = x_k + A x_k dt + sqrt(eps) B dW_k,  x_0 = 0.
/// epsilon = 0 is allowed here (deterministic limit).
inline Path simulate_linear_sde(const Matrix& A, const Matrix& B, double epsilon, double T, double dt,
                                NoiseStream stream) {
  const std::size_t steps = detail::step_count(T, dt);
  const std::size_t n = A.rows;
  if (n == 0 || n > kMaxDim || A.cols != n || B.rows != n || B.cols != n) {
    throw std::invalid_argument("simulate_linear_sde: A and B must be square of equal size <= 2");
  }
  if (!(epsilon >= 0.0)) throw std::invalid_argument("simulate_linear_sde: epsilon must be nonnegative");
  GaussianSource rng(stream);
  Path p(0.0, dt, n, steps + 1);
  const double amp = std::sqrt(epsilon * dt);
  State x{};
  for (std::size_t k = 1; k <= steps; ++k) {
    State w{};
    for (std::size_t j = 0; j < n; ++j) w[j] = rng.normal();
    State next = x;
    for (std::size_t i = 0; i < n; ++i) {
      double ax = 0.0;
      double bw = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        ax += A(i, j) * x[j];
        bw += B(i, j) * w[j];
      }
      next[i] = x[i] + ax * dt + amp * bw;
    }
    x = next;
    for (std::size_t i = 0; i < n; ++i) p(k, i) = x[i];
  }
  return p;
}

inline Path simulate_signal(const PhaseSystem& system, double T, double dt, NoiseStream stream) {
  return simulate_linear_sde(system.A, system.B, system.epsilon, T, dt, stream);
}

/// dy_k = h(x_k) dt + sqrt(eps) dv_k, one 2-vector per signal sample.
inline Path simulate_measurement_increments(const Path& signal, double epsilon, NoiseStream stream) {
  signal.validate();
  if (!(epsilon >= 0.0)) throw std::invalid_argument("simulate_measurement_increments: negative epsilon");
  GaussianSource rng(stream);
  const double dt = signal.dt();
  const double amp = std::sqrt(epsilon * dt);
  Path dy(signal.t0(), dt, 2, signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const auto [s, c] = measurement(signal(k, 0));
    const double v0 = rng.normal();
    const double v1 = rng.normal();
    dy(k, 0) = s * dt + amp * v0;
    dy(k, 1) = c * dt + amp * v1;
  }
  return dy;
}

struct ErrorSdeResult {
  Path path;
  std::optional<double> stop_time;
};

struct NeverStop {
  bool operator()(double, std::span<const double>) const { return false; }
};

/// de = drift(e) dt + sqrt(2 epsilon_like) G dW, started at x0 (t0 = 0).
/// `stop(t, e)` halts the integration at the first sample where it holds.
template <class Drift, class Stop = NeverStop>
ErrorSdeResult simulate_error_sde(Drift&& drift, const Matrix& noise_matrix, double epsilon_like,
                                  std::span<const double> x0, double T, double dt, NoiseStream stream,
                                  Stop&& stop = {}) {
  const std::size_t steps = detail::step_count(T, dt);
  const std::size_t n = noise_matrix.rows;
  if (x0.size() != n) throw std::invalid_argument("simulate_error_sde: x0 dimension mismatch");
  State x{};
  for (std::size_t i = 0; i < n; ++i) x[i] = x0[i];
  GaussianSource rng(stream);
  ErrorSdeResult out{Path(0.0, dt, n, 0), std::nullopt};
  auto observe = [&](std::size_t, double t, const State& s) {
    const std::span<const double> view(s.data(), n);
    out.path.push_back(view);
    if (stop(t, view)) {
      out.stop_time = t;
      return true;
    }
    return false;
  };
  integrate_euler_maruyama(drift, noise_matrix, epsilon_like, x, steps, 0.0, dt, rng, observe);
  return out;
}

}  // namespace lockloss
