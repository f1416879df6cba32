#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "lockloss/fit.hpp"
#include "lockloss/parallel.hpp"
#include "lockloss/path.hpp"
#include "lockloss/rng.hpp"
#include "lockloss/sde.hpp"

namespace lockloss {

using DriftFn = void (*)(const State&, State&);

/// Closed error dynamics of the causal EKF/PLL:
///   de = drift(e) dt + sqrt(2 eps') G dW,   eps' = epsilon_scale * eps.
struct ErrorDynamics {
  int order = 1;
  DriftFn drift = nullptr;
  Matrix noise;
  double epsilon_scale = 1.0;

  double epsilon_like(double epsilon) const { return epsilon_scale * epsilon; }
  void operator()(const State& e, State& out) const { drift(e, out); }
  std::size_t dim() const { return noise.rows; }
};

namespace detail {

inline void first_order_ekf_drift(const State& e, State& out) { out[0] = -std::sin(e[0]); }

// (e, phi): e' = phi/2 - sin e, phi' = -sin e. Both rows load the same v
// increment; phi also sees an independent w.
inline void second_order_ekf_drift(const State& e, State& out) {
  const double s = std::sin(e[0]);
  out[0] = 0.5 * e[1] - s;
  out[1] = -s;
}

}  // namespace detail

inline ErrorDynamics ekf_error_drift(int order) {
  if (order == 1) {
    return {1, &detail::first_order_ekf_drift, Matrix(1, 1, {1.0}), 1.0};
  }
  if (order == 2) {
    return {2, &detail::second_order_ekf_drift, Matrix(2, 2, {-1.0, 0.0, -1.0, 1.0}), 1.0 / std::numbers::sqrt2};
  }
  throw std::invalid_argument("ekf_error_drift: order must be 1 or 2");
}

struct SlipEvent {
  double t_start = 0.0;  // last time the error sat at 0 (mod 2 pi)
  double t_cross = 0.0;  // crossing of pi * n
  double t_end = 0.0;    // arrival at 2 pi n
  int n = 0;

  double duration() const { return t_end - t_start; }
};

struct SlipDetectorOptions {
  double zero_band = 0.1;        // |e - 2 pi k| below this counts as "at 2 pi k"
  double derivative_band = 0.5;  // second component must be this close to 0 at t_end
  bool check_derivative = false;
};

/// Online cycle-slip detector. Feed samples in time order; the working error
/// is re-referenced by -2 pi n after every detected slip. Grid steps that jump
/// over a band still count as reaching it.
class SlipDetector {
 public:
  explicit SlipDetector(SlipDetectorOptions opt = {}) : opt_(opt) {}

  void observe(double t, double e, double derivative = 0.0) {
    const double w = e - offset_;
    const double prev = started_ ? prev_w_ : w;
    if (!started_) {
      started_ = true;
      last_zero_ = t;
      prev_t_ = t;
    }
    step(t, prev, w, derivative);
    prev_w_ = e - offset_;
    prev_t_ = t;
  }

  const std::vector<SlipEvent>& events() const { return events_; }
  std::size_t count() const { return events_.size(); }
  double offset() const { return offset_; }

 private:
  static bool segment_hits(double a, double b, double lo, double hi) {
    return std::min(a, b) <= hi && std::max(a, b) >= lo;
  }

  // Time at which the segment (prev_t_, prev) -> (t, cur) passes level.
  double crossing_time(double t, double prev, double cur, double level) const {
    if (cur == prev) return t;
    const double lam = std::clamp((level - prev) / (cur - prev), 0.0, 1.0);
    return prev_t_ + lam * (t - prev_t_);
  }

  void step(double t, double prev, double w, double derivative) {
    constexpr double pi = std::numbers::pi;
    const double band = opt_.zero_band;

    if (!open_) {
      if (segment_hits(prev, w, -band, band)) last_zero_ = t;
      if (std::abs(w) >= pi) {
        open_ = true;
        sign_ = w > 0 ? 1 : -1;
        crossings_.clear();
      } else {
        return;
      }
    }

    const double ps = prev * sign_;
    const double ws = w * sign_;
    while (ws >= pi * static_cast<double>(crossings_.size() + 1)) {
      const double level = pi * static_cast<double>(crossings_.size() + 1);
      crossings_.push_back(crossing_time(t, ps, ws, level));
    }

    if (std::min(ps, ws) <= band && ws < pi) {
      // back in the starting well: no slip
      open_ = false;
      crossings_.clear();
      if (segment_hits(prev, w, -band, band)) last_zero_ = t;
      return;
    }

    if (opt_.check_derivative && std::abs(derivative) > opt_.derivative_band) return;

    const auto kmax = static_cast<long>(std::floor((std::max(ps, ws) + band) / (2.0 * pi)));
    for (long k = kmax; k >= 1; --k) {
      const double target = 2.0 * pi * static_cast<double>(k);
      if (!segment_hits(ps, ws, target - band, target + band)) continue;
      if (crossings_.size() < static_cast<std::size_t>(k)) continue;
      SlipEvent ev;
      ev.n = sign_ * static_cast<int>(k);
      ev.t_start = last_zero_;
      ev.t_cross = crossings_[static_cast<std::size_t>(k - 1)];
      ev.t_end = t;
      events_.push_back(ev);
      offset_ += 2.0 * pi * static_cast<double>(ev.n);
      open_ = false;
      crossings_.clear();
      last_zero_ = t;
      return;
    }
  }

  SlipDetectorOptions opt_;
  double offset_ = 0.0;
  double last_zero_ = 0.0;
  double prev_w_ = 0.0;
  double prev_t_ = 0.0;
  bool started_ = false;
  bool open_ = false;
  int sign_ = 1;
  std::vector<double> crossings_;
  std::vector<SlipEvent> events_;
};

/// Slips in a 1-D or 2-D error path. For 2-D paths the second component must
/// be near zero when the phase error arrives at 2 pi n.
inline std::vector<SlipEvent> detect_slips(const Path& error_path, SlipDetectorOptions opt = {}) {
  if (error_path.dim() > 1) opt.check_derivative = true;
  SlipDetector det(opt);
  for (std::size_t k = 0; k < error_path.size(); ++k) {
    det.observe(error_path.time(k), error_path(k, 0), error_path.dim() > 1 ? error_path(k, 1) : 0.0);
  }
  return det.events();
}

/// Simulates one EKF error run from e = 0 and returns its slips.
inline std::vector<SlipEvent> simulate_ekf_slips(int order, double epsilon, double horizon, double dt,
                                                 NoiseStream stream) {
  const ErrorDynamics dyn = ekf_error_drift(order);
  const std::size_t steps = detail::step_count(horizon, dt);
  SlipDetectorOptions opt;
  opt.check_derivative = order == 2;
  SlipDetector det(opt);
  GaussianSource rng(stream);
  integrate_euler_maruyama(dyn.drift, dyn.noise, dyn.epsilon_like(epsilon), State{}, steps, 0.0, dt, rng,
                           [&](std::size_t, double t, const State& x) {
                             det.observe(t, x[0], x[1]);
                             return false;
                           });
  return det.events();
}

struct MtllEstimate {
  double mean = 0.0;    // total observed time / total slips
  double std_error = 0.0;  // NaN when no slip was observed
  std::size_t n_events = 0;
  double epsilon = 0.0;
  std::size_t censored = 0;  // runs without any slip
  std::size_t runs = 0;
  double total_time = 0.0;
  bool lower_bound = false;  // no slips: mean is only a lower bound

  std::size_t runs_with_events() const { return runs - censored; }
};

/// Renewal estimate  tau = t_total / N_total  over independent runs keyed by
/// stream_id = run index. The standard error is the delta-method error of the
/// ratio, using the across-run variance of slip counts.
inline MtllEstimate estimate_mtll_mc(int order, double epsilon, std::size_t runs, double horizon, double dt,
                                     std::uint64_t master_seed, unsigned workers = 0) {
  if (runs < 1) throw std::invalid_argument("estimate_mtll_mc: runs must be >= 1");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("estimate_mtll_mc: epsilon must be nonnegative");
  const std::size_t steps = detail::step_count(horizon, dt);
  std::vector<std::size_t> counts(runs, 0);
  parallel_for(runs, workers, [&](std::size_t i) {
    counts[i] = simulate_ekf_slips(order, epsilon, horizon, dt, NoiseStream{master_seed, i}).size();
  });

  MtllEstimate est;
  est.epsilon = epsilon;
  est.runs = runs;
  est.total_time = static_cast<double>(runs) * static_cast<double>(steps) * dt;
  for (std::size_t c : counts) {
    est.n_events += c;
    if (c == 0) ++est.censored;
  }
  if (est.n_events == 0) {
    est.mean = est.total_time;
    est.std_error = std::numeric_limits<double>::quiet_NaN();
    est.lower_bound = true;
    return est;
  }
  const double n_total = static_cast<double>(est.n_events);
  est.mean = est.total_time / n_total;
  if (runs > 1) {
    const double mean_count = n_total / static_cast<double>(runs);
    double ss = 0.0;
    for (std::size_t c : counts) {
      const double d = static_cast<double>(c) - mean_count;
      ss += d * d;
    }
    const double var = ss / static_cast<double>(runs - 1);
    est.std_error = est.mean * std::sqrt(static_cast<double>(runs) * var) / n_total;
  } else {
    est.std_error = est.mean / std::sqrt(n_total);
  }
  return est;
}

using ExponentFit = LineFit;  // slope: d ln(tau) / d(1/eps)

/// Weighted least squares of ln(tau) on 1/eps, weights 1/var(ln tau) with
/// var(ln tau) ~ (stderr/mean)^2.
inline ExponentFit fit_mtll_exponent(std::span<const MtllEstimate> estimates) {
  if (estimates.size() < 2) throw std::invalid_argument("fit_mtll_exponent: need at least two estimates");
  std::vector<double> x, y, w;
  for (const auto& e : estimates) {
    if (e.lower_bound || !(e.epsilon > 0.0) || !(e.std_error > 0.0)) {
      throw std::invalid_argument("fit_mtll_exponent: every estimate needs slips and a positive stderr");
    }
    const double rel = e.std_error / e.mean;
    x.push_back(1.0 / e.epsilon);
    y.push_back(std::log(e.mean));
    w.push_back(1.0 / (rel * rel));
  }
  return weighted_line_fit(x, y, w);
}

}  // namespace lockloss
