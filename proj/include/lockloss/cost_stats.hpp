#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "lockloss/fit.hpp"
#include "lockloss/models.hpp"
#include "lockloss/parallel.hpp"
#include "lockloss/path.hpp"
#include "lockloss/rng.hpp"

namespace lockloss {

/// Error trajectory r(.) and the control u(.) that realises it through
/// r' = A r + B u. Both paths share the grid; u carries all N components.
struct Trajectory {
  Path r;
  Path u;
};

struct TrajectoryFamily {
  int order = 1;
  double epsilon = 1.0;
  std::vector<Trajectory> members;

  std::size_t size() const { return members.size(); }
};

/// Max-norm of the trapezoidal defect of r' = A r + B u on the grid.
inline double constraint_residual(const Trajectory& tr, const Matrix& A, const Matrix& B) {
  const Path& r = tr.r;
  const Path& u = tr.u;
  if (!r.same_grid(u) || r.dim() != u.dim() || A.rows != r.dim()) {
    throw std::invalid_argument("constraint_residual: mismatched shapes");
  }
  const std::size_t n = r.dim();
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double rhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        rhs += 0.5 * A(i, j) * (r(k, j) + r(k + 1, j)) + 0.5 * B(i, j) * (u(k, j) + u(k + 1, j));
      }
      worst = std::max(worst, std::abs((r(k + 1, i) - r(k, i)) / r.dt() - rhs));
    }
  }
  return worst;
}

/// Rebuilds r from u by trapezoidal integration of r' = A r + B u, r(t0) = 0,
/// so the pair satisfies the discrete constraint to rounding.
inline Trajectory project_trajectory(int order, Path u) {
  const PhaseSystem sys = build_system(order, 1.0);
  if (u.dim() != sys.dim()) throw std::invalid_argument("project_trajectory: control dimension mismatch");
  Path r(u.t0(), u.dt(), u.dim(), u.size());
  const double h = u.dt();
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    if (order == 1) {
      r(k + 1, 0) = r(k, 0) + 0.5 * h * (u(k, 0) + u(k + 1, 0));
    } else {
      r(k + 1, 1) = r(k, 1) + 0.5 * h * (u(k, 1) + u(k + 1, 1));
      r(k + 1, 0) = r(k, 0) + 0.5 * h * (r(k, 1) + r(k + 1, 1));
    }
  }
  return {std::move(r), std::move(u)};
}

inline Trajectory null_trajectory(int order, double t0, double dt, std::size_t samples) {
  const std::size_t n = static_cast<std::size_t>(order);
  return {Path(t0, dt, n, samples), Path(t0, dt, n, samples)};
}

/// Slip bump r(t) = 2 pi n s((t - start)/width). Order 1 uses the C1
/// smoothstep 3x^2 - 2x^3; order 2 uses the C2 step 10x^3 - 15x^4 + 6x^5 so
/// that u = r'' is continuous. The control comes from the analytic
/// derivative and r is then re-integrated from it.
inline Trajectory bump_trajectory(int order, double t0, double dt, std::size_t samples, double start, double width,
                                  int n = 1) {
  if (!(width > 0.0)) throw std::invalid_argument("bump_trajectory: width must be positive");
  if (order != 1 && order != 2) throw std::invalid_argument("bump_trajectory: order must be 1 or 2");
  const double amp = 2.0 * std::numbers::pi * n;
  Path u(t0, dt, static_cast<std::size_t>(order), samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = (u.time(k) - start) / width;
    if (x <= 0.0 || x >= 1.0) continue;
    if (order == 1) {
      u(k, 0) = amp * 6.0 * x * (1.0 - x) / width;
    } else {
      u(k, 1) = amp * 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (width * width);
    }
  }
  return project_trajectory(order, std::move(u));
}

namespace detail {

template <class F>
double trapezoid(std::size_t samples, double dt, F&& f) {
  if (samples < 2) return 0.0;
  double s = 0.5 * (f(std::size_t{0}) + f(samples - 1));
  for (std::size_t k = 1; k + 1 < samples; ++k) s += f(k);
  return s * dt;
}

inline double control_dot(const Path& a, const Path& b, std::size_t k) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.dim(); ++c) s += a(k, c) * b(k, c);
  return s;
}

}  // namespace detail

/// m = int [4 sin^2(r/2) + |u|^2] dt (trapezoidal).
inline double action_m(const Path& r, const Path& u) {
  if (!r.same_grid(u)) throw std::invalid_argument("action_m: r and u must share the grid");
  return detail::trapezoid(r.size(), r.dt(), [&](std::size_t k) {
    const double s = std::sin(0.5 * r(k, 0));
    return 4.0 * s * s + detail::control_dot(u, u, k);
  });
}

/// sigma_ij = 4 eps [ int u_i.u_j dt + int (1 + cos(r_i - r_j) - cos r_i - cos r_j) dt ].
inline double cov_sigma(const Path& ri, const Path& ui, const Path& rj, const Path& uj, double epsilon) {
  if (!ri.same_grid(ui) || !ri.same_grid(rj) || !ri.same_grid(uj) || ui.dim() != uj.dim()) {
    throw std::invalid_argument("cov_sigma: paths must share the grid");
  }
  const double integral = detail::trapezoid(ri.size(), ri.dt(), [&](std::size_t k) {
    const double a = ri(k, 0);
    const double b = rj(k, 0);
    // 1 + cos(a - b) - cos a - cos b, written so that it vanishes exactly when either phase is 0
    const double sa = std::sin(0.5 * a);
    const double sb = std::sin(0.5 * b);
    return detail::control_dot(ui, uj, k) + 4.0 * sa * sa * sb * sb + std::sin(a) * std::sin(b);
  });
  return 4.0 * epsilon * integral;
}

/// Mean vector and covariance of the Gaussian vector (dJ[r_1], ..., dJ[r_N]).
struct CostStats {
  double epsilon = 1.0;
  std::vector<double> means;
  Eigen::MatrixXd cov;

  std::size_t size() const { return means.size(); }

  CostStats scaled_to(double new_epsilon) const {
    if (!(new_epsilon > 0.0)) throw std::invalid_argument("CostStats::scaled_to: epsilon must be positive");
    CostStats s = *this;
    s.cov *= new_epsilon / epsilon;
    s.epsilon = new_epsilon;
    return s;
  }
};

inline CostStats compute_cost_stats(const TrajectoryFamily& family) {
  const std::size_t n = family.size();
  CostStats s;
  s.epsilon = family.epsilon;
  s.means.resize(n);
  s.cov.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = family.members[i];
    s.means[i] = action_m(a.r, a.u);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto& b = family.members[j];
      const double v = i == j ? 4.0 * family.epsilon * s.means[i] : cov_sigma(a.r, a.u, b.r, b.u, family.epsilon);
      s.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      s.cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return s;
}

/// Joint draws of dJ from actual signal / measurement / process noise paths:
///
///   dJ_i = m_i + sqrt(4 eps) sum_k { [sin x - sin(x + r_i)] dv1 + [cos x - cos(x + r_i)] dv2 + u_i . dw }
///
/// evaluated at the left end of each step (Ito). The v and w increments are
/// shared by all members of the family within one draw.
class DeltaJSampler {
 public:
  DeltaJSampler(const TrajectoryFamily& family, const Path& signal)
      : n_members_(family.size()), epsilon_(family.epsilon), signal_(&signal) {
    if (n_members_ == 0) throw std::invalid_argument("DeltaJSampler: empty family");
    const Path& r0 = family.members.front().r;
    if (!r0.same_grid(signal)) throw std::invalid_argument("DeltaJSampler: family and signal must share the grid");
    samples_ = r0.size();
    control_dim_ = family.members.front().u.dim();
    dt_ = r0.dt();
    omc_.resize(n_members_ * samples_);
    sin_r_.resize(n_members_ * samples_);
    u_.resize(n_members_ * samples_ * control_dim_);
    for (std::size_t i = 0; i < n_members_; ++i) {
      const auto& m = family.members[i];
      if (!m.r.same_grid(signal) || !m.u.same_grid(signal) || m.u.dim() != control_dim_) {
        throw std::invalid_argument("DeltaJSampler: family and signal must share the grid");
      }
      means_.push_back(action_m(m.r, m.u));
      for (std::size_t k = 0; k < samples_; ++k) {
        omc_[i * samples_ + k] = 1.0 - std::cos(m.r(k, 0));
        sin_r_[i * samples_ + k] = std::sin(m.r(k, 0));
        for (std::size_t c = 0; c < control_dim_; ++c) u_[(i * samples_ + k) * control_dim_ + c] = m.u(k, c);
      }
    }
    sin_x_.resize(samples_);
    cos_x_.resize(samples_);
    for (std::size_t k = 0; k < samples_; ++k) {
      sin_x_[k] = std::sin(signal(k, 0));
      cos_x_[k] = std::cos(signal(k, 0));
    }
  }

  std::size_t size() const { return n_members_; }
  const std::vector<double>& means() const { return means_; }

  void draw(NoiseStream v_stream, NoiseStream w_stream, std::span<double> out) const {
    if (out.size() != n_members_) throw std::invalid_argument("DeltaJSampler::draw: output size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    GaussianSource v(v_stream);
    GaussianSource w(w_stream);
    const double sq = std::sqrt(dt_);
    double dw[kMaxComponents];
    for (std::size_t k = 0; k + 1 < samples_; ++k) {
      const double dv1 = sq * v.normal();
      const double dv2 = sq * v.normal();
      for (std::size_t c = 0; c < control_dim_; ++c) dw[c] = sq * w.normal();
      const double sx = sin_x_[k];
      const double cx = cos_x_[k];
      for (std::size_t i = 0; i < n_members_; ++i) {
        const std::size_t ik = i * samples_ + k;
        // sin x - sin(x + r) = sin x (1 - cos r) - cos x sin r, likewise for cos
        const double ds = sx * omc_[ik] - cx * sin_r_[ik];
        const double dc = cx * omc_[ik] + sx * sin_r_[ik];
        double acc = ds * dv1 + dc * dv2;
        for (std::size_t c = 0; c < control_dim_; ++c) acc += u_[ik * control_dim_ + c] * dw[c];
        out[i] += acc;
      }
    }
    const double amp = std::sqrt(4.0 * epsilon_);
    for (std::size_t i = 0; i < n_members_; ++i) out[i] = means_[i] + amp * out[i];
  }

 private:
  static constexpr std::size_t kMaxComponents = 2;
  std::size_t n_members_;
  double epsilon_;
  const Path* signal_;
  std::size_t samples_ = 0;
  std::size_t control_dim_ = 1;
  double dt_ = 0.0;
  std::vector<double> means_;
  std::vector<double> omc_, sin_r_, u_, sin_x_, cos_x_;
};

inline std::vector<double> sample_delta_j(const TrajectoryFamily& family, const Path& signal, NoiseStream v_stream,
                                          NoiseStream w_stream) {
  DeltaJSampler sampler(family, signal);
  std::vector<double> out(sampler.size());
  sampler.draw(v_stream, w_stream, out);
  return out;
}

/// `draws` x N_T matrix of joint dJ draws; draw d uses the v/w substreams of
/// NoiseStream{master_seed, first_stream + d}.
inline Eigen::MatrixXd sample_delta_j_batch(const TrajectoryFamily& family, const Path& signal,
                                            std::uint64_t master_seed, std::size_t draws,
                                            std::uint64_t first_stream = 0, unsigned workers = 0) {
  const DeltaJSampler sampler(family, signal);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(sampler.size()));
  std::vector<std::vector<double>> rows(draws);
  parallel_for(draws, workers, [&](std::size_t d) {
    const NoiseStream base{master_seed, first_stream + d};
    rows[d].resize(sampler.size());
    sampler.draw(base.substream(1), base.substream(2), rows[d]);
  });
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t i = 0; i < sampler.size(); ++i) {
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = rows[d][i];
    }
  }
  return out;
}

/// Draws from N(means, cov) through the symmetric square root of cov, with
/// negative eigenvalues clipped to zero.
class GaussianVectorSampler {
 public:
  explicit GaussianVectorSampler(const CostStats& stats)
      : mean_(Eigen::Map<const Eigen::VectorXd>(stats.means.data(), static_cast<Eigen::Index>(stats.size()))) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("GaussianVectorSampler: eigendecomposition failed");
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    z_.resize(mean_.size());
  }

  const Eigen::VectorXd& draw(GaussianSource& rng) {
    for (Eigen::Index i = 0; i < z_.size(); ++i) z_(i) = rng.normal();
    out_ = mean_ + factor_ * z_;
    return out_;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd z_, out_;
};

/// Empirical probability that each member attains the minimum of the joint
/// Gaussian dJ vector (ties to the lowest index). Requires a null member
/// (mean 0, variance 0). Draws are split in fixed chunks on substreams, so
/// the result does not depend on the worker count.
inline std::vector<double> argmin_frequencies(const CostStats& stats, std::size_t draws, NoiseStream stream,
                                              unsigned workers = 0) {
  if (draws < 1) throw std::invalid_argument("argmin_frequencies: draws must be >= 1");
  const std::size_t n = stats.size();
  bool has_null = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (stats.means[i] == 0.0 && stats.cov(ii, ii) == 0.0) has_null = true;
  }
  if (!has_null) throw std::invalid_argument("argmin_frequencies: family must include the null trajectory");

  constexpr std::size_t kChunk = 8192;
  const std::size_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<std::vector<std::size_t>> counts(chunks, std::vector<std::size_t>(n, 0));
  parallel_for(chunks, workers, [&](std::size_t c) {
    GaussianVectorSampler sampler(stats);
    GaussianSource rng(stream.substream(c));
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(draws, begin + kChunk);
    for (std::size_t d = begin; d < end; ++d) {
      const Eigen::VectorXd& x = sampler.draw(rng);
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < x.size(); ++i) {
        if (x(i) < x(best)) best = i;
      }
      ++counts[c][static_cast<std::size_t>(best)];
    }
  });
  std::vector<double> freq(n, 0.0);
  for (const auto& chunk : counts) {
    for (std::size_t i = 0; i < n; ++i) freq[i] += static_cast<double>(chunk[i]);
  }
  for (double& f : freq) f /= static_cast<double>(draws);
  return freq;
}

/// Large-deviation exponent of member k winning the argmin:
///   lim eps ln P(argmin = k) = -d^2 / 2,
/// with d the distance from the origin to the Voronoi cell of phi_k, where
/// dJ_i = |phi_i|^2 + 2 sqrt(eps) <phi_i, W> and <phi_i, phi_j> = sigma_ij / (4 eps).
/// The cell constraints are 2 <z, phi_j - phi_k> <= |phi_j|^2 - |phi_k|^2; the
/// dual QP over the Gram matrix is solved by Hildreth coordinate ascent.
/// Lies in [m_k/8, m_k/2] whenever the null member is present.
inline double argmin_cell_exponent(const CostStats& stats, std::size_t k, int sweeps = 20000) {
  const std::size_t n = stats.size();
  if (k >= n) throw std::invalid_argument("argmin_cell_exponent: member index out of range");
  const Eigen::MatrixXd G = stats.cov / (4.0 * stats.epsilon);
  const auto kk = static_cast<Eigen::Index>(k);
  std::vector<Eigen::Index> idx;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != k) idx.push_back(static_cast<Eigen::Index>(j));
  }
  const auto c = static_cast<Eigen::Index>(idx.size());
  // K_il = <a_i, a_l>, a_i = 2 (phi_i - phi_k); b_i = |phi_i|^2 - |phi_k|^2
  Eigen::MatrixXd K(c, c);
  Eigen::VectorXd b(c);
  for (Eigen::Index i = 0; i < c; ++i) {
    const Eigen::Index a = idx[static_cast<std::size_t>(i)];
    b(i) = G(a, a) - G(kk, kk);
    for (Eigen::Index l = 0; l < c; ++l) {
      const Eigen::Index d = idx[static_cast<std::size_t>(l)];
      K(i, l) = 4.0 * (G(a, d) - G(a, kk) - G(kk, d) + G(kk, kk));
    }
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(c);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(c);  // K lambda
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
      if (!(K(i, i) > 1e-14 * (1.0 + G(kk, kk)))) continue;  // duplicate of phi_k
      const double next = std::max(0.0, lambda(i) - (s(i) + b(i)) / K(i, i));
      const double delta = next - lambda(i);
      if (delta != 0.0) {
        s += delta * K.col(i);
        lambda(i) = next;
        change = std::max(change, std::abs(delta) * std::sqrt(K(i, i)));
      }
    }
    if (change < 1e-13 * (1.0 + std::sqrt(G(kk, kk)))) break;
  }
  // |z|^2 = lambda^T K lambda, exponent d^2 / 2
  return 0.5 * lambda.dot(s);
}

inline std::vector<double> argmin_frequencies(const TrajectoryFamily& family, std::size_t draws, NoiseStream stream,
                                              unsigned workers = 0) {
  return argmin_frequencies(compute_cost_stats(family), draws, stream, workers);
}

/// Decay exponent of an argmin frequency: weighted fit of -ln(freq) on 1/eps
/// with binomial weights draws * f / (1 - f).
inline LineFit fit_argmin_exponent(std::span<const double> inv_epsilon, std::span<const double> freq,
                                   std::size_t draws) {
  std::vector<double> y, w;
  for (double f : freq) {
    if (!(f > 0.0) || !(f < 1.0)) throw std::invalid_argument("fit_argmin_exponent: frequencies must be in (0, 1)");
    y.push_back(-std::log(f));
    w.push_back(static_cast<double>(draws) * f / (1.0 - f));
  }
  return weighted_line_fit(inv_epsilon, y, w);
}

}  // namespace lockloss
