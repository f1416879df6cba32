#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>

namespace lockloss {

struct NewtonOptions {
  int max_iterations = 5000;
  /// Converged when max|grad| <= gradient_tolerance * (1 + |f|).
  double gradient_tolerance = 1e-8;
  double armijo = 1e-4;
};

struct NewtonReport {
  Eigen::VectorXd x;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton iteration with a Levenberg shift whenever the sparse Hessian
/// is not positive definite, plus Armijo backtracking.
///
/// Objective needs value(x), gradient(x, g) and hessian(x) -> SparseMatrix.
template <class Objective>
NewtonReport minimize_newton(const Objective& f, Eigen::VectorXd x, const NewtonOptions& opt = {}) {
  NewtonReport rep;
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  double fx = f.value(x);
  f.gradient(x, g);
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  Eigen::VectorXd trial(n), g_trial(n);

  for (rep.iterations = 0; rep.iterations < opt.max_iterations; ++rep.iterations) {
    rep.residual = n == 0 ? 0.0 : g.lpNorm<Eigen::Infinity>();
    if (rep.residual <= opt.gradient_tolerance * (1.0 + std::abs(fx))) {
      rep.converged = true;
      break;
    }
    const Eigen::SparseMatrix<double> H = f.hessian(x);
    double diag_scale = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::abs(H.coeff(i, i)));

    bool stepped = false;
    double shift = 0.0;
    for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
      if (attempt > 0) shift = shift == 0.0 ? 1e-10 * diag_scale : 10.0 * shift;
      llt.compute(shift == 0.0 ? H : Eigen::SparseMatrix<double>(H + shift * eye));
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd d = -llt.solve(g);
      const double slope = g.dot(d);
      if (!(slope < 0.0)) continue;
      for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
        trial = x + alpha * d;
        const double ft = f.value(trial);
        if (!std::isfinite(ft)) continue;
        if (ft <= fx + opt.armijo * alpha * slope) {
          f.gradient(trial, g_trial);
          stepped = true;
        } else if (alpha == 1.0 && ft <= fx + 1e-13 * (1.0 + std::abs(fx))) {
          // at rounding level in f: accept the full step if it reduces the gradient
          f.gradient(trial, g_trial);
          stepped = g_trial.lpNorm<Eigen::Infinity>() < rep.residual;
        }
        if (stepped) {
          x.swap(trial);
          g.swap(g_trial);
          fx = ft;
          break;
        }
      }
    }
    if (!stepped) break;
  }
  rep.residual = n == 0 ? 0.0 : g.lpNorm<Eigen::Infinity>();
  rep.converged = rep.converged || rep.residual <= opt.gradient_tolerance * (1.0 + std::abs(fx));
  rep.x = std::move(x);
  rep.value = fx;
  return rep;
}

}  // namespace lockloss
