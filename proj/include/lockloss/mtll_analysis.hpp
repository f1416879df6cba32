#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lockloss/csv.hpp"
#include "lockloss/models.hpp"

namespace lockloss {

enum class Estimator { smoother, ekf };
enum class ExponentSource { analytic, collocation, eikonal, monte_carlo };

inline std::string to_string(Estimator e) { return e == Estimator::smoother ? "smoother" : "ekf"; }

inline std::string to_string(ExponentSource s) {
  switch (s) {
    case ExponentSource::analytic: return "analytic";
    case ExponentSource::collocation: return "collocation";
    case ExponentSource::eikonal: return "eikonal";
    case ExponentSource::monte_carlo: return "monte-carlo";
  }
  return "unknown";
}

/// lim eps ln tau for one estimator of one system.
struct ExponentRecord {
  Estimator estimator = Estimator::smoother;
  int order = 1;
  double exponent = 0.0;
  ExponentSource source = ExponentSource::analytic;
};

/// Smoother 8 / EKF 2 (order 1), smoother 5 / EKF 0.85 (order 2).
inline std::vector<ExponentRecord> reference_exponents() {
  return {{Estimator::smoother, 1, 8.0, ExponentSource::analytic},
          {Estimator::ekf, 1, 2.0, ExponentSource::analytic},
          {Estimator::smoother, 2, 5.0, ExponentSource::collocation},
          {Estimator::ekf, 2, 0.85, ExponentSource::eikonal}};
}

struct CurvePoint {
  double epsilon = 0.0;
  double inv_epsilon = 0.0;
  double ln_tau = 0.0;  // unit pre-exponential factor
};

inline std::vector<CurvePoint> mtll_curve(const ExponentRecord& rec, std::span<const double> epsilons) {
  std::vector<CurvePoint> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw std::invalid_argument("mtll_curve: epsilon must be positive");
    out.push_back({eps, 1.0 / eps, rec.exponent / eps});
  }
  return out;
}

/// Smoother-vs-EKF CNR gap in dB: 20 log10(ratio) for order 1 (eps ~ rho),
/// 40/3 log10(ratio) for order 2 (eps ~ rho^{3/2}).
inline double cnr_gap(int order, double exp_nc, double exp_c) {
  if (!(exp_nc > 0.0) || !(exp_c > 0.0)) throw std::invalid_argument("cnr_gap: exponents must be positive");
  const double lr = std::log10(exp_nc / exp_c);
  if (order == 1) return 10.0 * 2.0 * lr;
  if (order == 2) return 40.0 / 3.0 * lr;
  throw std::invalid_argument("cnr_gap: order must be 1 or 2");
}

/// The same gap from the epsilon(rho) law: CNR ~ rho^{-2} = eps^{-2/k}.
inline double cnr_gap_from_scaling(int order, double exp_nc, double exp_c) {
  const double k = epsilon_exponent(order);
  return 10.0 * (2.0 / k) * std::log10(exp_nc / exp_c);
}

struct CnrPoint {
  double cnr_db = 0.0;
  double epsilon = 0.0;
  double ln_tau = 0.0;
};

inline std::vector<CnrPoint> mtll_vs_cnr(const ExponentRecord& rec, std::span<const double> cnr_db_grid) {
  std::vector<CnrPoint> out;
  out.reserve(cnr_db_grid.size());
  for (double db : cnr_db_grid) {
    const NoiseScale s = scale_convert(rec.order, ScaleQuantity::cnr_db, db);
    out.push_back({db, s.epsilon, rec.exponent / s.epsilon});
  }
  return out;
}

/// CNR (dB) at which an estimator reaches the given ln tau.
inline double cnr_db_at_ln_tau(const ExponentRecord& rec, double ln_tau) {
  if (!(ln_tau > 0.0) || !(rec.exponent > 0.0)) throw std::invalid_argument("cnr_db_at_ln_tau: need positive values");
  return scale_convert(rec.order, ScaleQuantity::epsilon, rec.exponent / ln_tau).cnr_db;
}

/// Horizontal distance between two MTLL-vs-CNR curves at equal ln tau.
inline double cnr_offset_at_equal_ln_tau(const ExponentRecord& better, const ExponentRecord& worse, double ln_tau) {
  if (better.order != worse.order) throw std::invalid_argument("cnr_offset_at_equal_ln_tau: orders differ");
  return cnr_db_at_ln_tau(worse, ln_tau) - cnr_db_at_ln_tau(better, ln_tau);
}

struct FigureRow {
  double x = 0.0;
  double ln_tau = 0.0;
  Estimator estimator = Estimator::smoother;
  int order = 1;
};

/// ln tau against 1/eps for every record of the given order.
inline std::vector<FigureRow> figure_vs_inverse_epsilon(std::span<const ExponentRecord> records, int order,
                                                        std::span<const double> epsilons) {
  std::vector<FigureRow> rows;
  for (const auto& r : records) {
    if (r.order != order) continue;
    for (const auto& p : mtll_curve(r, epsilons)) rows.push_back({p.inv_epsilon, p.ln_tau, r.estimator, order});
  }
  return rows;
}

/// ln tau against CNR (dB) for every record of the given order.
inline std::vector<FigureRow> figure_vs_cnr(std::span<const ExponentRecord> records, int order,
                                            std::span<const double> cnr_db_grid) {
  std::vector<FigureRow> rows;
  for (const auto& r : records) {
    if (r.order != order) continue;
    for (const auto& p : mtll_vs_cnr(r, cnr_db_grid)) rows.push_back({p.cnr_db, p.ln_tau, r.estimator, order});
  }
  return rows;
}

/// CSV `x,ln_tau,estimator,order`. The pre-exponential factor is set to 1.
inline void write_figure_csv(std::ostream& os, std::span<const FigureRow> rows) {
  CsvWriter w(os, {"x", "ln_tau", "estimator", "order"});
  for (const auto& r : rows) w.row(r.x, r.ln_tau, to_string(r.estimator), r.order);
}

}  // namespace lockloss
