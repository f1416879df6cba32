#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace lockloss {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Weighted least squares y ~ intercept + slope x, weights 1/var(y).
inline LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size()) throw std::invalid_argument("weighted_line_fit: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("weighted_line_fit: need at least two points");
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("weighted_line_fit: weights must be positive and values finite");
    }
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw std::invalid_argument("weighted_line_fit: degenerate abscissae");
  LineFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  f.slope_stderr = std::sqrt(sw / det);
  return f;
}

}  // namespace lockloss
