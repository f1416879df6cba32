#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lockloss {

/// Small dense row-major matrix. Dimensions here never exceed 2x2.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
      throw std::invalid_argument("Matrix: value count does not match shape");
    }
  }
  static Matrix zeros(std::size_t r, std::size_t c) { return {r, c, std::vector<double>(r * c, 0.0)}; }

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

/// Scaled phase-tracking model  x' = A x + sqrt(eps) B w'  with measurements
/// y = h(x) + sqrt(eps) v',  h(x) = (sin x, cos x).
struct PhaseSystem {
  int order = 1;
  Matrix A;
  Matrix B;
  double epsilon = 1.0;
  std::string label;

  std::size_t dim() const { return A.rows; }
};

inline PhaseSystem build_system(int order, double epsilon) {
  if (order != 1 && order != 2) {
    throw std::invalid_argument("build_system: order must be 1 or 2, got " + std::to_string(order));
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("build_system: epsilon must be positive and finite");
  }
  PhaseSystem s;
  s.order = order;
  s.epsilon = epsilon;
  if (order == 1) {
    s.A = Matrix(1, 1, {0.0});
    s.B = Matrix(1, 1, {1.0});
    s.label = "first-order (Brownian phase)";
  } else {
    s.A = Matrix(2, 2, {0.0, 1.0, 0.0, 0.0});
    s.B = Matrix(2, 2, {0.0, 0.0, 0.0, 1.0});
    s.label = "second-order (integrated Brownian phase)";
  }
  return s;
}

/// Measurement nonlinearity h(x) = (sin x, cos x).
inline std::pair<double, double> measurement(double x) { return {std::sin(x), std::cos(x)}; }

enum class ScaleQuantity { epsilon, rho, cnr_db };

struct NoiseScale {
  double epsilon = 0.0;
  double rho = 0.0;
  double cnr = 0.0;     // linear
  double cnr_db = 0.0;  // 10 log10(cnr)
};

// epsilon = rho for order 1, rho^{3/2} for order 2; CNR = rho^{-2}/2 for both.
inline double epsilon_exponent(int order) {
  if (order == 1) return 1.0;
  if (order == 2) return 1.5;
  throw std::invalid_argument("epsilon_exponent: order must be 1 or 2");
}

inline NoiseScale scale_convert(int order, ScaleQuantity given, double value) {
  const double k = epsilon_exponent(order);
  if (!std::isfinite(value)) {
    throw std::invalid_argument("scale_convert: value must be finite");
  }
  NoiseScale s;
  switch (given) {
    case ScaleQuantity::epsilon:
      if (!(value > 0.0)) throw std::invalid_argument("scale_convert: epsilon must be positive");
      s.epsilon = value;
      s.rho = std::pow(value, 1.0 / k);
      break;
    case ScaleQuantity::rho:
      if (!(value > 0.0)) throw std::invalid_argument("scale_convert: rho must be positive");
      s.rho = value;
      s.epsilon = std::pow(value, k);
      break;
    case ScaleQuantity::cnr_db: {
      const double cnr = std::pow(10.0, value / 10.0);
      s.rho = std::sqrt(0.5 / cnr);
      s.epsilon = std::pow(s.rho, k);
      break;
    }
  }
  s.cnr = 0.5 / (s.rho * s.rho);
  s.cnr_db = 10.0 * std::log10(s.cnr);
  if (given == ScaleQuantity::cnr_db) s.cnr_db = value;
  return s;
}

}  // namespace lockloss
