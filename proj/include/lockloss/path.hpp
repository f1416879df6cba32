#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lockloss/csv.hpp"

namespace lockloss {

/// Uniformly sampled vector-valued trajectory: sample k sits at t0 + k*dt.
class Path {
 public:
  Path() = default;
  Path(double t0, double dt, std::size_t dim, std::size_t samples)
      : t0_(t0), dt_(dt), dim_(dim), data_(dim * samples, 0.0) {
    if (!(dt > 0.0)) throw std::invalid_argument("Path: dt must be positive");
    if (dim == 0) throw std::invalid_argument("Path: dimension must be positive");
  }

  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt_; }
  /// (M - 1) dt.
  double duration() const { return size() == 0 ? 0.0 : static_cast<double>(size() - 1) * dt_; }

  double operator()(std::size_t k, std::size_t c = 0) const { return data_[k * dim_ + c]; }
  double& operator()(std::size_t k, std::size_t c = 0) { return data_[k * dim_ + c]; }

  std::span<const double> row(std::size_t k) const { return {data_.data() + k * dim_, dim_}; }
  std::span<double> row(std::size_t k) { return {data_.data() + k * dim_, dim_}; }

  std::vector<double> component(std::size_t c) const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (*this)(k, c);
    return out;
  }

  const std::vector<double>& values() const { return data_; }

  void push_back(std::span<const double> state) {
    if (state.size() != dim_) throw std::invalid_argument("Path::push_back: dimension mismatch");
    data_.insert(data_.end(), state.begin(), state.end());
  }

  void resize(std::size_t samples) { data_.resize(samples * dim_, 0.0); }

  bool same_grid(const Path& o) const {
    return size() == o.size() && dt_ == o.dt_ && t0_ == o.t0_;
  }

  void validate() const {
    if (!(dt_ > 0.0) || dim_ == 0) throw std::invalid_argument("Path: invalid grid");
    for (double v : data_) {
      if (!std::isfinite(v)) throw std::invalid_argument("Path: non-finite sample");
    }
  }

  bool operator==(const Path&) const = default;

 private:
  double t0_ = 0.0;
  double dt_ = 1.0;
  std::size_t dim_ = 1;
  std::vector<double> data_;
};

/// Header `t,comp0[,comp1,...]` unless column names are given.
inline void write_csv(std::ostream& os, const Path& p, std::vector<std::string> columns = {}) {
  if (columns.empty()) {
    for (std::size_t c = 0; c < p.dim(); ++c) columns.push_back("comp" + std::to_string(c));
  }
  if (columns.size() != p.dim()) throw std::invalid_argument("write_csv: column count mismatch");
  os << 't';
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (std::size_t k = 0; k < p.size(); ++k) {
    os << format_double(p.time(k));
    for (std::size_t c = 0; c < p.dim(); ++c) os << ',' << format_double(p(k, c));
    os << '\n';
  }
}

}  // namespace lockloss
