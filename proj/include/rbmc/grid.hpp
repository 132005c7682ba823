#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rbmc/core.hpp"

namespace rbmc {

// line:     nodes on [lo, hi], measure dx
// radial3d: radii on [lo, hi] standing for a spherically symmetric density
//           in R^3, measure 4 pi r^2 dr
enum class GridGeometry { line, radial3d };

class Grid {
 public:
  Grid() = default;
  Grid(double lo, double hi, std::size_t nodes,
       GridGeometry geometry = GridGeometry::line)
      : lo_(lo), hi_(hi), n_(nodes), geometry_(geometry) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
            "Grid: need finite lo < hi");
    require(nodes >= 3, "Grid: at least 3 nodes");
    if (geometry == GridGeometry::radial3d)
      require(lo >= 0.0, "Grid: radial grid needs lo >= 0");
    dx_ = (hi - lo) / static_cast<double>(nodes - 1);
    weights_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double w = (i == 0 || i + 1 == n_) ? 0.5 * dx_ : dx_;
      weights_[i] = w * geometric_factor(node(i));
    }
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return n_; }
  double dx() const { return dx_; }
  GridGeometry geometry() const { return geometry_; }
  double node(std::size_t i) const {
    return i + 1 == n_ ? hi_ : lo_ + dx_ * static_cast<double>(i);
  }
  std::vector<double> nodes() const {
    std::vector<double> x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = node(i);
    return x;
  }
  // Trapezoid weights including the 4 pi r^2 factor on radial grids.
  const std::vector<double>& weights() const { return weights_; }

  double geometric_factor(double x) const {
    return geometry_ == GridGeometry::radial3d ? 4.0 * pi * x * x : 1.0;
  }

  double integrate(std::span<const double> f) const {
    require(f.size() == n_, "Grid::integrate: size mismatch");
    CompensatedSum s;
    for (std::size_t i = 0; i < n_; ++i) s += weights_[i] * f[i];
    return s.value();
  }

  template <class F>
  std::vector<double> sample(F&& f) const {
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = f(node(i));
    return v;
  }

  // Same interval with nodes - 1 intervals halved.
  Grid refined() const { return Grid(lo_, hi_, 2 * n_ - 1, geometry_); }

  std::string describe() const {
    return std::string(geometry_ == GridGeometry::line ? "line" : "radial3d") +
           "[" + std::to_string(lo_) + "," + std::to_string(hi_) + "]x" +
           std::to_string(n_);
  }

 private:
  double lo_ = 0.0, hi_ = 1.0;
  std::size_t n_ = 0;
  double dx_ = 0.0;
  GridGeometry geometry_ = GridGeometry::line;
  std::vector<double> weights_;
};

// Probability density tabulated at grid nodes, piecewise linear in between.
class GridDensity {
 public:
  GridDensity() = default;
  GridDensity(Grid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    require(values_.size() == grid_.size(), "GridDensity: size mismatch");
    for (double v : values_)
      if (!std::isfinite(v) || v < 0.0)
        throw NumericError("GridDensity: values must be finite and >= 0");
  }

  // Normalize(values) so that the quadrature integral is 1.
  static GridDensity normalized(Grid grid, std::vector<double> values) {
    GridDensity d(std::move(grid), std::move(values));
    d.normalize();
    return d;
  }

  // Normalize(exp(-beta * phi)), shifted by min(phi) against overflow.
  static GridDensity boltzmann(const Grid& grid, std::span<const double> phi,
                               double beta) {
    require(beta > 0.0, "boltzmann: beta must be positive");
    require(phi.size() == grid.size(), "boltzmann: size mismatch");
    const double m = *std::min_element(phi.begin(), phi.end());
    std::vector<double> v(phi.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(phi[i]))
        throw NumericError("boltzmann: non-finite potential on grid");
      v[i] = std::exp(-beta * (phi[i] - m));
    }
    return normalized(grid, std::move(v));
  }

  void normalize() {
    const double z = grid_.integrate(values_);
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("GridDensity: normalization constant is not finite");
    for (double& v : values_) v /= z;
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double integral() const { return grid_.integrate(values_); }

  // Linear interpolation; zero outside the grid.
  double at(double x) const {
    if (x < grid_.lo() || x > grid_.hi()) return 0.0;
    const double t = (x - grid_.lo()) / grid_.dx();
    std::size_t i = static_cast<std::size_t>(t);
    if (i >= grid_.size() - 1) i = grid_.size() - 2;
    const double f = t - static_cast<double>(i);
    return (1.0 - f) * values_[i] + f * values_[i + 1];
  }

  template <class F>
  double expectation(F&& f) const {
    CompensatedSum s;
    const auto& w = grid_.weights();
    for (std::size_t i = 0; i < size(); ++i)
      s += w[i] * values_[i] * f(grid_.node(i));
    return s.value();
  }

  // Probability of [a, b] under the piecewise-linear mass density
  // g = rho * geometric factor interpolated between nodes. Summed over all
  // cells this reproduces the trapezoid integral exactly.
  double mass(double a, double b) const {
    a = std::max(a, grid_.lo());
    b = std::min(b, grid_.hi());
    if (!(b > a)) return 0.0;
    const double dx = grid_.dx();
    std::size_t ia = static_cast<std::size_t>((a - grid_.lo()) / dx);
    ia = std::min(ia, grid_.size() - 2);
    CompensatedSum s;
    for (std::size_t i = ia; i + 1 < grid_.size(); ++i) {
      const double x0 = grid_.node(i), x1 = grid_.node(i + 1);
      if (x0 >= b) break;
      const double l = std::max(a, x0), r = std::min(b, x1);
      if (r <= l) continue;
      const double g0 = mass_density(i), g1 = mass_density(i + 1);
      auto g = [&](double x) { return g0 + (g1 - g0) * (x - x0) / (x1 - x0); };
      s += 0.5 * (g(l) + g(r)) * (r - l);
    }
    return s.value();
  }

  double mass_density(std::size_t i) const {
    return values_[i] * grid_.geometric_factor(grid_.node(i));
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

// i.i.d. draws from a GridDensity's piecewise-linear mass density: pick a
// cell by its trapezoid mass, then invert the linear CDF inside the cell.
class GridDensitySampler {
 public:
  explicit GridDensitySampler(const GridDensity& rho) : rho_(rho) {
    const std::size_t n = rho.size();
    cdf_.resize(n);
    cdf_[0] = 0.0;
    const double dx = rho.grid().dx();
    for (std::size_t i = 0; i + 1 < n; ++i)
      cdf_[i + 1] = cdf_[i] + 0.5 * dx *
                                   (rho.mass_density(i) + rho.mass_density(i + 1));
    total_ = cdf_.back();
    if (!(total_ > 0.0)) throw EmptyMeasureError("GridDensitySampler: no mass");
  }

  template <class Rng>
  double operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng) * total_;
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    i = std::clamp<std::size_t>(i, 1, cdf_.size() - 1) - 1;
    const Grid& g = rho_.grid();
    const double dx = g.dx();
    const double g0 = rho_.mass_density(i), g1 = rho_.mass_density(i + 1);
    const double target = u - cdf_[i];  // mass to cover inside the cell
    // Solve g0 t + (g1 - g0) t^2 / (2 dx) = target for t in [0, dx].
    const double a = 0.5 * (g1 - g0) / dx;
    double t;
    if (std::abs(a) * dx < 1e-12 * std::max(g0, g1)) {
      t = g0 > 0.0 ? target / g0 : 0.5 * dx;
    } else {
      const double disc = std::max(0.0, g0 * g0 + 4.0 * a * target);
      t = 2.0 * target / (g0 + std::sqrt(disc));
    }
    return g.node(i) + std::clamp(t, 0.0, dx);
  }

 private:
  GridDensity rho_;
  std::vector<double> cdf_;
  double total_ = 0.0;
};

}  // namespace rbmc
