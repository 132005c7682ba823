#pragma once

// Deterministic mean-field reference: damped Picard iteration for
//   rho_k = Z_k^{-1} exp(-beta (U_k + sum_l c_kl W_kl * rho_l))
// on a uniform grid, plus the free energy and the discrete stationary
// Fokker-Planck residual used to validate the converged densities.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "rbmc/core.hpp"
#include "rbmc/grid.hpp"
#include "rbmc/potentials.hpp"

namespace rbmc {

// Discrete convolution (W * rho)(x_i) = sum_j K_ij rho_j w_j.
//
// On a line grid K_ij = W(x_i - x_j). On a radial grid K_ij is the shell
// average of W(|x - y|) over |x| = r_i, |y| = r_j,
//   K(r, s) = 1/(2 r s) int_{|r-s|}^{r+s} W(t) t dt,
// which for 1/(4 pi eps t) is 1/(4 pi eps max(r, s)).
//
// The planar |x| kernel and the radial Coulomb kernel have O(n) prefix-sum
// evaluations; everything else is an O(n^2) direct sum.
class Convolution {
 public:
  Convolution(const PairKernel& w, const Grid& grid, bool allow_fast = true)
      : kernel_(w), grid_(grid) {
    const auto* c1 = std::get_if<profile::Coulomb1d>(&w.profile());
    const auto* c3 = std::get_if<profile::Coulomb3d>(&w.profile());
    if (grid.geometry() == GridGeometry::line) {
      if (w.singular_at_origin())
        throw SingularityError(
            "convolve_grid: kernel is singular at the origin; regularize it "
            "before convolving on a line grid");
      if (c1 && !w.has_short_range_term()) {
        kind_ = Kind::abs_line;
        slope_ = w.scale() / (2.0 * c1->epsilon);
      } else {
        kind_ = Kind::toeplitz;
        toeplitz_.resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k)
          toeplitz_[k] = w.total(grid.dx() * static_cast<double>(k));
      }
    } else {
      if (c3 && !w.has_short_range_term()) {
        require(grid.lo() > 0.0,
                "convolve_grid: radial Coulomb needs a grid away from r = 0");
        kind_ = Kind::coulomb_radial;
        slope_ = w.scale() / (4.0 * pi * c3->epsilon);
      } else {
        if (w.singular_at_origin())
          throw SingularityError(
              "convolve_grid: shell averages of this singular kernel are not "
              "supported");
        kind_ = Kind::matrix;
        build_shell_matrix();
      }
    }
    if (!allow_fast && (kind_ == Kind::abs_line ||
                        kind_ == Kind::coulomb_radial)) {
      kind_ = grid.geometry() == GridGeometry::line ? Kind::toeplitz
                                                     : Kind::matrix;
      if (kind_ == Kind::toeplitz) {
        toeplitz_.resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k)
          toeplitz_[k] = w.total(grid.dx() * static_cast<double>(k));
      } else {
        build_coulomb_matrix();
      }
    }
  }

  bool uses_fast_path() const {
    return kind_ == Kind::abs_line || kind_ == Kind::coulomb_radial;
  }
  const Grid& grid() const { return grid_; }

  std::vector<double> apply(std::span<const double> rho) const {
    const std::size_t n = grid_.size();
    require(rho.size() == n, "convolve_grid: size mismatch");
    const auto& w = grid_.weights();
    std::vector<double> m(n), out(n);
    for (std::size_t j = 0; j < n; ++j) m[j] = rho[j] * w[j];
    switch (kind_) {
      case Kind::abs_line: {
        // sum_j |x_i - x_j| m_j = x_i (L_i - R_i) - (SL_i - SR_i), split at i.
        std::vector<double> cm(n + 1, 0.0), cx(n + 1, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          cm[j + 1] = cm[j] + m[j];
          cx[j + 1] = cx[j] + m[j] * grid_.node(j);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double xi = grid_.node(i);
          const double left = xi * cm[i + 1] - cx[i + 1];
          const double right = (cx[n] - cx[i + 1]) - xi * (cm[n] - cm[i + 1]);
          out[i] = slope_ * (left + right);
        }
        break;
      }
      case Kind::coulomb_radial: {
        // (1/r_i) sum_{j <= i} m_j + sum_{j > i} m_j / r_j
        std::vector<double> inner(n + 1, 0.0), outer(n + 1, 0.0);
        for (std::size_t j = 0; j < n; ++j) inner[j + 1] = inner[j] + m[j];
        for (std::size_t j = n; j-- > 0;)
          outer[j] = outer[j + 1] + m[j] / grid_.node(j);
        for (std::size_t i = 0; i < n; ++i)
          out[i] = slope_ * (inner[i + 1] / grid_.node(i) + outer[i + 1]);
        break;
      }
      case Kind::toeplitz:
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < i; ++j) s += toeplitz_[i - j] * m[j];
          for (std::size_t j = i; j < n; ++j) s += toeplitz_[j - i] * m[j];
          out[i] = s;
        }
        break;
      case Kind::matrix:
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = &matrix_[i * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += row[j] * m[j];
          out[i] = s;
        }
        break;
    }
    return out;
  }

 private:
  enum class Kind { abs_line, coulomb_radial, toeplitz, matrix };

  void build_coulomb_matrix() {
    const std::size_t n = grid_.size();
    const double a = kernel_.scale() /
                     (4.0 * pi *
                      std::get<profile::Coulomb3d>(kernel_.profile()).epsilon);
    matrix_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        matrix_[i * n + j] = a / std::max(grid_.node(i), grid_.node(j));
  }

  void build_shell_matrix() {
    const std::size_t n = grid_.size();
    matrix_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double v = shell_average(grid_.node(i), grid_.node(j));
        matrix_[i * n + j] = matrix_[j * n + i] = v;
      }
  }

  // Composite Gauss-Legendre over [|r-s|, r+s], broken at the kernel cutoff
  // where the profile may have a kink.
  double shell_average(double r, double s) const {
    if (r == 0.0 || s == 0.0) return kernel_.total(std::max(r, s));
    const double a = std::abs(r - s), b = r + s;
    std::vector<double> cuts{a};
    double kink = kernel_.cutoff();
    if (const auto* cut = std::get_if<profile::Coulomb3dCutoff>(&kernel_.profile()))
      kink = cut->radius;
    if (kink > a && kink < b) cuts.push_back(kink);
    cuts.push_back(b);
    double total = 0.0;
    auto f = [this](double t) { return kernel_.total(t) * t; };
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const int panels = 4;
      const double h = (cuts[k + 1] - cuts[k]) / panels;
      for (int p = 0; p < panels; ++p) {
        const double lo = cuts[k] + p * h;
        total += boost::math::quadrature::gauss<double, 20>::integrate(
            f, lo, lo + h);
      }
    }
    return total / (2.0 * r * s);
  }

  PairKernel kernel_;
  Grid grid_;
  Kind kind_ = Kind::toeplitz;
  double slope_ = 0.0;
  std::vector<double> toeplitz_;
  std::vector<double> matrix_;
};

inline std::vector<double> convolve_grid(const PairKernel& w,
                                         const GridDensity& rho,
                                         bool allow_fast = true) {
  return Convolution(w, rho.grid(), allow_fast).apply(rho.values());
}

struct PicardOptions {
  double damping = 0.5;
  double tol = 1e-10;
  std::size_t max_iter = 10000;

  void validate() const {
    require(damping > 0.0 && damping <= 1.0, "picard: damping must be in (0,1]");
    require(tol > 0.0, "picard: tol must be positive");
    require(max_iter >= 1, "picard: max_iter must be >= 1");
  }
};

// Grid form of a mean-field system with K species:
//   phi_k = U_k + sum_l coupling[k][l] * (W_kl * rho_l)
struct MeanFieldProblem {
  Grid grid;
  double beta = 1.0;
  std::vector<std::vector<double>> external;  // U_k at the nodes
  std::vector<std::vector<double>> coupling;  // c_kl
  std::vector<std::vector<PairKernel>> kernels;  // W_kl

  std::size_t species() const { return external.size(); }
};

struct PicardResult {
  std::vector<GridDensity> densities;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;

  const GridDensity& density(std::size_t k = 0) const { return densities[k]; }
};

namespace detail {

inline double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

class MeanFieldMap {
 public:
  explicit MeanFieldMap(const MeanFieldProblem& p) : p_(p) {
    const std::size_t k = p.species();
    require(k >= 1, "picard: at least one species");
    require(p.beta > 0.0, "picard: beta must be positive");
    require(p.coupling.size() == k && p.kernels.size() == k,
            "picard: coupling/kernel tables must be K x K");
    for (std::size_t a = 0; a < k; ++a) {
      require(p.external[a].size() == p.grid.size(),
              "picard: external potential must be sampled on the grid");
      require(p.coupling[a].size() == k && p.kernels[a].size() == k,
              "picard: coupling/kernel tables must be K x K");
    }
    ops_.resize(k * k);
    conv_.assign(k * k, {});
    fresh_.assign(k * k, false);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        if (p.coupling[a][b] != 0.0)
          ops_[a * k + b].emplace(p.kernels[a][b], p.grid);
  }

  void invalidate(std::size_t l) {
    for (std::size_t a = 0; a < p_.species(); ++a)
      fresh_[a * p_.species() + l] = false;
  }

  std::vector<double> potential(std::size_t a,
                                const std::vector<GridDensity>& rho) {
    const std::size_t k = p_.species();
    std::vector<double> phi = p_.external[a];
    for (std::size_t b = 0; b < k; ++b) {
      const std::size_t idx = a * k + b;
      if (!ops_[idx]) continue;
      if (!fresh_[idx]) {
        conv_[idx] = ops_[idx]->apply(rho[b].values());
        fresh_[idx] = true;
      }
      for (std::size_t i = 0; i < phi.size(); ++i)
        phi[i] += p_.coupling[a][b] * conv_[idx][i];
    }
    return phi;
  }

  GridDensity image(std::size_t a, const std::vector<GridDensity>& rho) {
    const auto phi = potential(a, rho);
    return GridDensity::boltzmann(p_.grid, phi, p_.beta);
  }

 private:
  const MeanFieldProblem& p_;
  std::vector<std::optional<Convolution>> ops_;
  std::vector<std::vector<double>> conv_;
  std::vector<bool> fresh_;
};

}  // namespace detail

// Sup-norm self-consistency residual max_k |rho_k - T_k(rho)|_inf.
inline double self_consistency_residual(const MeanFieldProblem& p,
                                        const std::vector<GridDensity>& rho) {
  detail::MeanFieldMap map(p);
  double r = 0.0;
  for (std::size_t a = 0; a < p.species(); ++a) {
    const GridDensity t = map.image(a, rho);
    r = std::max(r, detail::sup_diff(rho[a].values(), t.values()));
  }
  return r;
}

// Damped Picard iteration, Gauss-Seidel across species, starting from
// Normalize(exp(-beta U_k)). Each iteration first evaluates the full residual
// at the current state; the loop stops as soon as it is <= tol, so the
// returned densities satisfy the stated bound.
inline PicardResult picard_solve(const MeanFieldProblem& p,
                                 const PicardOptions& opt = {}) {
  opt.validate();
  detail::MeanFieldMap map(p);
  const std::size_t k = p.species();
  PicardResult res;
  for (std::size_t a = 0; a < k; ++a)
    res.densities.push_back(
        GridDensity::boltzmann(p.grid, p.external[a], p.beta));

  std::vector<GridDensity> images(k);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    double r = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      images[a] = map.image(a, res.densities);
      r = std::max(r, detail::sup_diff(res.densities[a].values(),
                                       images[a].values()));
    }
    res.residual_history.push_back(r);
    res.iterations = it;
    res.residual = r;
    if (!std::isfinite(r))
      throw ConvergenceError("picard: iteration diverged", it, r);
    if (r <= opt.tol) return res;
    for (std::size_t a = 0; a < k; ++a) {
      // Species after the first see the densities already updated this sweep.
      const GridDensity t = a == 0 ? images[0] : map.image(a, res.densities);
      auto& v = res.densities[a].mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = (1.0 - opt.damping) * v[i] + opt.damping * t[i];
      res.densities[a].normalize();
      map.invalidate(a);
    }
  }
  throw ConvergenceError("picard: no convergence", opt.max_iter, res.residual);
}

inline PicardResult picard_fixed_point(std::span<const double> u,
                                       const PairKernel& w, double beta,
                                       const Grid& grid,
                                       const PicardOptions& opt = {}) {
  MeanFieldProblem p;
  p.grid = grid;
  p.beta = beta;
  p.external = {std::vector<double>(u.begin(), u.end())};
  p.coupling = {{1.0}};
  p.kernels = {{w}};
  return picard_solve(p, opt);
}

template <class U>
  requires std::invocable<U, double>
PicardResult picard_fixed_point(U&& u, const PairKernel& w, double beta,
                                const Grid& grid,
                                const PicardOptions& opt = {}) {
  const auto values = grid.sample(u);
  return picard_fixed_point(std::span<const double>(values), w, beta, grid,
                            opt);
}

// Two species with U_1, U_2, intra kernels W_1, W_2 and cross kernel W_c,
// mean-field couplings all 1.
inline PicardResult picard_two_species(std::span<const double> u1,
                                       std::span<const double> u2,
                                       const PairKernel& w1,
                                       const PairKernel& w2,
                                       const PairKernel& wc, double beta,
                                       const Grid& grid,
                                       const PicardOptions& opt = {}) {
  MeanFieldProblem p;
  p.grid = grid;
  p.beta = beta;
  p.external = {std::vector<double>(u1.begin(), u1.end()),
                std::vector<double>(u2.begin(), u2.end())};
  p.coupling = {{1.0, 1.0}, {1.0, 1.0}};
  p.kernels = {{w1, wc}, {wc, w2}};
  return picard_solve(p, opt);
}

// F(rho) = int U rho + 1/2 int rho (W * rho) + beta^{-1} int rho log rho
inline double mean_field_free_energy(const GridDensity& rho,
                                     std::span<const double> u,
                                     const PairKernel& w, double beta) {
  require(beta > 0.0, "mean_field_free_energy: beta must be positive");
  const Grid& g = rho.grid();
  const auto conv = convolve_grid(w, rho);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = rho[i];
    const double ent = r > 0.0 ? r * std::log(r) : 0.0;
    f[i] = u[i] * r + 0.5 * r * conv[i] + ent / beta;
  }
  return g.integrate(f);
}

// Discrete stationary Fokker-Planck residual
//   div(rho grad phi) + beta^{-1} lap(rho)
// at interior nodes, with fluxes evaluated at cell midpoints. On a radial
// grid the divergence carries the r^2 weight. Returns the max over nodes
// whose distance from either end of the grid is at least `margin` nodes.
inline double stationarity_residual(const GridDensity& rho,
                                    std::span<const double> phi, double beta,
                                    std::size_t margin = 1) {
  const Grid& g = rho.grid();
  const std::size_t n = g.size();
  require(phi.size() == n, "stationarity_residual: size mismatch");
  require(margin >= 1 && 2 * margin < n, "stationarity_residual: bad margin");
  const double h = g.dx();
  const bool radial = g.geometry() == GridGeometry::radial3d;
  auto flux = [&](std::size_t i) {  // between i and i + 1
    const double rm = 0.5 * (rho[i] + rho[i + 1]);
    const double f = rm * (phi[i + 1] - phi[i]) / h +
                     (rho[i + 1] - rho[i]) / (h * beta);
    if (!radial) return f;
    const double x = g.node(i) + 0.5 * h;
    return x * x * f;
  };
  double worst = 0.0;
  for (std::size_t i = margin; i + margin < n; ++i) {
    double r = (flux(i) - flux(i - 1)) / h;
    if (radial) r /= g.node(i) * g.node(i);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

// Mean-field potential phi_k of species k at the given densities.
inline std::vector<double> mean_field_potential(
    const MeanFieldProblem& p, const std::vector<GridDensity>& rho,
    std::size_t k) {
  detail::MeanFieldMap map(p);
  return map.potential(k, rho);
}

}  // namespace rbmc
