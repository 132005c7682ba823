#pragma once

// Distances between an empirical measure and a grid density: relative weak
// error, MSWE, histogram total variation, H^{-alpha} norms, and log-log rate
// fits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "rbmc/core.hpp"
#include "rbmc/grid.hpp"
#include "rbmc/measure.hpp"

namespace rbmc {

// |int f rho - mu(f)| / |int f rho|
template <std::size_t D, class F>
double weak_error(const EmpiricalMeasure<D>& mu, const GridDensity& rho,
                  F&& f) {
  const double ref = rho.expectation([&](double x) {
    if constexpr (D == 1) {
      return f(Vec<1>{x});
    } else {
      // Radial grid: the reference integrand at radius x.
      Vec<D> v{};
      v[0] = x;
      return f(v);
    }
  });
  if (ref == 0.0 || !std::isfinite(ref))
    throw NumericError("weak_error: reference integral is zero");
  const double est = mu.expectation(f);
  return std::abs(ref - est) / std::abs(ref);
}

inline double weak_error(double reference, double estimate) {
  if (reference == 0.0 || !std::isfinite(reference))
    throw NumericError("weak_error: reference integral is zero");
  return std::abs(reference - estimate) / std::abs(reference);
}

// sqrt((sum err_+^2 + sum err_-^2) / (2M))
inline double mswe(std::span<const double> plus, std::span<const double> minus) {
  require(!plus.empty() && plus.size() == minus.size(),
          "mswe: both error lists need the same length M >= 1");
  double s = 0.0;
  for (double e : plus) s += e * e;
  for (double e : minus) s += e * e;
  return std::sqrt(s / (2.0 * static_cast<double>(plus.size())));
}

// Root mean square over M repetitions of a single list.
inline double rms(std::span<const double> errors) {
  require(!errors.empty(), "rms: empty list");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

// ---------------------------------------------------------------------------
// Total variation on equal-width bins.

// Scalar coordinate used for histogramming: x itself in 1D, |x| otherwise.
template <std::size_t D>
double histogram_coordinate(const Vec<D>& x) {
  if constexpr (D == 1) {
    return x[0];
  } else {
    return norm(x);
  }
}

// 1/2 sum_b |mu(b) - P(b)|, with P(b) = bin masses from `reference_mass`
// over `bins` equal bins on [lo, hi]. Sample mass falling outside [lo, hi]
// is compared against whatever reference mass lies outside.
template <std::size_t D, class Mass>
double tv_histogram_with(const EmpiricalMeasure<D>& mu, double lo, double hi,
                         std::size_t bins, Mass&& reference_mass) {
  require(bins >= 1 && lo < hi, "tv_histogram: need bins >= 1 and lo < hi");
  if (mu.empty()) throw EmptyMeasureError("tv_histogram: empty measure");
  std::vector<double> counts(bins, 0.0);
  double outside = 0.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k < mu.atoms(); ++k) {
    const double x = histogram_coordinate(mu.point(k));
    const double w = mu.weight(k);
    if (!(x >= lo && x <= hi)) {
      outside += w;
      continue;
    }
    auto b = static_cast<std::size_t>((x - lo) / width);
    if (b >= bins) b = bins - 1;
    counts[b] += w;
  }
  double tv = 0.0, inside_ref = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    const double e = b + 1 == bins ? hi : a + width;
    const double p = reference_mass(a, e);
    inside_ref += p;
    tv += std::abs(counts[b] - p);
  }
  tv += std::abs(outside - std::max(0.0, 1.0 - inside_ref));
  return std::clamp(0.5 * tv, 0.0, 1.0);
}

// Bins cover the grid range of rho.
template <std::size_t D>
double tv_histogram(const EmpiricalMeasure<D>& mu, const GridDensity& rho,
                    std::size_t bins = 50) {
  const double total = rho.integral();
  return tv_histogram_with(mu, rho.grid().lo(), rho.grid().hi(), bins,
                           [&](double a, double b) {
                             return rho.mass(a, b) / total;
                           });
}

// Against a reference given by its CDF on [lo, hi].
template <std::size_t D, class Cdf>
double tv_histogram_cdf(const EmpiricalMeasure<D>& mu, Cdf&& cdf, double lo,
                        double hi, std::size_t bins = 50) {
  return tv_histogram_with(mu, lo, hi, bins, [&](double a, double b) {
    return cdf(b) - cdf(a);
  });
}

// ---------------------------------------------------------------------------
// Rate fit: least squares of log err against log N.

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS residual in log space
};

inline RateFit fit_rate(std::span<const double> n, std::span<const double> err) {
  require(n.size() == err.size(), "fit_rate: size mismatch");
  require(n.size() >= 3, "fit_rate: at least 3 points");
  for (std::size_t i = 0; i < n.size(); ++i)
    require(n[i] > 0.0 && err[i] > 0.0 && std::isfinite(err[i]),
            "fit_rate: values must be positive");
  const double m = static_cast<double>(n.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    sx += std::log(n[i]);
    sy += std::log(err[i]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(n[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(err[i]) - my);
  }
  require(sxx > 0.0, "fit_rate: N values must not all coincide");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double r = std::log(err[i]) - (f.intercept + f.slope * std::log(n[i]));
    ss += r * r;
  }
  f.residual = std::sqrt(ss / m);
  return f;
}

// ---------------------------------------------------------------------------
// H^{-alpha} distance.
//
// Convention: f^(xi) = int e^{-i xi.x} f(dx) and
//   |f|^2 = (2 pi)^{-d} int (1 + |xi|^2)^{-alpha} |f^(xi)|^2 dxi,
// which equals sum_kl a_k a_l G(x_k - x_l) for a signed atomic measure, with
// G the Bessel potential whose transform is (1 + |xi|^2)^{-alpha}:
//   G(r) = 2^{1-alpha} / ((2 pi)^{d/2} Gamma(alpha)) r^{alpha-d/2} K_{d/2-alpha}(r).
// For d = 1, alpha = 1 this is e^{-r}/2; for d = 3, alpha = 2 it is
// e^{-r}/(8 pi).
//
// Both routes work on a signed atomic measure mu - rho, where rho enters
// through its quadrature representation (node masses w_i rho_i). The
// Fourier route integrates the constant diagonal part analytically
// (sum a_k^2 G(0)) and the oscillatory remainder numerically on |xi| <= Xi.
// In d = 3 both measures are replaced by their rotation averages (shells at
// radius |x|), which is the natural comparison for a radial grid density.

enum class HRoute { kernel, fourier };

struct DiagnosticsConfig {
  std::size_t dimension = 1;
  double alpha = 1.0;
  double xi_max = 1000.0;  // Fourier truncation Xi
  double xi_panel = 0.25;  // max Gauss-Legendre panel width in xi
  std::size_t bins = 50;
  HRoute route = HRoute::kernel;

  void validate() const {
    require(dimension == 1 || dimension == 3,
            "diagnostics: dimension must be 1 or 3");
    require(alpha > 0.5 * static_cast<double>(dimension),
            "diagnostics: alpha must exceed d/2");
    require(xi_max > 0.0 && xi_panel > 0.0, "diagnostics: bad Fourier range");
    require(bins >= 1, "diagnostics: bins >= 1");
  }
};

struct SignedAtoms {
  std::vector<double> x;  // positions (d = 1) or shell radii (d = 3)
  std::vector<double> a;  // signed masses

  void add(double position, double mass) {
    x.push_back(position);
    a.push_back(mass);
  }
  void append(const SignedAtoms& o, double sign = 1.0) {
    for (std::size_t k = 0; k < o.x.size(); ++k) add(o.x[k], sign * o.a[k]);
  }
  // Sort by position and merge coincident atoms.
  void canonicalize() {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    SignedAtoms out;
    for (std::size_t i : idx) {
      if (!out.x.empty() && out.x.back() == x[i]) {
        out.a.back() += a[i];
      } else {
        out.add(x[i], a[i]);
      }
    }
    *this = std::move(out);
  }
};

template <std::size_t D>
SignedAtoms atoms_of(const EmpiricalMeasure<D>& mu, double sign = 1.0) {
  SignedAtoms s;
  for (std::size_t k = 0; k < mu.atoms(); ++k)
    s.add(histogram_coordinate(mu.point(k)), sign * mu.weight(k));
  return s;
}

inline SignedAtoms atoms_of(const GridDensity& rho, double sign = 1.0) {
  SignedAtoms s;
  const auto& w = rho.grid().weights();
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (rho[i] != 0.0) s.add(rho.grid().node(i), sign * w[i] * rho[i]);
  return s;
}

// G(r) of the Bessel potential, including the finite value at r = 0.
inline double bessel_potential(double r, double alpha, std::size_t d) {
  const double dd = static_cast<double>(d);
  if (r == 0.0)
    return std::tgamma(alpha - 0.5 * dd) /
           (std::pow(4.0 * pi, 0.5 * dd) * std::tgamma(alpha));
  if (d == 1 && alpha == 1.0) return 0.5 * std::exp(-r);
  if (d == 3 && alpha == 2.0) return std::exp(-r) / (8.0 * pi);
  const double nu = std::abs(0.5 * dd - alpha);
  return std::pow(2.0, 1.0 - alpha) /
         (std::pow(2.0 * pi, 0.5 * dd) * std::tgamma(alpha)) *
         std::pow(r, alpha - 0.5 * dd) * std::cyl_bessel_k(nu, r);
}

namespace detail {

// Average of G(|x - y|) over |x| = r, |y| = s in R^3:
// (1 / (2 r s)) int_{|r-s|}^{r+s} G(t) t dt.
inline double shell_bessel(double r, double s, double alpha) {
  if (r == 0.0 || s == 0.0) return bessel_potential(std::max(r, s), alpha, 3);
  const double lo = std::abs(r - s), hi = r + s;
  if (alpha == 2.0) {
    // int t e^{-t} dt = -(t + 1) e^{-t}
    return ((lo + 1.0) * std::exp(-lo) - (hi + 1.0) * std::exp(-hi)) /
           (16.0 * pi * r * s);
  }
  auto f = [&](double t) { return bessel_potential(t, alpha, 3) * t; };
  double total = 0.0;
  const int panels = 8;
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p)
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        f, lo + p * h, lo + (p + 1) * h);
  return total / (2.0 * r * s);
}

inline double kernel_route_1d(const SignedAtoms& s, double alpha) {
  const std::size_t m = s.x.size();
  if (alpha == 1.0) {
    // sum_kl a_k a_l e^{-|x_k - x_l|} / 2 by two exponential sweeps over the
    // sorted atoms.
    double total = 0.0;
    double left = 0.0;  // sum_{l < k} a_l e^{-(x_k - x_l)}
    for (std::size_t k = 0; k < m; ++k) {
      if (k > 0) left = (left + s.a[k - 1]) * std::exp(-(s.x[k] - s.x[k - 1]));
      total += 2.0 * s.a[k] * left + s.a[k] * s.a[k];
    }
    return 0.5 * total;
  }
  CompensatedSum sum;
  for (std::size_t k = 0; k < m; ++k) {
    sum += s.a[k] * s.a[k] * bessel_potential(0.0, alpha, 1);
    for (std::size_t l = k + 1; l < m; ++l)
      sum += 2.0 * s.a[k] * s.a[l] *
             bessel_potential(std::abs(s.x[k] - s.x[l]), alpha, 1);
  }
  return sum.value();
}

inline double kernel_route_3d(const SignedAtoms& s, double alpha) {
  const std::size_t m = s.x.size();
  CompensatedSum sum;
  for (std::size_t k = 0; k < m; ++k) {
    sum += s.a[k] * s.a[k] * shell_bessel(s.x[k], s.x[k], alpha);
    for (std::size_t l = k + 1; l < m; ++l)
      sum += 2.0 * s.a[k] * s.a[l] * shell_bessel(s.x[k], s.x[l], alpha);
  }
  return sum.value();
}

template <class F>
double integrate_panels(F&& f, double hi, double width) {
  const auto panels =
      static_cast<std::size_t>(std::ceil(hi / std::max(width, 1e-12)));
  const double h = hi / static_cast<double>(panels);
  CompensatedSum total;
  for (std::size_t p = 0; p < panels; ++p)
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        f, h * static_cast<double>(p), h * static_cast<double>(p + 1));
  return total.value();
}

inline double fourier_route_1d(const SignedAtoms& s, const DiagnosticsConfig& c) {
  double diag = 0.0;
  for (double a : s.a) diag += a * a;
  const double span = s.x.empty() ? 0.0 : s.x.back() - s.x.front();
  const double width = std::min(c.xi_panel, span > 0.0 ? 1.0 / span : c.xi_panel);
  // |nu^(xi)|^2 - diag is even in xi, so integrate over [0, Xi] and double.
  auto f = [&](double xi) {
    double re = 0.0, im = 0.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      re += s.a[k] * std::cos(xi * s.x[k]);
      im += s.a[k] * std::sin(xi * s.x[k]);
    }
    return (re * re + im * im - diag) * std::pow(1.0 + xi * xi, -c.alpha);
  };
  const double osc = 2.0 * integrate_panels(f, c.xi_max, width) / (2.0 * pi);
  return diag * bessel_potential(0.0, c.alpha, 1) + osc;
}

inline double fourier_route_3d(const SignedAtoms& s, const DiagnosticsConfig& c) {
  const double span = s.x.empty() ? 0.0 : s.x.back();
  const double width = std::min(c.xi_panel, span > 0.0 ? 1.0 / span : c.xi_panel);
  // Rotation averages are shells, whose transforms are a sinc(|xi| r).
  auto f = [&](double k) {
    if (k == 0.0) return 0.0;
    double v = 0.0;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      const double kr = k * s.x[j];
      v += s.a[j] * (kr == 0.0 ? 1.0 : std::sin(kr) / kr);
    }
    return 4.0 * pi * k * k * v * v * std::pow(1.0 + k * k, -c.alpha);
  };
  return integrate_panels(f, c.xi_max, width) / std::pow(2.0 * pi, 3.0);
}

}  // namespace detail

inline double h_neg_alpha_norm_squared(SignedAtoms s, const DiagnosticsConfig& c) {
  c.validate();
  s.canonicalize();
  double v;
  if (c.dimension == 1) {
    v = c.route == HRoute::kernel ? detail::kernel_route_1d(s, c.alpha)
                                  : detail::fourier_route_1d(s, c);
  } else {
    v = c.route == HRoute::kernel ? detail::kernel_route_3d(s, c.alpha)
                                  : detail::fourier_route_3d(s, c);
  }
  // Roundoff can leave tiny negative values for coinciding measures.
  return std::max(v, 0.0);
}

template <std::size_t D>
double h_neg_alpha_distance(const EmpiricalMeasure<D>& mu,
                            const GridDensity& rho,
                            const DiagnosticsConfig& c = {}) {
  if (mu.empty()) throw EmptyMeasureError("h_neg_alpha_distance: empty measure");
  require((D == 1) == (c.dimension == 1),
          "h_neg_alpha_distance: dimension does not match the measure");
  SignedAtoms s = atoms_of(mu);
  s.append(atoms_of(rho), -1.0);
  return std::sqrt(h_neg_alpha_norm_squared(std::move(s), c));
}

inline double h_neg_alpha_distance(const SignedAtoms& p, const SignedAtoms& q,
                                   const DiagnosticsConfig& c = {}) {
  SignedAtoms s = p;
  s.append(q, -1.0);
  return std::sqrt(h_neg_alpha_norm_squared(std::move(s), c));
}

}  // namespace rbmc
