#pragma once

#include <cmath>
#include <random>
#include <string>

#include "rbmc/core.hpp"

namespace rbmc {

enum class DomainKind { all_space, box, annulus };

// Simulation domain with mirror-reflecting walls.
//
//   box:      [lo_k, hi_k] per axis
//   annulus:  B(0, outer) \ B(0, inner), d >= 2
//   all_space: no boundary; `reflect` is the identity
template <std::size_t D>
class DomainSpec {
 public:
  DomainSpec() = default;

  static DomainSpec all_space() { return DomainSpec{}; }

  static DomainSpec box(const Vec<D>& lo, const Vec<D>& hi) {
    for (std::size_t k = 0; k < D; ++k)
      require(lo[k] < hi[k], "box domain: lo must be below hi on every axis");
    DomainSpec d;
    d.kind_ = DomainKind::box;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
  }

  static DomainSpec box(double lo, double hi) {
    Vec<D> a, b;
    a.fill(lo);
    b.fill(hi);
    return box(a, b);
  }

  static DomainSpec annulus(double inner, double outer) {
    static_assert(D >= 2, "annulus domains need d >= 2");
    require(inner >= 0.0 && inner < outer,
            "annulus domain: need 0 <= inner < outer");
    DomainSpec d;
    d.kind_ = DomainKind::annulus;
    d.inner_ = inner;
    d.outer_ = outer;
    return d;
  }

  DomainKind kind() const { return kind_; }
  bool bounded() const { return kind_ != DomainKind::all_space; }
  double inner_radius() const { return inner_; }
  double outer_radius() const { return outer_; }

  // Axis-aligned bounding box of a bounded domain.
  Vec<D> lower_corner() const {
    if (kind_ == DomainKind::annulus) {
      Vec<D> v;
      v.fill(-outer_);
      return v;
    }
    return lo_;
  }
  Vec<D> upper_corner() const {
    if (kind_ == DomainKind::annulus) {
      Vec<D> v;
      v.fill(outer_);
      return v;
    }
    return hi_;
  }

  bool contains(const Vec<D>& x) const {
    switch (kind_) {
      case DomainKind::all_space:
        return all_finite(x);
      case DomainKind::box:
        for (std::size_t k = 0; k < D; ++k)
          if (!(x[k] >= lo_[k] && x[k] <= hi_[k])) return false;
        return true;
      case DomainKind::annulus: {
        const double r = norm(x);
        return r >= inner_ && r <= outer_;
      }
    }
    return false;
  }

  // Mirror reflection across every violated wall until the point is inside.
  // Repeated mirroring in [a, b] is folding with period 2(b - a), which is
  // what is computed here in closed form.
  Vec<D> reflect(const Vec<D>& x) const {
    if (!all_finite(x)) throw NumericError("reflect: non-finite position");
    switch (kind_) {
      case DomainKind::all_space:
        return x;
      case DomainKind::box: {
        Vec<D> y = x;
        for (std::size_t k = 0; k < D; ++k) y[k] = fold(x[k], lo_[k], hi_[k]);
        return y;
      }
      case DomainKind::annulus: {
        const double r = norm(x);
        if (r >= inner_ && r <= outer_) return x;
        const double folded = fold(r, inner_, outer_);
        if (r == 0.0) {
          Vec<D> y{};
          y[0] = folded;
          return y;
        }
        return (folded / r) * x;
      }
    }
    return x;
  }

  // Uniform draw over the domain (by volume for the annulus).
  template <class Rng>
  Vec<D> sample_uniform(Rng& rng) const {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    switch (kind_) {
      case DomainKind::all_space:
        throw ParameterError(
            "uniform initialization needs a bounded domain or an init box");
      case DomainKind::box: {
        Vec<D> y;
        for (std::size_t k = 0; k < D; ++k)
          y[k] = lo_[k] + (hi_[k] - lo_[k]) * u01(rng);
        return y;
      }
      case DomainKind::annulus: {
        std::normal_distribution<double> g(0.0, 1.0);
        Vec<D> dir;
        double len = 0.0;
        do {
          for (auto& v : dir) v = g(rng);
          len = norm(dir);
        } while (len == 0.0);
        const double dd = static_cast<double>(D);
        const double a = std::pow(inner_, dd);
        const double b = std::pow(outer_, dd);
        const double r = std::pow(a + (b - a) * u01(rng), 1.0 / dd);
        return (r / len) * dir;
      }
    }
    return Vec<D>{};
  }

  std::string describe() const {
    switch (kind_) {
      case DomainKind::all_space:
        return "all_space";
      case DomainKind::box: {
        std::string s = "box[";
        for (std::size_t k = 0; k < D; ++k) {
          if (k) s += " x ";
          s += std::to_string(lo_[k]) + "," + std::to_string(hi_[k]);
        }
        return s + "]";
      }
      case DomainKind::annulus:
        return "annulus(" + std::to_string(inner_) + "," +
               std::to_string(outer_) + ")";
    }
    return "?";
  }

  static double fold(double v, double a, double b) {
    if (v >= a && v <= b) return v;
    const double len = b - a;
    if (v < a && v >= a - len) return 2.0 * a - v;
    if (v > b && v <= b + len) return 2.0 * b - v;
    double y = std::fmod(v - a, 2.0 * len);
    if (y < 0.0) y += 2.0 * len;
    if (y > len) y = 2.0 * len - y;
    return a + y;
  }

 private:
  DomainKind kind_ = DomainKind::all_space;
  Vec<D> lo_{};
  Vec<D> hi_{};
  double inner_ = 0.0;
  double outer_ = 0.0;
};

}  // namespace rbmc
