#pragma once

// External potentials U and two-body kernels W = W1 + W2.
//
// Every kernel in this file is radial: it is stored as a profile of the
// distance r = |z| and the vector gradient is W'(r) z / r. The smooth part W1
// is what the Langevin proposal differentiates; the singular part W2 is only
// ever evaluated (inside the Metropolis test), so it carries no derivative.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include "rbmc/core.hpp"

namespace rbmc {

namespace profile {

struct Zero {
  double total(double) const { return 0.0; }
  double total_derivative(double) const { return 0.0; }
  double smooth(double) const { return 0.0; }
  double smooth_derivative(double) const { return 0.0; }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const { return 0.0; }
  std::string describe() const { return "zero"; }
};

struct Constant {
  double value;
  double total(double) const { return value; }
  double total_derivative(double) const { return 0.0; }
  double smooth(double) const { return value; }
  double smooth_derivative(double) const { return 0.0; }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const { return std::abs(value); }
  std::string describe() const {
    return "constant(c=" + std::to_string(value) + ")";
  }
};

// Planar (sheet) Coulomb interaction |x| / (2 eps). No split is needed.
struct Coulomb1d {
  double epsilon;
  double total(double r) const { return r / (2.0 * epsilon); }
  double total_derivative(double) const { return 1.0 / (2.0 * epsilon); }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const { return std::nullopt; }
  std::string describe() const {
    return "coulomb1d(epsilon=" + std::to_string(epsilon) + ")";
  }
};

// Unsplit 3D Coulomb 1/(4 pi eps r); the mean-field kernel of the oracle.
struct Coulomb3d {
  double epsilon;
  double prefactor() const { return 1.0 / (4.0 * pi * epsilon); }
  double total(double r) const {
    if (r == 0.0) throw SingularityError("coulomb3d evaluated at r = 0");
    return prefactor() / r;
  }
  double total_derivative(double r) const {
    if (r == 0.0) throw SingularityError("coulomb3d gradient at r = 0");
    return -prefactor() / (r * r);
  }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return true; }
  std::optional<double> sup_bound() const { return std::nullopt; }
  std::string describe() const {
    return "coulomb3d(epsilon=" + std::to_string(epsilon) + ")";
  }
};

// Coulomb split at r_c: W1 is linear inside r_c and matches 1/(4 pi eps r)
// with its first derivative at r_c; W2 = W - W1 is supported in [0, r_c].
struct Coulomb3dSplit {
  double epsilon;
  double cutoff;

  double prefactor() const { return 1.0 / (4.0 * pi * epsilon); }
  double inner_smooth(double r) const {
    return prefactor() * (-(r - cutoff) / (cutoff * cutoff) + 1.0 / cutoff);
  }
  double outer_smooth(double r) const { return prefactor() / r; }
  double inner_smooth_derivative(double) const {
    return -prefactor() / (cutoff * cutoff);
  }
  double outer_smooth_derivative(double r) const {
    return -prefactor() / (r * r);
  }

  double total(double r) const {
    if (r == 0.0) throw SingularityError("coulomb3d_split evaluated at r = 0");
    return prefactor() / r;
  }
  double total_derivative(double r) const {
    if (r == 0.0) throw SingularityError("coulomb3d_split gradient at r = 0");
    return -prefactor() / (r * r);
  }
  double smooth(double r) const {
    return r > cutoff ? outer_smooth(r) : inner_smooth(r);
  }
  double smooth_derivative(double r) const {
    return r > cutoff ? outer_smooth_derivative(r) : inner_smooth_derivative(r);
  }
  double singular(double r) const {
    if (r > cutoff) return 0.0;
    if (r == 0.0) throw SingularityError("coulomb3d_split W2 at r = 0");
    return prefactor() *
           (1.0 / r + (r - cutoff) / (cutoff * cutoff) - 1.0 / cutoff);
  }
  double singular_support() const { return cutoff; }
  bool singular_at_origin() const { return true; }
  std::optional<double> sup_bound() const { return std::nullopt; }
  std::string describe() const {
    return "coulomb3d_split(epsilon=" + std::to_string(epsilon) +
           ", r_c=" + std::to_string(cutoff) + ")";
  }
};

// Mollified Coulomb: quadratic cap of height 3/(8 pi eps r_N) inside r_N.
struct Coulomb3dCutoff {
  double epsilon;
  double radius;

  double total(double r) const {
    if (r < radius) {
      return (3.0 - r * r / (radius * radius)) / (8.0 * pi * epsilon * radius);
    }
    return 1.0 / (4.0 * pi * epsilon * r);
  }
  double total_derivative(double r) const {
    if (r < radius) return -r / (4.0 * pi * epsilon * radius * radius * radius);
    return -1.0 / (4.0 * pi * epsilon * r * r);
  }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const {
    return 3.0 / (8.0 * pi * epsilon * radius);
  }
  std::string describe() const {
    return "coulomb3d_cutoff(epsilon=" + std::to_string(epsilon) +
           ", r_N=" + std::to_string(radius) + ")";
  }
};

struct LennardJones {
  double epsilon;
  double sigma;

  double total(double r) const {
    if (r == 0.0) throw SingularityError("lennard_jones evaluated at r = 0");
    const double s6 = std::pow(sigma / r, 6);
    return 4.0 * epsilon * (s6 * s6 - s6);
  }
  double total_derivative(double r) const {
    if (r == 0.0) throw SingularityError("lennard_jones gradient at r = 0");
    const double s6 = std::pow(sigma / r, 6);
    return 4.0 * epsilon * (-12.0 * s6 * s6 + 6.0 * s6) / r;
  }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return true; }
  std::optional<double> sup_bound() const { return std::nullopt; }
  std::string describe() const {
    return "lennard_jones(epsilon=" + std::to_string(epsilon) +
           ", sigma=" + std::to_string(sigma) + ")";
  }
};

// amplitude * exp(-(r / length)^2)
struct Gaussian {
  double amplitude;
  double length;

  double total(double r) const {
    const double u = r / length;
    return amplitude * std::exp(-u * u);
  }
  double total_derivative(double r) const {
    return -2.0 * r / (length * length) * total(r);
  }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const { return std::abs(amplitude); }
  std::string describe() const {
    return "gaussian(amplitude=" + std::to_string(amplitude) +
           ", length=" + std::to_string(length) + ")";
  }
};

// stiffness * r^2 / 2
struct Harmonic {
  double stiffness;
  double total(double r) const { return 0.5 * stiffness * r * r; }
  double total_derivative(double r) const { return stiffness * r; }
  double smooth(double r) const { return total(r); }
  double smooth_derivative(double r) const { return total_derivative(r); }
  double singular(double) const { return 0.0; }
  double singular_support() const { return 0.0; }
  bool singular_at_origin() const { return false; }
  std::optional<double> sup_bound() const { return std::nullopt; }
  std::string describe() const {
    return "harmonic(k=" + std::to_string(stiffness) + ")";
  }
};

}  // namespace profile

using Profile =
    std::variant<profile::Zero, profile::Constant, profile::Coulomb1d,
                 profile::Coulomb3d, profile::Coulomb3dSplit,
                 profile::Coulomb3dCutoff, profile::LennardJones,
                 profile::Gaussian, profile::Harmonic>;

class PairKernel {
 public:
  PairKernel() = default;
  explicit PairKernel(Profile p, double scale = 1.0)
      : profile_(std::move(p)), scale_(scale) {}

  static PairKernel zero() { return PairKernel{}; }
  static PairKernel constant(double c) {
    return PairKernel(profile::Constant{c});
  }
  static PairKernel coulomb_1d(double epsilon) {
    require(epsilon > 0.0, "coulomb_1d: epsilon must be positive");
    return PairKernel(profile::Coulomb1d{epsilon});
  }
  static PairKernel coulomb_3d(double epsilon) {
    require(epsilon > 0.0, "coulomb_3d: epsilon must be positive");
    return PairKernel(profile::Coulomb3d{epsilon});
  }
  static PairKernel coulomb_3d_split(double epsilon, double cutoff) {
    require(epsilon > 0.0, "coulomb_3d_split: epsilon must be positive");
    require(cutoff > 0.0, "coulomb_3d_split: r_c must be positive");
    return PairKernel(profile::Coulomb3dSplit{epsilon, cutoff});
  }
  static PairKernel coulomb_3d_cutoff(double epsilon, double radius) {
    require(epsilon > 0.0, "coulomb_3d_cutoff: epsilon must be positive");
    require(radius > 0.0, "coulomb_3d_cutoff: r_N must be positive");
    return PairKernel(profile::Coulomb3dCutoff{epsilon, radius});
  }
  static PairKernel lennard_jones(double epsilon, double sigma) {
    require(epsilon > 0.0, "lennard_jones: well depth must be positive");
    require(sigma > 0.0, "lennard_jones: sigma must be positive");
    return PairKernel(profile::LennardJones{epsilon, sigma});
  }
  static PairKernel gaussian(double amplitude, double length) {
    require(length > 0.0, "gaussian: length must be positive");
    return PairKernel(profile::Gaussian{amplitude, length});
  }
  static PairKernel harmonic(double stiffness) {
    return PairKernel(profile::Harmonic{stiffness});
  }

  // Multiplies every part (including any short-range addition) by factor.
  PairKernel scaled(double factor) const {
    PairKernel k = *this;
    k.scale_ *= factor;
    if (k.extra_) k.extra_->scale *= factor;
    return k;
  }

  // Adds `extra` (its total) to the singular side, truncated at `cutoff`.
  // Used to put a Lennard-Jones core into the Metropolis step.
  PairKernel with_short_range(const PairKernel& extra, double cutoff) const {
    require(cutoff > 0.0, "with_short_range: cutoff must be positive");
    require(!extra.extra_, "with_short_range: nested additions unsupported");
    PairKernel k = *this;
    k.extra_ = ShortRange{extra.profile_, extra.scale_, cutoff};
    return k;
  }

  double total(double r) const {
    double v = scale_ * visit([r](const auto& p) { return p.total(r); });
    if (extra_ && r <= extra_->cutoff) v += extra_->evaluate(r);
    return v;
  }
  double smooth(double r) const {
    return scale_ * visit([r](const auto& p) { return p.smooth(r); });
  }
  double singular(double r) const {
    double v = scale_ * visit([r](const auto& p) { return p.singular(r); });
    if (extra_ && r <= extra_->cutoff) v += extra_->evaluate(r);
    return v;
  }
  double smooth_derivative(double r) const {
    return scale_ *
           visit([r](const auto& p) { return p.smooth_derivative(r); });
  }
  // Derivative of the main term only; short-range additions are never
  // differentiated.
  double total_derivative(double r) const {
    return scale_ * visit([r](const auto& p) { return p.total_derivative(r); });
  }

  template <std::size_t D>
  double total(const Vec<D>& z) const {
    return total(norm(z));
  }
  template <std::size_t D>
  double smooth(const Vec<D>& z) const {
    return smooth(norm(z));
  }
  template <std::size_t D>
  double singular(const Vec<D>& z) const {
    return singular(norm(z));
  }
  template <std::size_t D>
  Vec<D> gradient_smooth(const Vec<D>& z) const {
    return radial_gradient(z, [this](double r) { return smooth_derivative(r); });
  }
  template <std::size_t D>
  Vec<D> gradient_total(const Vec<D>& z) const {
    return radial_gradient(z, [this](double r) { return total_derivative(r); });
  }

  // Support radius of W2; zero when the kernel has no singular part.
  double cutoff() const {
    double rc = visit([](const auto& p) { return p.singular_support(); });
    if (extra_) rc = std::max(rc, extra_->cutoff);
    return rc;
  }
  bool has_singular_part() const { return cutoff() > 0.0; }
  bool has_short_range_term() const { return extra_.has_value(); }
  bool singular_at_origin() const {
    return visit([](const auto& p) { return p.singular_at_origin(); });
  }
  // sup |W| when finite; nullopt means unbounded.
  std::optional<double> sup_norm_bound() const {
    if (extra_) return std::nullopt;
    auto b = visit([](const auto& p) { return p.sup_bound(); });
    if (!b) return std::nullopt;
    return std::abs(scale_) * *b;
  }

  const Profile& profile() const { return profile_; }
  double scale() const { return scale_; }

  std::string describe() const {
    std::ostringstream os;
    if (scale_ != 1.0) os << scale_ << "*";
    os << visit([](const auto& p) { return p.describe(); });
    if (extra_) {
      os << " + short_range[";
      if (extra_->scale != 1.0) os << extra_->scale << "*";
      os << std::visit([](const auto& p) { return p.describe(); },
                       extra_->profile)
         << ", cutoff=" << extra_->cutoff << "]";
    }
    return os.str();
  }

 private:
  struct ShortRange {
    Profile profile;
    double scale;
    double cutoff;
    double evaluate(double r) const {
      return scale * std::visit([r](const auto& p) { return p.total(r); },
                                profile);
    }
  };

  template <class F>
  auto visit(F&& f) const
      -> decltype(std::visit(std::forward<F>(f), std::declval<const Profile&>())) {
    return std::visit(std::forward<F>(f), profile_);
  }

  template <std::size_t D, class Deriv>
  static Vec<D> radial_gradient(const Vec<D>& z, Deriv&& deriv) {
    if constexpr (D == 1) {
      if (z[0] == 0.0) return Vec<D>{0.0};
      const double r = std::abs(z[0]);
      return Vec<D>{deriv(r) * (z[0] > 0.0 ? 1.0 : -1.0)};
    } else {
      const double r = norm(z);
      if (r == 0.0) return Vec<D>{};
      return (deriv(r) / r) * z;
    }
  }

  Profile profile_{profile::Zero{}};
  double scale_ = 1.0;
  std::optional<ShortRange> extra_;
};

template <std::size_t D>
class ExternalPotential {
 public:
  ExternalPotential() = default;

  static ExternalPotential zero() { return ExternalPotential{}; }

  // (lambda / 2) |x|^2
  static ExternalPotential quadratic(double lambda) {
    require(lambda >= 0.0, "quadratic_confinement: lambda must be >= 0");
    ExternalPotential u;
    u.kind_ = Kind::quadratic;
    u.lambda_ = lambda;
    return u;
  }

  // charge * W(x - center), e.g. the field of a fixed free charge.
  static ExternalPotential field(PairKernel kernel, double charge,
                                 Vec<D> center = {}) {
    ExternalPotential u;
    u.kind_ = Kind::field;
    u.kernel_ = std::move(kernel);
    u.charge_ = charge;
    u.center_ = center;
    return u;
  }

  ExternalPotential scaled(double factor) const {
    ExternalPotential u = *this;
    u.scale_ *= factor;
    return u;
  }

  double evaluate(const Vec<D>& x) const {
    switch (kind_) {
      case Kind::zero:
        return 0.0;
      case Kind::quadratic:
        return scale_ * 0.5 * lambda_ * norm2(x);
      case Kind::field:
        return scale_ * charge_ * kernel_.total(x - center_);
    }
    return 0.0;
  }

  Vec<D> gradient(const Vec<D>& x) const {
    switch (kind_) {
      case Kind::zero:
        return Vec<D>{};
      case Kind::quadratic:
        return (scale_ * lambda_) * x;
      case Kind::field:
        return (scale_ * charge_) * kernel_.gradient_total(x - center_);
    }
    return Vec<D>{};
  }

  bool is_zero() const { return kind_ == Kind::zero || scale_ == 0.0; }

  std::string describe() const {
    std::ostringstream os;
    if (scale_ != 1.0) os << scale_ << "*";
    switch (kind_) {
      case Kind::zero:
        os << "zero";
        break;
      case Kind::quadratic:
        os << "quadratic(lambda=" << lambda_ << ")";
        break;
      case Kind::field:
        os << "field(charge=" << charge_ << ", kernel=" << kernel_.describe()
           << ")";
        break;
    }
    return os.str();
  }

 private:
  enum class Kind { zero, quadratic, field };
  Kind kind_ = Kind::zero;
  double lambda_ = 0.0;
  PairKernel kernel_;
  double charge_ = 0.0;
  Vec<D> center_{};
  double scale_ = 1.0;
};

// Free-function spellings of the kernel constructors.
inline PairKernel coulomb_1d(double epsilon) {
  return PairKernel::coulomb_1d(epsilon);
}
inline PairKernel coulomb_3d_split(double epsilon, double cutoff) {
  return PairKernel::coulomb_3d_split(epsilon, cutoff);
}
inline PairKernel coulomb_3d_cutoff(double epsilon, double radius) {
  return PairKernel::coulomb_3d_cutoff(epsilon, radius);
}
inline PairKernel lennard_jones(double epsilon, double sigma) {
  return PairKernel::lennard_jones(epsilon, sigma);
}
template <std::size_t D>
ExternalPotential<D> quadratic_confinement(double lambda) {
  return ExternalPotential<D>::quadratic(lambda);
}

// r_N = N^{-gamma}, gamma = 1/(2d) unless given.
inline double cutoff_radius_for(std::size_t n, std::size_t dimension,
                                std::optional<double> gamma = std::nullopt) {
  require(n >= 1 && dimension >= 1, "cutoff_radius_for: invalid arguments");
  const double g = gamma.value_or(1.0 / (2.0 * static_cast<double>(dimension)));
  return std::pow(static_cast<double>(n), -g);
}

}  // namespace rbmc
