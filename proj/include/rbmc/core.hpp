#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rbmc {

template <std::size_t D>
using Vec = std::array<double, D>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors. Everything thrown by the library derives from rbmc::Error, so the
// CLI can map the whole family onto a runtime-error exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfigurationError : public Error {
 public:
  using Error::Error;
};

class InfeasibleChargeError : public Error {
 public:
  using Error::Error;
};

class EmptyMeasureError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations,
                   double last_residual)
      : Error(what + " (iterations " + std::to_string(iterations) +
              ", last residual " + std::to_string(last_residual) + ")"),
        iterations_(iterations),
        last_residual_(last_residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double last_residual() const noexcept { return last_residual_; }

 private:
  std::size_t iterations_;
  double last_residual_;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ParameterError(message);
}

// ---------------------------------------------------------------------------
// Small fixed-size vector arithmetic.

template <std::size_t D>
constexpr Vec<D> operator+(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = a[k] + b[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator-(const Vec<D>& a, const Vec<D>& b) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = a[k] - b[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator-(const Vec<D>& a) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = -a[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D> operator*(double s, const Vec<D>& a) {
  Vec<D> r{};
  for (std::size_t k = 0; k < D; ++k) r[k] = s * a[k];
  return r;
}

template <std::size_t D>
constexpr Vec<D>& operator+=(Vec<D>& a, const Vec<D>& b) {
  for (std::size_t k = 0; k < D; ++k) a[k] += b[k];
  return a;
}

template <std::size_t D>
constexpr Vec<D>& operator-=(Vec<D>& a, const Vec<D>& b) {
  for (std::size_t k = 0; k < D; ++k) a[k] -= b[k];
  return a;
}

template <std::size_t D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < D; ++k) s += a[k] * b[k];
  return s;
}

template <std::size_t D>
constexpr double norm2(const Vec<D>& a) {
  return dot(a, a);
}

template <std::size_t D>
inline double norm(const Vec<D>& a) {
  if constexpr (D == 1) {
    return std::abs(a[0]);
  } else {
    return std::sqrt(norm2(a));
  }
}

template <std::size_t D>
inline bool all_finite(const Vec<D>& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

template <std::size_t D>
constexpr Vec<D> zero_vec() {
  return Vec<D>{};
}

// Neumaier-compensated accumulator. Used wherever pair sums have to be
// reproducible to the last bits across code paths.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// splitmix64 finalizer; derives decorrelated stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rbmc
