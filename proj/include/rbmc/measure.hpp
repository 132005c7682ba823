#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "rbmc/core.hpp"

namespace rbmc {

// Equal-weight point-mass measure (1/n) sum_k delta(. - x_k).
//
// Repeated atoms may be stored once with a multiplicity; long chains that move
// one particle per iteration record the same coordinates many times, and the
// run-length form keeps those measures small. Weights are always
// multiplicity / total_count().
template <std::size_t D>
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<Vec<D>> points, int species = -1)
      : points_(std::move(points)), species_(species) {
    total_ = points_.size();
  }

  void add(const Vec<D>& x, std::uint64_t multiplicity = 1) {
    if (multiplicity == 0) return;
    if (!counts_.empty() || multiplicity != 1) {
      if (counts_.empty()) counts_.assign(points_.size(), 1);
      counts_.push_back(multiplicity);
    }
    points_.push_back(x);
    total_ += multiplicity;
  }

  // Increase the multiplicity of an existing atom.
  void bump(std::size_t atom, std::uint64_t by = 1) {
    if (counts_.empty()) counts_.assign(points_.size(), 1);
    counts_[atom] += by;
    total_ += by;
  }

  void append(const EmpiricalMeasure& other) {
    for (std::size_t k = 0; k < other.atoms(); ++k)
      add(other.point(k), other.multiplicity(k));
  }

  bool empty() const { return total_ == 0; }
  std::size_t atoms() const { return points_.size(); }
  std::uint64_t total_count() const { return total_; }
  const Vec<D>& point(std::size_t k) const { return points_[k]; }
  const std::vector<Vec<D>>& points() const { return points_; }
  std::uint64_t multiplicity(std::size_t k) const {
    return counts_.empty() ? 1 : counts_[k];
  }
  double weight(std::size_t k) const {
    return static_cast<double>(multiplicity(k)) / static_cast<double>(total_);
  }
  int species() const { return species_; }
  void set_species(int s) { species_ = s; }

  // Integral of f against the measure.
  template <class F>
  double expectation(F&& f) const {
    if (empty()) throw EmptyMeasureError("expectation over an empty measure");
    CompensatedSum s;
    for (std::size_t k = 0; k < atoms(); ++k)
      s += static_cast<double>(multiplicity(k)) * f(points_[k]);
    return s.value() / static_cast<double>(total_);
  }

  double weight_sum() const {
    CompensatedSum s;
    for (std::size_t k = 0; k < atoms(); ++k) s += weight(k);
    return s.value();
  }

 private:
  std::vector<Vec<D>> points_;
  std::vector<std::uint64_t> counts_;  // empty: every atom has multiplicity 1
  std::uint64_t total_ = 0;
  int species_ = -1;
};

}  // namespace rbmc
