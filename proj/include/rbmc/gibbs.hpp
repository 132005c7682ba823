#pragma once

// N-body energies and unnormalized Gibbs log-densities.
//
// Two pair-weight conventions are supported:
//   mean_field   E = sum_i U(x_i) + sum_{i<j} w_kl W_kl(x_i - x_j) with
//                w_kk = 1/(N_k - 1) inside a species and w_kl = 1/N across
//                species (equal counts only);
//   charge_unit  w_kl = q z_k z_l, the electrolyte Hamiltonian rescaled by 1/q.
// An optional unweighted short-range core (e.g. Lennard-Jones) can be added
// to every pair; it lives on the Metropolis side of the sampler.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbmc/core.hpp"
#include "rbmc/domain.hpp"
#include "rbmc/potentials.hpp"

namespace rbmc {

using SpeciesIndex = std::uint32_t;

template <std::size_t D>
struct ParticleConfiguration {
  std::vector<Vec<D>> positions;
  std::vector<SpeciesIndex> species;  // empty means a single species

  std::size_t size() const { return positions.size(); }
  SpeciesIndex species_of(std::size_t i) const {
    return species.empty() ? 0 : species[i];
  }
};

enum class PairWeightMode { mean_field, charge_unit };

inline std::string to_string(PairWeightMode m) {
  return m == PairWeightMode::mean_field ? "mean_field" : "charge_unit";
}

template <std::size_t D>
struct Species {
  std::string name;
  ExternalPotential<D> potential;  // effective per-particle potential
  std::size_t count = 0;
  double valence = 1.0;
};

template <std::size_t D>
class SpeciesSystem {
 public:
  static constexpr std::size_t dimension = D;

  SpeciesSystem(std::vector<Species<D>> species, PairWeightMode mode,
                double charge_unit = 1.0)
      : species_(std::move(species)), mode_(mode), charge_unit_(charge_unit) {
    require(!species_.empty(), "SpeciesSystem: at least one species required");
    for (const auto& s : species_)
      require(s.count >= 2, "SpeciesSystem: every species needs N_k >= 2");
    if (mode_ == PairWeightMode::mean_field && species_.size() > 1) {
      for (const auto& s : species_)
        if (s.count != species_.front().count)
          throw UnsupportedConfigurationError(
              "mean_field pair weights need equal species counts; use "
              "charge_unit for unequal counts");
    }
    if (mode_ == PairWeightMode::charge_unit)
      require(charge_unit_ > 0.0, "SpeciesSystem: charge unit q must be > 0");
    kernels_.assign(species_.size() * species_.size(), PairKernel::zero());
    total_ = 0;
    for (const auto& s : species_) total_ += s.count;
  }

  void set_kernel(std::size_t k, std::size_t l, const PairKernel& w) {
    kernels_[k * species_.size() + l] = w;
    kernels_[l * species_.size() + k] = w;
  }
  void set_kernel_all(const PairKernel& w) {
    for (auto& k : kernels_) k = w;
  }
  void set_core(const PairKernel& core, double cutoff) {
    require(cutoff > 0.0, "set_core: cutoff must be positive");
    core_ = core;
    core_cutoff_ = cutoff;
  }
  void set_domain(const DomainSpec<D>& d) { domain_ = d; }

  std::size_t species_count() const { return species_.size(); }
  std::size_t total_count() const { return total_; }
  const Species<D>& species(std::size_t k) const { return species_[k]; }
  PairWeightMode mode() const { return mode_; }
  double charge_unit() const { return charge_unit_; }
  const DomainSpec<D>& domain() const { return domain_; }
  const PairKernel& kernel(std::size_t k, std::size_t l) const {
    return kernels_[k * species_.size() + l];
  }
  const std::optional<PairKernel>& core() const { return core_; }
  double core_cutoff() const { return core_cutoff_; }

  double pair_weight(std::size_t k, std::size_t l) const {
    if (mode_ == PairWeightMode::charge_unit)
      return charge_unit_ * species_[k].valence * species_[l].valence;
    if (k == l) return 1.0 / static_cast<double>(species_[k].count - 1);
    return 1.0 / static_cast<double>(species_[k].count);
  }

  // Species tag per particle, species laid out in contiguous blocks.
  std::vector<SpeciesIndex> species_tags() const {
    std::vector<SpeciesIndex> tags;
    tags.reserve(total_);
    for (std::size_t k = 0; k < species_.size(); ++k)
      tags.insert(tags.end(), species_[k].count, static_cast<SpeciesIndex>(k));
    return tags;
  }

  double external_energy(SpeciesIndex s, const Vec<D>& x) const {
    return species_[s].potential.evaluate(x);
  }

  double pair_energy(SpeciesIndex a, SpeciesIndex b, const Vec<D>& x,
                     const Vec<D>& y) const {
    const Vec<D> z = x - y;
    const double r = norm(z);
    double e = pair_weight(a, b) * kernel(a, b).total(r);
    if (core_ && r <= core_cutoff_) e += core_->total(r);
    return e;
  }

  double energy(const ParticleConfiguration<D>& c) const {
    const std::size_t n = c.size();
    CompensatedSum sum;
    for (std::size_t i = 0; i < n; ++i)
      sum += external_energy(c.species_of(i), c.positions[i]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        sum += pair_energy(c.species_of(i), c.species_of(j), c.positions[i],
                           c.positions[j]);
    return sum.value();
  }

  // --- sampler model interface -------------------------------------------

  Vec<D> external_gradient(SpeciesIndex s, const Vec<D>& x) const {
    return species_[s].potential.gradient(x);
  }

  // Gradient in x of the weighted smooth pair term w W1(x - y).
  Vec<D> pair_gradient(SpeciesIndex a, SpeciesIndex b, const Vec<D>& x,
                       const Vec<D>& y) const {
    return pair_weight(a, b) * kernel(a, b).gradient_smooth(x - y);
  }

  bool has_short_range() const { return short_range_cutoff() > 0.0; }

  double short_range_cutoff() const {
    double rc = core_ ? core_cutoff_ : 0.0;
    for (const auto& k : kernels_) rc = std::max(rc, k.cutoff());
    return rc;
  }

  // Weighted W2 plus the core term. Coincident points return +inf so the
  // Metropolis step rejects them.
  double pair_short_energy(SpeciesIndex a, SpeciesIndex b, const Vec<D>& x,
                           const Vec<D>& y) const {
    const double r = norm(x - y);
    const PairKernel& w = kernel(a, b);
    const bool w_active = w.has_singular_part() && r <= w.cutoff();
    const bool core_active = core_ && r <= core_cutoff_;
    if (!w_active && !core_active) return 0.0;
    if (r == 0.0) return infinity;
    double e = w_active ? pair_weight(a, b) * w.singular(r) : 0.0;
    if (core_active) e += core_->total(r);
    return e;
  }

  std::string describe() const {
    std::string s = "mode=" + to_string(mode_);
    if (mode_ == PairWeightMode::charge_unit)
      s += ", q=" + std::to_string(charge_unit_);
    for (std::size_t k = 0; k < species_.size(); ++k) {
      s += "; species " + species_[k].name + ": N=" +
           std::to_string(species_[k].count) +
           ", z=" + std::to_string(species_[k].valence) +
           ", U=" + species_[k].potential.describe();
    }
    for (std::size_t k = 0; k < species_.size(); ++k)
      for (std::size_t l = k; l < species_.size(); ++l)
        s += "; W[" + std::to_string(k) + "," + std::to_string(l) +
             "]=" + kernel(k, l).describe();
    if (core_)
      s += "; core=" + core_->describe() +
           " cutoff=" + std::to_string(core_cutoff_);
    s += "; domain=" + domain_.describe();
    return s;
  }

 private:
  std::vector<Species<D>> species_;
  PairWeightMode mode_;
  double charge_unit_;
  std::vector<PairKernel> kernels_;
  std::optional<PairKernel> core_;
  double core_cutoff_ = 0.0;
  DomainSpec<D> domain_;
  std::size_t total_ = 0;
};

// E_N = sum_i U(x_i) + 1/(N-1) sum_{i<j} W(x_i - x_j)
template <std::size_t D>
double energy_nbody(std::span<const Vec<D>> x, const ExternalPotential<D>& u,
                    const PairKernel& w) {
  const std::size_t n = x.size();
  require(n >= 2, "energy_nbody: N >= 2 required");
  CompensatedSum ext;
  for (const auto& xi : x) ext += u.evaluate(xi);
  CompensatedSum pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs += w.total(x[i] - x[j]);
  return ext.value() + pairs.value() / static_cast<double>(n - 1);
}

template <std::size_t D>
double energy_nbody(const ParticleConfiguration<D>& c,
                    const ExternalPotential<D>& u, const PairKernel& w) {
  return energy_nbody<D>(std::span<const Vec<D>>(c.positions), u, w);
}

template <std::size_t D>
double log_gibbs_unnormalized(std::span<const Vec<D>> x,
                              const ExternalPotential<D>& u,
                              const PairKernel& w, double beta) {
  require(beta > 0.0, "log_gibbs_unnormalized: beta must be positive");
  return -beta * energy_nbody<D>(x, u, w);
}

// Two-species energy with species 0 at x and species 1 at y. The system must
// have exactly two species whose counts match the spans.
template <std::size_t D>
double energy_two_species(std::span<const Vec<D>> x, std::span<const Vec<D>> y,
                          const SpeciesSystem<D>& system) {
  require(system.species_count() == 2,
          "energy_two_species: system must have two species");
  if (x.size() != system.species(0).count ||
      y.size() != system.species(1).count)
    throw UnsupportedConfigurationError(
        "energy_two_species: configuration counts differ from the system");
  ParticleConfiguration<D> c;
  c.positions.assign(x.begin(), x.end());
  c.positions.insert(c.positions.end(), y.begin(), y.end());
  c.species = system.species_tags();
  return system.energy(c);
}

struct PbCounts {
  std::size_t n_plus;
  std::size_t n_minus;
  double q_minus;
};

// Electroneutral particle counts: Q_- = Q_+ + int rho_f and
// N_+- = ceil(Q_+- / (|z_+-| q)).
inline PbCounts pb_particle_counts(double q_plus, double free_charge,
                                   double q, double z_plus, double z_minus) {
  require(q > 0.0, "pb_particle_counts: q must be positive");
  require(z_plus > 0.0 && z_minus < 0.0,
          "pb_particle_counts: need z_+ > 0 > z_-");
  const double q_minus = q_plus + free_charge;
  if (q_minus <= 0.0)
    throw InfeasibleChargeError("pb_particle_counts: Q_- <= 0 is infeasible");
  // Ratios such as 10.1 / 0.1 land a few ulps above the integer in binary
  // floating point; ceil is taken after removing that noise.
  auto ceil_count = [](double v) {
    const double snapped = std::nearbyint(v);
    if (std::abs(v - snapped) <= 1e-9 * std::max(1.0, std::abs(v)))
      return static_cast<std::size_t>(snapped);
    return static_cast<std::size_t>(std::ceil(v));
  };
  return PbCounts{ceil_count(q_plus / (z_plus * q)),
                  ceil_count(q_minus / (std::abs(z_minus) * q)), q_minus};
}

}  // namespace rbmc
