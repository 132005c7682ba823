#pragma once

// Random Batch Monte Carlo.
//
// One outer iteration picks a particle i uniformly, runs m noisy gradient
// steps in which the smooth pair force is estimated from a random batch of
// p - 1 other particles,
//
//   X <- X - (grad U(X) + (N-1)/(p-1) sum_{j in batch} w_ij grad W1(X - X_j)) tau
//          + sqrt(2 tau / beta) z,
//
// and accepts the endpoint with probability
// min{1, exp(-beta sum_j (W2(X* - X_j) - W2(X_i - X_j)))}. Without a short
// range part every proposal is accepted and the method reduces to random
// batch Langevin dynamics.
//
// For a single species in mean-field weighting w = 1/(N-1), so the prefactor
// collapses to 1/(p-1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "rbmc/cell_list.hpp"
#include "rbmc/core.hpp"
#include "rbmc/domain.hpp"
#include "rbmc/gibbs.hpp"
#include "rbmc/measure.hpp"

namespace rbmc {

enum class BatchMode { per_step, per_iteration };

struct SamplerConfig {
  double beta = 1.0;
  std::size_t batch_size = 2;  // p
  std::size_t inner_steps = 1;  // m
  double tau = 0.01;
  std::uint64_t burn_in = 0;  // N_b
  std::uint64_t samples = 0;  // N_s
  std::uint64_t thin = 1;
  std::uint64_t seed = 0;
  std::size_t movers_per_iteration = 1;
  BatchMode batch_mode = BatchMode::per_step;

  void validate(std::size_t particles) const {
    require(beta > 0.0, "sampler: beta must be positive");
    require(batch_size >= 2, "sampler: batch size p must be > 1");
    require(batch_size <= particles, "sampler: batch size p exceeds N");
    require(inner_steps >= 1, "sampler: m must be >= 1");
    require(tau > 0.0 && std::isfinite(tau), "sampler: tau must be positive");
    require(thin >= 1, "sampler: thin must be >= 1");
    require(movers_per_iteration >= 1, "sampler: movers per iteration >= 1");
  }

  // Burn-in or sampling length given as physical time T; iterations = T/tau.
  static std::uint64_t iterations_for_time(double time, double tau) {
    require(time >= 0.0 && tau > 0.0, "iterations_for_time: invalid input");
    return static_cast<std::uint64_t>(std::llround(time / tau));
  }
};

template <std::size_t D>
struct ChainState {
  std::vector<Vec<D>> positions;
  std::vector<SpeciesIndex> species;
  std::uint64_t iteration = 0;
  std::mt19937_64 rng;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  // Incremented whenever particle i changes, so recorders can tell which
  // coordinates are new since the previous record.
  std::vector<std::uint64_t> version;

  std::size_t size() const { return positions.size(); }
  SpeciesIndex species_of(std::size_t i) const {
    return species.empty() ? 0 : species[i];
  }
  double acceptance_rate() const {
    return proposed == 0 ? 1.0
                         : static_cast<double>(accepted) /
                               static_cast<double>(proposed);
  }
};

// Uniform draws of k distinct indices from {0..n-1} \ {i}: a partial
// Fisher-Yates shuffle over a persistent permutation, O(k) per draw.
class BatchSampler {
 public:
  template <class Rng>
  void draw(Rng& rng, std::size_t n, std::size_t exclude, std::size_t k,
            std::vector<std::size_t>& out) {
    require(k <= n - 1, "batch: p - 1 exceeds N - 1");
    if (perm_.size() != n) {
      perm_.resize(n);
      where_.resize(n);
      for (std::size_t j = 0; j < n; ++j) perm_[j] = where_[j] = j;
    }
    swap_slots(where_[exclude], n - 1);
    out.resize(k);
    for (std::size_t t = 0; t < k; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, n - 2);
      swap_slots(t, pick(rng));
      out[t] = perm_[t];
    }
  }

 private:
  void swap_slots(std::size_t a, std::size_t b) {
    std::swap(perm_[a], perm_[b]);
    where_[perm_[a]] = a;
    where_[perm_[b]] = b;
  }
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> where_;
};

// What the sampler needs from a model. SpeciesSystem satisfies it; other
// models (e.g. the neuron ensemble) can also supply
//   bind(span<const Vec<D>>)                       called once before the run
//   drift(positions, species, i, x, batch)         replaces the batch force
//   on_accept(i, old_x, new_x)                     after each accepted move
template <class M, std::size_t D>
concept SamplerModel = requires(const M& m, SpeciesIndex s, const Vec<D>& x) {
  { m.external_gradient(s, x) } -> std::convertible_to<Vec<D>>;
  { m.pair_gradient(s, s, x, x) } -> std::convertible_to<Vec<D>>;
  { m.has_short_range() } -> std::convertible_to<bool>;
  { m.short_range_cutoff() } -> std::convertible_to<double>;
  { m.pair_short_energy(s, s, x, x) } -> std::convertible_to<double>;
  { m.domain() } -> std::convertible_to<const DomainSpec<D>&>;
  { m.total_count() } -> std::convertible_to<std::size_t>;
};

// grad U(x) + (N-1)/(p-1) sum_{j in batch} w_ij grad W1(x - X_j)
template <std::size_t D, class M>
Vec<D> batch_drift(M& model, std::span<const Vec<D>> positions,
                   std::span<const SpeciesIndex> species, std::size_t i,
                   const Vec<D>& x, std::span<const std::size_t> batch) {
  if constexpr (requires { model.drift(positions, species, i, x, batch); }) {
    return model.drift(positions, species, i, x, batch);
  } else {
    auto tag = [&](std::size_t j) -> SpeciesIndex {
      return species.empty() ? 0 : species[j];
    };
    const SpeciesIndex si = tag(i);
    Vec<D> g = model.external_gradient(si, x);
    if (!batch.empty()) {
      Vec<D> pair{};
      for (std::size_t j : batch)
        pair += model.pair_gradient(si, tag(j), x, positions[j]);
      const double factor = static_cast<double>(positions.size() - 1) /
                            static_cast<double>(batch.size());
      g += factor * pair;
    }
    return g;
  }
}

// One noisy gradient step from x with pinned batch and Gaussian z, followed
// by reflection into the domain.
template <std::size_t D, class M>
Vec<D> langevin_step(M& model, std::span<const Vec<D>> positions,
                     std::span<const SpeciesIndex> species, std::size_t i,
                     const Vec<D>& x, std::span<const std::size_t> batch,
                     const Vec<D>& z, double tau, double beta) {
  const Vec<D> g = batch_drift<D>(model, positions, species, i, x, batch);
  const double noise = std::sqrt(2.0 * tau / beta);
  Vec<D> y = x - tau * g + noise * z;
  return model.domain().reflect(y);
}

// m inner steps for particle i; advances state.rng.
template <std::size_t D, class M>
Vec<D> langevin_batch_proposal(M& model, ChainState<D>& state, std::size_t i,
                               const SamplerConfig& cfg, BatchSampler& batches,
                               std::vector<std::size_t>& batch) {
  const std::size_t n = state.size();
  const std::size_t k = cfg.batch_size - 1;
  require(k <= n - 1, "langevin_batch_proposal: p - 1 exceeds N - 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::span<const Vec<D>> pos(state.positions);
  std::span<const SpeciesIndex> spc(state.species);
  Vec<D> x = state.positions[i];
  for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
    if (step == 0 || cfg.batch_mode == BatchMode::per_step)
      batches.draw(state.rng, n, i, k, batch);
    Vec<D> z;
    for (auto& v : z) v = gauss(state.rng);
    x = langevin_step<D>(model, pos, spc, i, x, batch, z, cfg.tau, cfg.beta);
  }
  return x;
}

// sum_j (W2(x_new - X_j) - W2(X_i - X_j)) over every j != i.
template <std::size_t D, class M>
double short_range_delta_all_pairs(const M& model,
                                   std::span<const Vec<D>> positions,
                                   std::span<const SpeciesIndex> species,
                                   std::size_t i, const Vec<D>& x_new) {
  auto tag = [&](std::size_t j) -> SpeciesIndex {
    return species.empty() ? 0 : species[j];
  };
  const SpeciesIndex si = tag(i);
  double e_new = 0.0, e_old = 0.0;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (j == i) continue;
    e_new += model.pair_short_energy(si, tag(j), x_new, positions[j]);
    e_old += model.pair_short_energy(si, tag(j), positions[i], positions[j]);
  }
  if (std::isinf(e_new)) return infinity;
  return e_new - e_old;
}

// Same sum restricted to cell-list neighbours of the two positions. Pairs
// are visited in increasing j so the result equals the all-pairs sum exactly.
template <std::size_t D, class M>
double short_range_delta(const M& model, std::span<const Vec<D>> positions,
                         std::span<const SpeciesIndex> species, std::size_t i,
                         const Vec<D>& x_new, const CellList<D>& cells,
                         std::vector<std::size_t>& scratch) {
  auto tag = [&](std::size_t j) -> SpeciesIndex {
    return species.empty() ? 0 : species[j];
  };
  const SpeciesIndex si = tag(i);
  const double rc = model.short_range_cutoff();
  auto gather = [&](const Vec<D>& at) {
    scratch.clear();
    cells.for_each_neighbor(at, [&](std::size_t j) {
      if (j != i && norm(at - positions[j]) <= rc) scratch.push_back(j);
    });
    std::sort(scratch.begin(), scratch.end());
  };
  double e_new = 0.0, e_old = 0.0;
  gather(x_new);
  for (std::size_t j : scratch)
    e_new += model.pair_short_energy(si, tag(j), x_new, positions[j]);
  if (std::isinf(e_new)) return infinity;
  gather(positions[i]);
  for (std::size_t j : scratch)
    e_old += model.pair_short_energy(si, tag(j), positions[i], positions[j]);
  return e_new - e_old;
}

inline double acceptance_from_delta(double delta, double beta) {
  if (std::isnan(delta)) throw NumericError("metropolis: NaN energy change");
  if (delta <= 0.0) return 1.0;
  if (std::isinf(delta)) return 0.0;
  return std::exp(-beta * delta);
}

template <std::size_t D, class M>
double metropolis_ratio(const M& model, std::span<const Vec<D>> positions,
                        std::span<const SpeciesIndex> species, std::size_t i,
                        const Vec<D>& x_new, double beta,
                        const CellList<D>* cells = nullptr) {
  if (!model.has_short_range()) return 1.0;
  double delta;
  if (cells) {
    std::vector<std::size_t> scratch;
    delta = short_range_delta<D>(model, positions, species, i, x_new, *cells,
                                 scratch);
  } else {
    delta = short_range_delta_all_pairs<D>(model, positions, species, i, x_new);
  }
  return acceptance_from_delta(delta, beta);
}

struct RunStats {
  std::uint64_t iterations = 0;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t records = 0;
  double wall_seconds = 0.0;
  double acceptance_rate() const {
    return proposed == 0 ? 1.0
                         : static_cast<double>(accepted) /
                               static_cast<double>(proposed);
  }
};

// RNG for chain `chain` under base seed `seed`.
inline std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain) {
  return std::mt19937_64(mix_seed(seed, chain));
}

// Uniform initial placement over `region` (the domain itself unless an init
// box is supplied), with its own RNG stream so the sampler stream is
// unaffected by how many draws initialization takes.
template <std::size_t D>
std::vector<Vec<D>> uniform_initial_positions(const DomainSpec<D>& region,
                                              std::size_t n,
                                              std::uint64_t seed,
                                              std::uint64_t chain) {
  std::mt19937_64 rng(mix_seed(mix_seed(seed, chain), 0x1417ULL));
  std::vector<Vec<D>> x(n);
  for (auto& xi : x) xi = region.sample_uniform(rng);
  return x;
}

// Runs N_b burn-in and N_s sampling iterations. `record(state)` is called
// after every thin-th sampling iteration.
template <std::size_t D, class M, class Record>
  requires SamplerModel<std::remove_cvref_t<M>, D>
RunStats rbmc_run(M&& model, ChainState<D>& state, const SamplerConfig& cfg,
                  Record&& record) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = state.size();
  require(n >= 2, "rbmc_run: at least two particles required");
  require(model.total_count() == n, "rbmc_run: configuration size mismatch");
  cfg.validate(n);
  if (!state.species.empty())
    require(state.species.size() == n, "rbmc_run: species tags mismatch");
  const auto& domain = model.domain();
  for (const auto& x : state.positions) {
    if (!all_finite(x)) throw NumericError("rbmc_run: non-finite position");
    if (domain.bounded())
      require(domain.contains(x), "rbmc_run: initial position outside domain");
  }
  if (state.version.size() != n) state.version.assign(n, 0);

  if constexpr (requires { model.bind(std::span<const Vec<D>>{}); })
    model.bind(std::span<const Vec<D>>(state.positions));

  const bool short_range = model.has_short_range();
  const bool use_cells = short_range && domain.bounded();
  CellList<D> cells;
  if (use_cells) {
    cells = CellList<D>(domain.lower_corner(), domain.upper_corner(),
                        model.short_range_cutoff());
    cells.build(std::span<const Vec<D>>(state.positions));
  }

  BatchSampler batches;
  std::vector<std::size_t> batch, scratch;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  RunStats stats;

  auto iterate = [&]() {
    for (std::size_t mv = 0; mv < cfg.movers_per_iteration; ++mv) {
      const std::size_t i = pick(state.rng);
      const Vec<D> proposal =
          langevin_batch_proposal<D>(model, state, i, cfg, batches, batch);
      if (!all_finite(proposal))
        throw NumericError("rbmc_run: proposal diverged (reduce tau)");
      bool accept = true;
      if (short_range) {
        std::span<const Vec<D>> pos(state.positions);
        std::span<const SpeciesIndex> spc(state.species);
        const double delta =
            use_cells ? short_range_delta<D>(model, pos, spc, i, proposal,
                                             cells, scratch)
                      : short_range_delta_all_pairs<D>(model, pos, spc, i,
                                                      proposal);
        const double a = acceptance_from_delta(delta, cfg.beta);
        accept = a >= 1.0 || u01(state.rng) < a;
      }
      ++state.proposed;
      if (accept) {
        ++state.accepted;
        const Vec<D> old = state.positions[i];
        state.positions[i] = proposal;
        ++state.version[i];
        if (use_cells) cells.move(i, proposal);
        if constexpr (requires { model.on_accept(i, old, proposal); })
          model.on_accept(i, old, proposal);
      }
    }
    ++state.iteration;
  };

  const std::uint64_t p0 = state.proposed, a0 = state.accepted;
  for (std::uint64_t it = 0; it < cfg.burn_in; ++it) iterate();
  for (std::uint64_t it = 1; it <= cfg.samples; ++it) {
    iterate();
    if (it % cfg.thin == 0) {
      record(static_cast<const ChainState<D>&>(state));
      ++stats.records;
    }
  }
  stats.iterations = cfg.burn_in + cfg.samples;
  stats.proposed = state.proposed - p0;
  stats.accepted = state.accepted - a0;
  stats.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  return stats;
}

// Convenience: build the chain state from an initial configuration.
template <std::size_t D, class M, class Record>
RunStats rbmc_run(M&& model, const ParticleConfiguration<D>& initial,
                  const SamplerConfig& cfg, std::uint64_t chain,
                  Record&& record, ChainState<D>* final_state = nullptr) {
  ChainState<D> state;
  state.positions = initial.positions;
  state.species = initial.species;
  state.rng = chain_rng(cfg.seed, chain);
  RunStats s = rbmc_run<D>(std::forward<M>(model), state, cfg,
                           std::forward<Record>(record));
  if (final_state) *final_state = std::move(state);
  return s;
}

// Full recorded configurations.
template <std::size_t D>
struct SampleStream {
  std::uint64_t chain = 0;
  std::size_t particles = 0;
  std::vector<SpeciesIndex> species;
  std::vector<std::uint64_t> iterations;
  std::vector<Vec<D>> positions;  // records x particles, row-major

  std::size_t records() const { return iterations.size(); }
  auto recorder() {
    return [this](const ChainState<D>& s) {
      if (particles == 0) {
        particles = s.size();
        species = s.species;
      }
      iterations.push_back(s.iteration);
      positions.insert(positions.end(), s.positions.begin(), s.positions.end());
    };
  }
};

// mu_bar = (1/(N N_s)) sum over all recorded particles (optionally only those
// of one species).
template <std::size_t D>
EmpiricalMeasure<D> empirical_from_samples(const SampleStream<D>& stream,
                                           int species = -1) {
  if (stream.records() == 0)
    throw EmptyMeasureError("empirical_from_samples: no recorded samples");
  EmpiricalMeasure<D> mu;
  mu.set_species(species);
  const std::size_t n = stream.particles;
  for (std::size_t r = 0; r < stream.records(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const SpeciesIndex s = stream.species.empty() ? 0 : stream.species[i];
      if (species >= 0 && s != static_cast<SpeciesIndex>(species)) continue;
      mu.add(stream.positions[r * n + i]);
    }
  if (mu.empty())
    throw EmptyMeasureError("empirical_from_samples: species has no particles");
  return mu;
}

// Records straight into per-species measures. Coordinates that have not
// changed since the previous record only increase the multiplicity of the
// atom already stored, so a one-mover chain costs O(changed) per record.
template <std::size_t D>
class MeasureRecorder {
 public:
  explicit MeasureRecorder(std::size_t species_count = 1)
      : measures_(species_count) {
    for (std::size_t k = 0; k < species_count; ++k)
      measures_[k].set_species(static_cast<int>(k));
  }

  void operator()(const ChainState<D>& s) {
    const std::size_t n = s.size();
    if (atom_.size() != n) {
      atom_.assign(n, kNone);
      seen_version_.assign(n, 0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& mu = measures_.at(s.species_of(i));
      if (atom_[i] != kNone && seen_version_[i] == s.version[i]) {
        mu.bump(atom_[i]);
      } else {
        atom_[i] = mu.atoms();
        seen_version_[i] = s.version[i];
        mu.add(s.positions[i]);
      }
    }
    ++records_;
  }

  const EmpiricalMeasure<D>& measure(std::size_t species = 0) const {
    return measures_.at(species);
  }
  std::vector<EmpiricalMeasure<D>>& measures() { return measures_; }
  std::uint64_t records() const { return records_; }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<EmpiricalMeasure<D>> measures_;
  std::vector<std::size_t> atom_;
  std::vector<std::uint64_t> seen_version_;
  std::uint64_t records_ = 0;
};

}  // namespace rbmc
