#pragma once

// Config-driven experiment runners. Each run_* writes its CSV files and a
// manifest.json into the output directory and returns a summary object that
// is also stored in the manifest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbmc/config.hpp"
#include "rbmc/diagnostics.hpp"
#include "rbmc/gibbs.hpp"
#include "rbmc/grid.hpp"
#include "rbmc/io.hpp"
#include "rbmc/neural.hpp"
#include "rbmc/oracle.hpp"
#include "rbmc/potentials.hpp"
#include "rbmc/sampler.hpp"

namespace rbmc::experiments {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunOutput {
  fs::path dir;
  json summary;
};

// ---------------------------------------------------------------------------
// Config translation

inline SamplerConfig sampler_from(const Config& c, std::size_t particles,
                                  std::uint64_t seed) {
  SamplerConfig s;
  s.beta = c.real("sampler", "beta");
  const auto p = static_cast<std::size_t>(c.integer("sampler", "batch_size"));
  s.batch_size = p == 0 ? particles : p;
  s.inner_steps = static_cast<std::size_t>(c.integer("sampler", "inner_steps"));
  s.tau = c.real("sampler", "tau");
  if (c.has("sampler", "burn_in"))
    s.burn_in = static_cast<std::uint64_t>(c.integer("sampler", "burn_in"));
  else if (c.has("sampler", "burn_in_time"))
    s.burn_in = SamplerConfig::iterations_for_time(
        c.real("sampler", "burn_in_time"), s.tau);
  if (c.has("sampler", "samples"))
    s.samples = static_cast<std::uint64_t>(c.integer("sampler", "samples"));
  else if (c.has("sampler", "sample_time"))
    s.samples = SamplerConfig::iterations_for_time(
        c.real("sampler", "sample_time"), s.tau);
  s.thin = static_cast<std::uint64_t>(c.integer("sampler", "thin"));
  const std::string& movers = c.text("sampler", "movers_per_iteration");
  s.movers_per_iteration =
      movers == "all" ? particles
                      : static_cast<std::size_t>(Config::parse_integer(
                            movers, "sampler.movers_per_iteration"));
  s.batch_mode = c.text("sampler", "batch_mode") == "per_iteration"
                     ? BatchMode::per_iteration
                     : BatchMode::per_step;
  s.seed = seed;
  return s;
}

inline json sampler_json(const SamplerConfig& s) {
  return json{{"beta", s.beta},
              {"batch_size", s.batch_size},
              {"inner_steps", s.inner_steps},
              {"tau", s.tau},
              {"burn_in", s.burn_in},
              {"samples", s.samples},
              {"thin", s.thin},
              {"movers_per_iteration", s.movers_per_iteration},
              {"seed", s.seed}};
}

inline PicardOptions picard_from(const Config& c) {
  PicardOptions o;
  o.damping = c.real("oracle", "damping");
  o.tol = c.real("oracle", "tol");
  o.max_iter = static_cast<std::size_t>(c.integer("oracle", "max_iter"));
  return o;
}

// ---------------------------------------------------------------------------
// Poisson-Boltzmann systems

struct PbParams {
  double epsilon = 1.0;
  double free_charge = 0.5;
  double q_plus = 2.0;
  std::size_t n_plus = 64;
  double z_plus = 1.0;
  double z_minus = -1.0;
  double inner = 1.0;
  double outer = 15.0;
  double split_cutoff = 0.1;
  double lj_epsilon = 0.0;
  double lj_sigma = 0.1;
  double beta = 1.0;

  double q() const { return q_plus / (z_plus * static_cast<double>(n_plus)); }
  PbCounts counts() const {
    return pb_particle_counts(q_plus, free_charge, q(), z_plus, z_minus);
  }
  double q_minus() const { return q_plus + free_charge; }
  // Net charge of the particle system plus the free charge, in units of q.
  double charge_audit() const {
    const auto n = counts();
    return static_cast<double>(n.n_plus) * q() * z_plus +
           static_cast<double>(n.n_minus) * q() * z_minus + free_charge;
  }
};

inline PbParams pb_params_from(const Config& c) {
  PbParams p;
  p.epsilon = c.real("pb", "epsilon");
  p.free_charge = c.real("pb", "free_charge");
  p.q_plus = c.real("pb", "q_plus");
  if (c.has("pb", "n_plus"))
    p.n_plus = static_cast<std::size_t>(c.integer("pb", "n_plus"));
  p.z_plus = c.real("pb", "z_plus");
  p.z_minus = c.real("pb", "z_minus");
  p.inner = c.real("pb", "inner");
  p.outer = c.real("pb", "outer");
  if (c.has("pb", "split_cutoff")) p.split_cutoff = c.real("pb", "split_cutoff");
  if (c.has("pb", "lj_epsilon")) p.lj_epsilon = c.real("pb", "lj_epsilon");
  if (c.has("pb", "lj_sigma")) p.lj_sigma = c.real("pb", "lj_sigma");
  p.beta = c.real("sampler", "beta");
  require(p.epsilon > 0.0, "pb: epsilon must be positive");
  require(p.q_plus > 0.0, "pb: q_plus must be positive");
  require(p.n_plus >= 2, "pb: n_plus must be >= 2");
  require(p.inner < p.outer, "pb: need inner < outer");
  return p;
}

// In 1D the field of a unit charge solving -eps phi'' = delta is
// -|x| / (2 eps); coulomb_1d is the opposite-sign |x| / (2 eps) kernel.
inline PairKernel pb1d_kernel(double epsilon) {
  return coulomb_1d(epsilon).scaled(-1.0);
}

// Cations (species 0) and anions (species 1) in the box (inner, outer), the
// free charge at the origin, energies divided by q.
inline SpeciesSystem<1> pb1d_system(const PbParams& p) {
  const auto n = p.counts();
  const PairKernel w = pb1d_kernel(p.epsilon);
  const auto field = ExternalPotential<1>::field(w, p.free_charge);
  std::vector<Species<1>> sp = {
      {"plus", field.scaled(p.z_plus), n.n_plus, p.z_plus},
      {"minus", field.scaled(p.z_minus), n.n_minus, p.z_minus}};
  SpeciesSystem<1> sys(std::move(sp), PairWeightMode::charge_unit, p.q());
  sys.set_kernel_all(w);
  sys.set_domain(DomainSpec<1>::box(p.inner, p.outer));
  return sys;
}

// 3D: colloid of radius `inner` with the free charge at its center, Coulomb
// split at r_c into a smooth batch part and a Metropolis part, plus a
// Lennard-Jones core truncated at sigma (its repulsive branch).
inline SpeciesSystem<3> pb3d_system(const PbParams& p) {
  const auto n = p.counts();
  const auto field =
      ExternalPotential<3>::field(PairKernel::coulomb_3d(p.epsilon), p.free_charge);
  std::vector<Species<3>> sp = {
      {"plus", field.scaled(p.z_plus), n.n_plus, p.z_plus},
      {"minus", field.scaled(p.z_minus), n.n_minus, p.z_minus}};
  SpeciesSystem<3> sys(std::move(sp), PairWeightMode::charge_unit, p.q());
  sys.set_kernel_all(coulomb_3d_split(p.epsilon, p.split_cutoff));
  if (p.lj_epsilon > 0.0)
    sys.set_core(lennard_jones(p.lj_epsilon, p.lj_sigma), p.lj_sigma);
  sys.set_domain(DomainSpec<3>::annulus(p.inner, p.outer));
  return sys;
}

// Mean-field limit: phi_k = z_k U_f + sum_l z_k z_l (Q_l / |z_l|) W * rho_l
// with probability densities rho_l.
inline MeanFieldProblem pb_problem(const PbParams& p, const Grid& grid,
                                   const PairKernel& w,
                                   const std::vector<double>& u_free) {
  const double z[2] = {p.z_plus, p.z_minus};
  const double count[2] = {p.q_plus / p.z_plus,
                           p.q_minus() / std::abs(p.z_minus)};
  MeanFieldProblem mp;
  mp.grid = grid;
  mp.beta = p.beta;
  mp.external.resize(2);
  mp.coupling.assign(2, std::vector<double>(2));
  mp.kernels.assign(2, std::vector<PairKernel>(2, w));
  for (int k = 0; k < 2; ++k) {
    mp.external[k].resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      mp.external[k][i] = z[k] * u_free[i];
    for (int l = 0; l < 2; ++l) mp.coupling[k][l] = z[k] * z[l] * count[l];
  }
  return mp;
}

inline MeanFieldProblem pb1d_problem(const PbParams& p, std::size_t nodes) {
  Grid g(p.inner, p.outer, nodes);
  const PairKernel w = pb1d_kernel(p.epsilon);
  const auto u = g.sample([&](double x) { return p.free_charge * w.total(x); });
  return pb_problem(p, g, w, u);
}

inline MeanFieldProblem pb3d_problem(const PbParams& p, std::size_t nodes) {
  Grid g(p.inner, p.outer, nodes, GridGeometry::radial3d);
  const PairKernel w = PairKernel::coulomb_3d(p.epsilon);
  const auto u = g.sample([&](double r) { return p.free_charge * w.total(r); });
  return pb_problem(p, g, w, u);
}

// ---------------------------------------------------------------------------
// Helpers

template <std::size_t D>
std::vector<double> bin_fractions(const EmpiricalMeasure<D>& mu, double lo,
                                  double hi, std::size_t bins) {
  std::vector<double> h(bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k < mu.atoms(); ++k) {
    const double x = histogram_coordinate(mu.point(k));
    if (!(x >= lo && x <= hi)) continue;
    auto b = static_cast<std::size_t>((x - lo) / width);
    h[std::min(b, bins - 1)] += mu.weight(k);
  }
  return h;
}

template <std::size_t D>
DomainSpec<D> init_region(const Config& c, const DomainSpec<D>& domain) {
  if (c.has("sampler", "init_lo")) {
    const double lo = c.real("sampler", "init_lo");
    const double hi = c.real("sampler", "init_hi");
    if constexpr (D == 1) {
      return DomainSpec<1>::box(lo, hi);
    } else {
      return DomainSpec<D>::annulus(lo, hi);
    }
  }
  return domain;
}

// Thinned writer for samples.csv; keeps at most `cap` evenly spaced records
// per chain.
template <std::size_t D>
class SampleCsv {
 public:
  SampleCsv(const fs::path& path, std::uint64_t expected_records,
            std::uint64_t cap)
      : csv_(path, header()),
        stride_(cap == 0 ? 0
                         : std::max<std::uint64_t>(
                               1, (expected_records + cap - 1) / cap)) {}

  void begin_chain(std::uint64_t chain) {
    chain_ = chain;
    seen_ = 0;
  }
  void operator()(const ChainState<D>& s) {
    if (stride_ == 0) return;
    if (seen_++ % stride_ != 0) return;
    for (std::size_t i = 0; i < s.size(); ++i) {
      csv_.cell(chain_).cell(s.iteration).cell(i).cell(
          static_cast<std::uint64_t>(s.species_of(i)));
      for (std::size_t d = 0; d < D; ++d) csv_.cell(s.positions[i][d]);
      csv_.end_row();
    }
  }
  void close() { csv_.close(); }

 private:
  static std::vector<std::string> header() {
    std::vector<std::string> h = {"chain", "iteration", "particle", "species"};
    for (std::size_t d = 0; d < D; ++d) h.push_back("x" + std::to_string(d));
    return h;
  }
  CsvWriter csv_;
  std::uint64_t stride_;
  std::uint64_t chain_ = 0, seen_ = 0;
};

// Runs `chains` independent chains of a species system and merges their
// per-species measures.
template <std::size_t D, class Extra>
std::vector<EmpiricalMeasure<D>> sample_system(
    const SpeciesSystem<D>& sys, const SamplerConfig& cfg,
    const DomainSpec<D>& init, std::size_t chains, RunStats& total,
    Extra&& extra) {
  std::vector<EmpiricalMeasure<D>> merged(sys.species_count());
  for (std::size_t k = 0; k < merged.size(); ++k)
    merged[k].set_species(static_cast<int>(k));
  for (std::size_t ch = 0; ch < chains; ++ch) {
    ParticleConfiguration<D> c;
    c.positions =
        uniform_initial_positions<D>(init, sys.total_count(), cfg.seed, ch);
    c.species = sys.species_tags();
    MeasureRecorder<D> rec(sys.species_count());
    extra.begin_chain(ch);
    auto both = [&](const ChainState<D>& s) {
      rec(s);
      extra(s);
    };
    const RunStats st = rbmc_run<D>(sys, c, cfg, ch, both);
    total.iterations += st.iterations;
    total.proposed += st.proposed;
    total.accepted += st.accepted;
    total.records += st.records;
    total.wall_seconds += st.wall_seconds;
    for (std::size_t k = 0; k < merged.size(); ++k)
      merged[k].append(rec.measure(k));
  }
  return merged;
}

struct NoExtra {
  void begin_chain(std::uint64_t) {}
  template <class S>
  void operator()(const S&) {}
};

inline json stats_json(const RunStats& s) {
  return json{{"iterations", s.iterations},
              {"proposed", s.proposed},
              {"accepted", s.accepted},
              {"acceptance_rate", s.acceptance_rate()},
              {"records", s.records},
              {"sampler_seconds", s.wall_seconds}};
}

inline json picard_json(const PicardResult& r) {
  return json{{"iterations", r.iterations}, {"residual", r.residual}};
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline void finish(Manifest& m, const fs::path& dir, const json& summary,
                   const Timer& t) {
  m.set("summary", summary);
  m.set("wall_seconds", t.seconds());
  m.write(dir / "manifest.json");
}

inline std::uint64_t seed_of(const Config& c) {
  return static_cast<std::uint64_t>(c.integer("experiment", "seed"));
}

// ---------------------------------------------------------------------------
// pb1d: density.csv, samples.csv

inline RunOutput run_pb1d(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  const PbParams p = pb_params_from(c);
  const auto counts = p.counts();
  const SpeciesSystem<1> sys = pb1d_system(p);
  const SamplerConfig cfg = sampler_from(c, sys.total_count(), seed_of(c));
  const auto chains = static_cast<std::size_t>(c.integer("sampler", "chains"));

  const MeanFieldProblem prob =
      pb1d_problem(p, static_cast<std::size_t>(c.integer("oracle", "nodes")));
  const PicardResult ora = picard_solve(prob, picard_from(c));

  const bool write_samples = c.boolean("output", "write_samples");
  const std::uint64_t records_per_chain = cfg.samples / cfg.thin;
  const auto cap = static_cast<std::uint64_t>(
      write_samples ? c.integer("output", "max_sample_records") : 0);
  SampleCsv<1> samples(dir / "samples.csv", records_per_chain, cap);
  RunStats stats;
  const auto mu = sample_system<1>(sys, cfg, init_region<1>(c, sys.domain()),
                                   chains, stats, samples);
  samples.close();

  const auto bins = static_cast<std::size_t>(c.integer("diagnostics", "bins"));
  const double lo = p.inner, hi = p.outer;
  const double width = (hi - lo) / static_cast<double>(bins);
  const double charge[2] = {p.q_plus, p.q_minus()};
  std::vector<std::vector<double>> h = {bin_fractions(mu[0], lo, hi, bins),
                                        bin_fractions(mu[1], lo, hi, bins)};
  CsvWriter dens(dir / "density.csv",
                 {"x", "rho_plus", "rho_minus", "oracle_plus", "oracle_minus"});
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b), e = a + width;
    dens.cell(a + 0.5 * width);
    for (int k = 0; k < 2; ++k) dens.cell(charge[k] * h[k][b] / width);
    for (int k = 0; k < 2; ++k)
      dens.cell(charge[k] * ora.density(k).mass(a, e) / width);
    dens.end_row();
  }
  dens.close();

  auto x2 = [](const Vec<1>& x) { return x[0] * x[0]; };
  json summary = {
      {"particles", {{"n_plus", counts.n_plus}, {"n_minus", counts.n_minus}}},
      {"q", p.q()},
      {"charge_audit", p.charge_audit()},
      {"sampler", sampler_json(cfg)},
      {"chains", chains},
      {"stats", stats_json(stats)},
      {"oracle", picard_json(ora)},
      {"weak_error_x2",
       {weak_error<1>(mu[0], ora.density(0), x2),
        weak_error<1>(mu[1], ora.density(1), x2)}},
      {"tv", {tv_histogram<1>(mu[0], ora.density(0), bins),
              tv_histogram<1>(mu[1], ora.density(1), bins)}}};
  m.note("initial positions uniform over " +
         init_region<1>(c, sys.domain()).describe());
  m.note("system: " + sys.describe());
  m.note("densities normalized so that int rho_+- dx = Q_+-");
  m.set("acceptance_rate", stats.acceptance_rate());
  m.file("density.csv");
  m.file("samples.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

// ---------------------------------------------------------------------------
// pb3d: density_radial.csv, samples.csv

inline RunOutput run_pb3d(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  const PbParams p = pb_params_from(c);
  const auto counts = p.counts();
  const SpeciesSystem<3> sys = pb3d_system(p);
  const SamplerConfig cfg = sampler_from(c, sys.total_count(), seed_of(c));
  const auto chains = static_cast<std::size_t>(c.integer("sampler", "chains"));

  const MeanFieldProblem prob =
      pb3d_problem(p, static_cast<std::size_t>(c.integer("oracle", "nodes")));
  const PicardResult ora = picard_solve(prob, picard_from(c));

  const bool write_samples = c.boolean("output", "write_samples");
  const auto cap = static_cast<std::uint64_t>(
      write_samples ? c.integer("output", "max_sample_records") : 0);
  SampleCsv<3> samples(dir / "samples.csv", cfg.samples / cfg.thin, cap);
  RunStats stats;
  const auto mu = sample_system<3>(sys, cfg, init_region<3>(c, sys.domain()),
                                   chains, stats, samples);
  samples.close();

  double rmin = infinity, rmax = 0.0;
  for (const auto& m_k : mu)
    for (std::size_t a = 0; a < m_k.atoms(); ++a) {
      const double r = norm(m_k.point(a));
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }

  const auto bins = static_cast<std::size_t>(c.integer("diagnostics", "bins"));
  const double lo = p.inner, hi = p.outer;
  const double width = (hi - lo) / static_cast<double>(bins);
  const double charge[2] = {p.q_plus, p.q_minus()};
  std::vector<std::vector<double>> h = {bin_fractions(mu[0], lo, hi, bins),
                                        bin_fractions(mu[1], lo, hi, bins)};
  CsvWriter dens(dir / "density_radial.csv",
                 {"r", "rho_plus", "rho_minus", "oracle_plus", "oracle_minus"});
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b), e = a + width;
    const double shell = 4.0 * pi / 3.0 * (e * e * e - a * a * a);
    dens.cell(a + 0.5 * width);
    for (int k = 0; k < 2; ++k) dens.cell(charge[k] * h[k][b] / shell);
    for (int k = 0; k < 2; ++k)
      dens.cell(charge[k] * ora.density(k).mass(a, e) / shell);
    dens.end_row();
  }
  dens.close();

  json summary = {
      {"particles", {{"n_plus", counts.n_plus}, {"n_minus", counts.n_minus}}},
      {"q", p.q()},
      {"charge_audit", p.charge_audit()},
      {"sampler", sampler_json(cfg)},
      {"chains", chains},
      {"stats", stats_json(stats)},
      {"oracle", picard_json(ora)},
      {"radius_min", rmin},
      {"radius_max", rmax},
      {"tv", {tv_histogram<3>(mu[0], ora.density(0), bins),
              tv_histogram<3>(mu[1], ora.density(1), bins)}}};
  m.note("external potential U(r) = z Q_f / (4 pi eps r) for r > inner: the "
         "free charge sits at the origin and every ion stays outside the "
         "colloid, so no regularization of W is active");
  m.note("Lennard-Jones core truncated at sigma; split Coulomb kernel with "
         "r_c = " + format_double(p.split_cutoff));
  m.note("initial positions uniform over " +
         init_region<3>(c, sys.domain()).describe());
  m.note("system: " + sys.describe());
  m.note("densities normalized so that int rho_+- 4 pi r^2 dr = Q_+-");
  m.set("acceptance_rate", stats.acceptance_rate());
  m.file("density_radial.csv");
  m.file("samples.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

// ---------------------------------------------------------------------------
// convergence: rates.csv, runs.csv

// sum of x^2 per species over all recorded configurations.
struct MomentRecorder {
  double sum[2] = {0.0, 0.0};
  std::uint64_t count[2] = {0, 0};
  void operator()(const ChainState<1>& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto k = s.species_of(i);
      sum[k] += s.positions[i][0] * s.positions[i][0];
      ++count[k];
    }
  }
  double mean(int k) const { return sum[k] / static_cast<double>(count[k]); }
};

inline RunOutput run_convergence(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  PbParams base = pb_params_from(c);
  const auto n_values = c.integer_list("convergence", "n_values");
  const auto reps =
      static_cast<std::size_t>(c.integer("convergence", "repetitions"));
  require(reps >= 1, "convergence: repetitions must be >= 1");
  const std::uint64_t seed = seed_of(c);

  base.n_plus = 2;  // the mean-field limit does not depend on N_+
  const MeanFieldProblem prob =
      pb1d_problem(base, static_cast<std::size_t>(c.integer("oracle", "nodes")));
  const PicardResult ora = picard_solve(prob, picard_from(c));
  double ref[2];
  for (int k = 0; k < 2; ++k)
    ref[k] = ora.density(k).expectation([](double x) { return x * x; });

  CsvWriter runs(dir / "runs.csv", {"N", "err_plus", "err_minus", "repetition"});
  std::vector<double> ns, errs;
  json per_n = json::array();
  RunStats all;
  std::uint64_t min_points = std::numeric_limits<std::uint64_t>::max();
  for (const auto n_plus : n_values) {
    PbParams p = base;
    p.n_plus = static_cast<std::size_t>(n_plus);
    const SpeciesSystem<1> sys = pb1d_system(p);
    std::vector<double> ep, em;
    for (std::size_t r = 0; r < reps; ++r) {
      const std::uint64_t s =
          mix_seed(mix_seed(seed, static_cast<std::uint64_t>(n_plus)), r);
      const SamplerConfig cfg = sampler_from(c, sys.total_count(), s);
      ParticleConfiguration<1> init;
      init.positions = uniform_initial_positions<1>(
          init_region<1>(c, sys.domain()), sys.total_count(), s, 0);
      init.species = sys.species_tags();
      MomentRecorder rec;
      const RunStats st = rbmc_run<1>(sys, init, cfg, 0, rec);
      all.iterations += st.iterations;
      all.records += st.records;
      all.wall_seconds += st.wall_seconds;
      min_points = std::min(min_points, rec.count[0] + rec.count[1]);
      ep.push_back(weak_error(ref[0], rec.mean(0)));
      em.push_back(weak_error(ref[1], rec.mean(1)));
      runs.row(static_cast<std::uint64_t>(n_plus), ep.back(), em.back(),
               static_cast<std::uint64_t>(r));
    }
    const double e = mswe(ep, em);
    ns.push_back(static_cast<double>(n_plus));
    errs.push_back(e);
    per_n.push_back(json{{"N", n_plus}, {"mswe", e}});
  }
  runs.close();

  std::optional<RateFit> fit;
  {
    std::vector<double> distinct = ns;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    if (distinct.size() >= 2) fit = fit_rate(ns, errs);
  }
  CsvWriter rates(dir / "rates.csv", {"N", "mswe", "slope"});
  for (std::size_t i = 0; i < ns.size(); ++i) {
    rates.cell(static_cast<std::uint64_t>(ns[i])).cell(errs[i]);
    if (fit)
      rates.cell(fit->slope);
    else
      rates.blank();
    rates.end_row();
  }
  rates.close();

  json summary = {{"reference_x2", {ref[0], ref[1]}},
                  {"oracle", picard_json(ora)},
                  {"repetitions", reps},
                  {"min_points_per_run", min_points},
                  {"mswe", per_n},
                  {"stats", stats_json(all)}};
  summary["slope"] = fit ? json(fit->slope) : json(nullptr);
  m.note("reference moments from the mean-field oracle with Q_+- fixed");
  m.set("acceptance_rate", 1.0);
  m.file("rates.csv");
  m.file("runs.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

// ---------------------------------------------------------------------------
// Generic single-species 1D systems (fixedpoint, exactness)

inline PairKernel system_kernel(const Config& c) {
  const std::string& k = c.text("system", "kernel");
  const double a = c.real("system", "kernel_amplitude");
  if (k == "zero") return PairKernel::zero();
  if (k == "gaussian")
    return PairKernel::gaussian(a, c.real("system", "kernel_length"));
  if (k == "constant") return PairKernel::constant(a);
  if (k == "harmonic") return PairKernel::harmonic(a);
  return coulomb_1d(c.real("system", "kernel_epsilon"));
}

inline ExternalPotential<1> system_potential(const Config& c) {
  if (c.text("system", "potential") == "zero") return ExternalPotential<1>::zero();
  return ExternalPotential<1>::quadratic(c.real("system", "stiffness"));
}

inline DomainSpec<1> system_domain(const Config& c) {
  if (c.text("system", "domain") == "box")
    return DomainSpec<1>::box(c.real("system", "domain_lo"),
                              c.real("system", "domain_hi"));
  return DomainSpec<1>::all_space();
}

inline SpeciesSystem<1> single_species_system(const Config& c, std::size_t n) {
  SpeciesSystem<1> sys({{"x", system_potential(c), n, 1.0}},
                       PairWeightMode::mean_field);
  sys.set_kernel_all(system_kernel(c));
  sys.set_domain(system_domain(c));
  return sys;
}

inline Grid system_grid(const Config& c) {
  return Grid(c.real("system", "grid_lo"), c.real("system", "grid_hi"),
              static_cast<std::size_t>(c.integer("oracle", "nodes")));
}

inline DomainSpec<1> system_init(const Config& c, const DomainSpec<1>& d) {
  if (c.has("sampler", "init_lo")) return init_region<1>(c, d);
  if (d.bounded()) return d;
  return DomainSpec<1>::box(c.real("system", "grid_lo"),
                            c.real("system", "grid_hi"));
}

// fixedpoint: tv.csv, density.csv
inline RunOutput run_fixedpoint(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  const Grid grid = system_grid(c);
  const double beta = c.real("sampler", "beta");
  const auto u = system_potential(c);
  const PicardResult ora = picard_fixed_point(
      [&](double x) { return u.evaluate(Vec<1>{x}); }, system_kernel(c), beta,
      grid, picard_from(c));
  const auto bins = static_cast<std::size_t>(c.integer("diagnostics", "bins"));
  const auto chains = static_cast<std::size_t>(c.integer("sampler", "chains"));
  const double lo = grid.lo(), hi = grid.hi();
  const double width = (hi - lo) / static_cast<double>(bins);

  CsvWriter tv_csv(dir / "tv.csv", {"N", "tv", "points"});
  CsvWriter dens(dir / "density.csv", {"x", "N", "rho_sampled", "rho_oracle"});
  json per_n = json::array();
  RunStats all;
  for (const auto n : c.integer_list("system", "n_values")) {
    const SpeciesSystem<1> sys =
        single_species_system(c, static_cast<std::size_t>(n));
    const SamplerConfig cfg = sampler_from(
        c, sys.total_count(),
        mix_seed(seed_of(c), static_cast<std::uint64_t>(n)));
    NoExtra none;
    RunStats st;
    const auto mu = sample_system<1>(sys, cfg, system_init(c, sys.domain()),
                                     chains, st, none);
    all.iterations += st.iterations;
    all.records += st.records;
    all.wall_seconds += st.wall_seconds;
    const double tv = tv_histogram<1>(mu[0], ora.density(), bins);
    tv_csv.row(static_cast<std::uint64_t>(n), tv, mu[0].total_count());
    per_n.push_back(
        json{{"N", n}, {"tv", tv}, {"points", mu[0].total_count()}});
    const auto h = bin_fractions(mu[0], lo, hi, bins);
    for (std::size_t b = 0; b < bins; ++b) {
      const double a = lo + width * static_cast<double>(b);
      dens.row(a + 0.5 * width, static_cast<std::uint64_t>(n), h[b] / width,
               ora.density().mass(a, a + width) / width);
    }
  }
  tv_csv.close();
  dens.close();
  json summary = {{"oracle", picard_json(ora)},
                  {"tv", per_n},
                  {"stats", stats_json(all)}};
  m.set("acceptance_rate", 1.0);
  m.file("tv.csv");
  m.file("density.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

inline double normal_cdf(double x, double sd) {
  return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0)));
}

// exactness: tv.csv over the step-size list at equal physical time.
inline RunOutput run_exactness(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  const Grid grid = system_grid(c);
  const double beta = c.real("sampler", "beta");
  const auto u = system_potential(c);
  const auto n = static_cast<std::size_t>(c.integer("system", "particles"));
  const SpeciesSystem<1> sys = single_species_system(c, n);
  const bool gaussian = c.text("system", "potential") == "quadratic" &&
                        c.text("system", "kernel") == "zero" &&
                        !sys.domain().bounded();
  const double sd =
      gaussian ? 1.0 / std::sqrt(beta * c.real("system", "stiffness")) : 0.0;
  std::optional<PicardResult> ora;
  if (!gaussian)
    ora = picard_fixed_point([&](double x) { return u.evaluate(Vec<1>{x}); },
                             system_kernel(c), beta, grid, picard_from(c));
  const auto bins = static_cast<std::size_t>(c.integer("diagnostics", "bins"));
  const auto chains = static_cast<std::size_t>(c.integer("sampler", "chains"));

  const double tau0 = c.real("sampler", "tau");
  std::vector<double> taus = c.has("system", "tau_values")
                                 ? c.real_list("system", "tau_values")
                                 : std::vector<double>{tau0, 0.5 * tau0};
  const SamplerConfig base = sampler_from(c, n, seed_of(c));
  // Burn-in, sampling length and thinning are held fixed in physical time.
  const double t_burn = static_cast<double>(base.burn_in) * tau0;
  const double t_samp = static_cast<double>(base.samples) * tau0;
  const double t_thin = static_cast<double>(base.thin) * tau0;

  CsvWriter tv_csv(dir / "tv.csv", {"tau", "tv", "points"});
  json per_tau = json::array();
  RunStats all;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    SamplerConfig cfg = base;
    cfg.tau = taus[t];
    cfg.burn_in = SamplerConfig::iterations_for_time(t_burn, cfg.tau);
    cfg.samples = SamplerConfig::iterations_for_time(t_samp, cfg.tau);
    cfg.thin = std::max<std::uint64_t>(
        1, SamplerConfig::iterations_for_time(t_thin, cfg.tau));
    cfg.seed = mix_seed(seed_of(c), t);
    NoExtra none;
    RunStats st;
    const auto mu = sample_system<1>(sys, cfg, system_init(c, sys.domain()),
                                     chains, st, none);
    all.iterations += st.iterations;
    all.records += st.records;
    all.wall_seconds += st.wall_seconds;
    const double tv =
        gaussian ? tv_histogram_cdf<1>(
                       mu[0], [&](double x) { return normal_cdf(x, sd); },
                       grid.lo(), grid.hi(), bins)
                 : tv_histogram<1>(mu[0], ora->density(), bins);
    tv_csv.row(cfg.tau, tv, mu[0].total_count());
    per_tau.push_back(
        json{{"tau", cfg.tau}, {"tv", tv}, {"points", mu[0].total_count()}});
  }
  tv_csv.close();
  json summary = {{"reference", gaussian ? "analytic gaussian" : "grid oracle"},
                  {"tv", per_tau},
                  {"stats", stats_json(all)}};
  m.set("acceptance_rate", 1.0);
  m.file("tv.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

// ---------------------------------------------------------------------------
// nn: predictions.csv, losses.csv

inline RunOutput run_nn(const Config& c, const fs::path& dir) {
  Timer timer;
  fs::create_directories(dir);
  Manifest m(c);
  const std::uint64_t seed = seed_of(c);
  const double noise = c.real("nn", "noise_std");
  const auto n = static_cast<std::size_t>(c.integer("nn", "neurons"));
  const double lambda = c.real("nn", "lambda");
  const nn::Dataset train = nn::generate_data(
      static_cast<std::size_t>(c.integer("nn", "p_train")), mix_seed(seed, 1),
      noise);
  const nn::Dataset test = nn::generate_data(
      static_cast<std::size_t>(c.integer("nn", "p_test")), mix_seed(seed, 2),
      noise);

  const SamplerConfig scfg = sampler_from(c, n, mix_seed(seed, 3));
  const nn::SamplingResult sampled =
      nn::train_by_sampling(train, n, lambda, scfg);

  nn::SgdConfig g;
  g.step = c.real("nn", "sgd_step");
  g.beta = c.real("nn", "sgd_beta");
  g.lambda = lambda;
  g.burn_in = static_cast<std::uint64_t>(c.integer("nn", "sgd_burn_in"));
  g.iterations = static_cast<std::uint64_t>(c.integer("nn", "sgd_iterations"));
  g.minibatch = static_cast<std::size_t>(c.integer("nn", "sgd_minibatch"));
  g.eval_every = static_cast<std::uint64_t>(c.integer("nn", "sgd_eval_every"));
  g.seed = mix_seed(seed, 4);
  const nn::SgdResult sgd = nn::train_by_sgd(train, test, n, g);

  const double s_train = nn::empirical_loss(sampled.measure, train);
  const double s_test = nn::empirical_loss(sampled.measure, test);
  CsvWriter losses(dir / "losses.csv", {"method", "split", "value"});
  losses.row("sgd", "train", sgd.mean_train_loss);
  losses.row("sgd", "test", sgd.mean_test_loss);
  losses.row("sampling", "train", s_train);
  losses.row("sampling", "test", s_test);
  losses.close();

  const auto pts = static_cast<std::size_t>(c.integer("nn", "predict_points"));
  require(pts >= 2, "nn.predict_points must be >= 2");
  CsvWriter pred(dir / "predictions.csv", {"x", "y_true", "y_sgd", "y_sampled"});
  for (std::size_t k = 0; k < pts; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(pts - 1);
    pred.row(x, std::sin(3.0 * x), nn::predict(x, sgd.final_ensemble),
             nn::predict(x, sampled.measure));
  }
  pred.close();

  json summary = {
      {"sampling",
       {{"train", s_train},
        {"test", s_test},
        {"theta_samples", sampled.measure.total_count()},
        {"stats", stats_json(sampled.stats)}}},
      {"sgd",
       {{"train", sgd.mean_train_loss},
        {"test", sgd.mean_test_loss},
        {"final_train", sgd.final_train_loss},
        {"final_test", sgd.final_test_loss},
        {"evaluations", sgd.evaluations}}}};
  m.note("sgd losses average every sgd_eval_every-th iterate after burn-in; "
         "y_sgd is the final iterate");
  m.note("theta initialized with c, w, b ~ N(0, 1)");
  m.note("train and test data drawn with independent seeds");
  m.set("acceptance_rate", sampled.stats.acceptance_rate());
  m.file("losses.csv");
  m.file("predictions.csv");
  finish(m, dir, summary, timer);
  return {dir, summary};
}

inline RunOutput run(const Config& c, const fs::path& dir) {
  switch (c.kind()) {
    case ExperimentKind::pb1d:
      return run_pb1d(c, dir);
    case ExperimentKind::pb3d:
      return run_pb3d(c, dir);
    case ExperimentKind::nn:
      return run_nn(c, dir);
    case ExperimentKind::convergence:
      return run_convergence(c, dir);
    case ExperimentKind::fixedpoint:
      return run_fixedpoint(c, dir);
    case ExperimentKind::exactness:
      return run_exactness(c, dir);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace rbmc::experiments
