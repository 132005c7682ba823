#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rbmc/gibbs.hpp"
#include "test_support.hpp"

using namespace rbmc;

namespace {

// Ordered-pair double loop, independent of the library's i < j sum.
double brute_energy(const std::vector<Vec<1>>& x, const ExternalPotential<1>& u,
                    const PairKernel& w) {
  const std::size_t n = x.size();
  double e = 0.0;
  for (const auto& xi : x) e += u.evaluate(xi);
  double pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) pairs += w.total(Vec<1>{x[i][0] - x[j][0]});
  return e + pairs / (2.0 * static_cast<double>(n - 1));
}

std::vector<Vec<1>> random_config(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.5);
  std::vector<Vec<1>> x(n);
  for (auto& v : x) v[0] = g(rng);
  return x;
}

}  // namespace

TEST(EnergyNbody, Examples) {
  const auto u = quadratic_confinement<1>(1.0);
  const std::vector<Vec<1>> x = {{1.0}, {2.0}};
  EXPECT_DOUBLE_EQ(energy_nbody<1>(std::span<const Vec<1>>(x), u, PairKernel::zero()),
                   2.5);
  const double c = 0.8;
  const std::vector<Vec<1>> y = {{0.1}, {-3.0}, {2.0}};
  EXPECT_DOUBLE_EQ(energy_nbody<1>(std::span<const Vec<1>>(y),
                                   ExternalPotential<1>::zero(),
                                   PairKernel::constant(c)),
                   1.5 * c);
}

TEST(EnergyNbody, MatchesDoubleLoopOracle) {
  const auto u = quadratic_confinement<1>(0.7);
  const auto w = PairKernel::gaussian(1.0, 1.0);
  for (std::size_t n : {2u, 5u, 17u, 64u}) {
    const auto x = random_config(n, n);
    const double want = brute_energy(x, u, w);
    EXPECT_NEAR(energy_nbody<1>(std::span<const Vec<1>>(x), u, w), want,
                1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST(EnergyNbody, RejectsSingleParticle) {
  const std::vector<Vec<1>> x = {{1.0}};
  EXPECT_THROW(energy_nbody<1>(std::span<const Vec<1>>(x),
                               ExternalPotential<1>::zero(), PairKernel::zero()),
               ParameterError);
}

TEST(EnergyNbody, PermutationInvariance) {
  const auto u = quadratic_confinement<1>(1.0);
  const auto w = PairKernel::gaussian(1.0, 1.0);
  auto x = random_config(20, 3);
  const double e0 = energy_nbody<1>(std::span<const Vec<1>>(x), u, w);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    std::shuffle(x.begin(), x.end(), rng);
    EXPECT_NEAR(energy_nbody<1>(std::span<const Vec<1>>(x), u, w), e0,
                1e-12 * std::abs(e0));
  }
}

TEST(LogGibbs, Examples) {
  const std::vector<Vec<1>> zero = {{0.0}, {0.0}};
  EXPECT_EQ(log_gibbs_unnormalized<1>(std::span<const Vec<1>>(zero),
                                      quadratic_confinement<1>(1.0),
                                      PairKernel::zero(), 1.0),
            0.0);
  const auto u = quadratic_confinement<1>(1.0);
  const auto x = random_config(6, 8);
  double factorized = 0.0;
  for (const auto& xi : x) factorized += -2.0 * u.evaluate(xi);
  EXPECT_NEAR(log_gibbs_unnormalized<1>(std::span<const Vec<1>>(x), u,
                                        PairKernel::zero(), 2.0),
              factorized, 1e-12);
}

TEST(LogGibbs, DoublingBetaDoublesMagnitude) {
  const auto u = quadratic_confinement<1>(1.0);
  const auto w = PairKernel::gaussian(1.0, 0.5);
  const auto x = random_config(9, 1);
  const std::span<const Vec<1>> s(x);
  EXPECT_EQ(std::abs(log_gibbs_unnormalized<1>(s, u, w, 2.0)),
            2.0 * std::abs(log_gibbs_unnormalized<1>(s, u, w, 1.0)));
}

TEST(LogGibbs, TwoParticleDensityNormalizesOnGrid) {
  const auto u = quadratic_confinement<1>(1.0);
  const auto w = PairKernel::gaussian(1.0, 1.0);
  const double lo = -8.0, hi = 8.0;
  const int n = 801;
  const double h = (hi - lo) / (n - 1);
  auto weight = [&](int i) { return (i == 0 || i == n - 1) ? 0.5 * h : h; };
  double z = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::vector<Vec<1>> x = {{lo + i * h}, {lo + j * h}};
      z += weight(i) * weight(j) *
           std::exp(log_gibbs_unnormalized<1>(std::span<const Vec<1>>(x), u, w, 1.0));
    }
  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::vector<Vec<1>> x = {{lo + i * h}, {lo + j * h}};
      mass += weight(i) * weight(j) *
              std::exp(log_gibbs_unnormalized<1>(std::span<const Vec<1>>(x), u, w,
                                                 1.0)) /
              z;
    }
  EXPECT_NEAR(mass, 1.0, 1e-6);
  EXPECT_TRUE(std::isfinite(z) && z > 0.0);
}

namespace {

SpeciesSystem<1> two_species(std::size_t n, const PairKernel& w1,
                             const PairKernel& w2, const PairKernel& wc,
                             const ExternalPotential<1>& u1,
                             const ExternalPotential<1>& u2) {
  SpeciesSystem<1> s({{"a", u1, n, 1.0}, {"b", u2, n, 1.0}},
                     PairWeightMode::mean_field);
  s.set_kernel(0, 0, w1);
  s.set_kernel(1, 1, w2);
  s.set_kernel(0, 1, wc);
  return s;
}

// Independent loop oracle for the mean-field two-species energy.
double brute_two(const std::vector<Vec<1>>& x, const std::vector<Vec<1>>& y,
                 const PairKernel& w1, const PairKernel& w2,
                 const PairKernel& wc, const ExternalPotential<1>& u1,
                 const ExternalPotential<1>& u2) {
  const double n = static_cast<double>(x.size());
  double e = 0.0;
  for (const auto& v : x) e += u1.evaluate(v);
  for (const auto& v : y) e += u2.evaluate(v);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (i != j) e += w1.total(Vec<1>{x[i][0] - x[j][0]}) / (2.0 * (n - 1));
      if (i != j) e += w2.total(Vec<1>{y[i][0] - y[j][0]}) / (2.0 * (n - 1));
      e += wc.total(Vec<1>{x[i][0] - y[j][0]}) / n;
    }
  return e;
}

}  // namespace

TEST(EnergyTwoSpecies, Examples) {
  const double c = 0.6;
  const auto s = two_species(2, PairKernel::zero(), PairKernel::zero(),
                             PairKernel::constant(c), ExternalPotential<1>::zero(),
                             ExternalPotential<1>::zero());
  const std::vector<Vec<1>> x = {{0.0}, {1.0}}, y = {{4.0}, {-2.0}};
  EXPECT_DOUBLE_EQ(energy_two_species<1>(x, y, s), 2.0 * c);
}

TEST(EnergyTwoSpecies, DecouplesWhenCrossKernelVanishes) {
  const auto u1 = quadratic_confinement<1>(1.0), u2 = quadratic_confinement<1>(3.0);
  const auto w1 = PairKernel::gaussian(1.0, 1.0), w2 = PairKernel::harmonic(0.5);
  const auto s = two_species(6, w1, w2, PairKernel::zero(), u1, u2);
  const auto x = random_config(6, 21), y = random_config(6, 22);
  const double sep = energy_nbody<1>(std::span<const Vec<1>>(x), u1, w1) +
                     energy_nbody<1>(std::span<const Vec<1>>(y), u2, w2);
  EXPECT_NEAR(energy_two_species<1>(x, y, s), sep, 1e-12 * std::abs(sep));
}

TEST(EnergyTwoSpecies, MatchesLoopOracle) {
  const auto u1 = quadratic_confinement<1>(1.0), u2 = quadratic_confinement<1>(0.5);
  const auto w1 = PairKernel::gaussian(1.0, 1.0), w2 = PairKernel::gaussian(2.0, 0.5);
  const auto wc = coulomb_1d(1.0);
  const auto s = two_species(4, w1, w2, wc, u1, u2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_config(4, 2 * seed), y = random_config(4, 2 * seed + 1);
    const double want = brute_two(x, y, w1, w2, wc, u1, u2);
    EXPECT_NEAR(energy_two_species<1>(x, y, s), want, 1e-12 * std::abs(want));
  }
}

TEST(EnergyTwoSpecies, SwappingIdenticalSpeciesBlocks) {
  const auto u = quadratic_confinement<1>(1.0);
  const auto w = PairKernel::gaussian(1.0, 1.0);
  const auto s = two_species(5, w, w, coulomb_1d(2.0), u, u);
  const auto x = random_config(5, 31), y = random_config(5, 32);
  EXPECT_NEAR(energy_two_species<1>(x, y, s), energy_two_species<1>(y, x, s), 1e-12);
  EXPECT_NEAR(energy_two_species<1>(x, x, s),
              2.0 * energy_nbody<1>(std::span<const Vec<1>>(x), u, w) +
                  [&] {
                    double e = 0.0;
                    for (const auto& a : x)
                      for (const auto& b : x) e += coulomb_1d(2.0).total(Vec<1>{a[0] - b[0]});
                    return e / 5.0;
                  }(),
              1e-12);
}

TEST(EnergyTwoSpecies, CountMismatchIsUnsupported) {
  const auto s = two_species(3, PairKernel::zero(), PairKernel::zero(),
                             PairKernel::zero(), ExternalPotential<1>::zero(),
                             ExternalPotential<1>::zero());
  const std::vector<Vec<1>> x = {{0.0}, {1.0}, {2.0}}, y = {{0.0}, {1.0}};
  EXPECT_THROW(energy_two_species<1>(x, y, s), UnsupportedConfigurationError);
  EXPECT_THROW(SpeciesSystem<1>({{"a", {}, 3, 1.0}, {"b", {}, 4, 1.0}},
                                PairWeightMode::mean_field),
               UnsupportedConfigurationError);
}

TEST(SpeciesSystem, ChargeUnitWeights) {
  SpeciesSystem<1> s({{"plus", {}, 3, 1.0}, {"minus", {}, 4, -2.0}},
                     PairWeightMode::charge_unit, 0.25);
  EXPECT_DOUBLE_EQ(s.pair_weight(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(s.pair_weight(0, 1), -0.5);
  EXPECT_DOUBLE_EQ(s.pair_weight(1, 1), 1.0);
  s.set_kernel_all(PairKernel::constant(1.0));
  ParticleConfiguration<1> c;
  c.positions.assign(7, Vec<1>{0.0});
  c.species = s.species_tags();
  // 3 ++ pairs, 12 +- pairs, 6 -- pairs
  EXPECT_DOUBLE_EQ(s.energy(c), 0.25 * (3.0 - 2.0 * 12.0 + 4.0 * 6.0));
}

TEST(SpeciesSystem, RejectsSpeciesWithOneParticle) {
  EXPECT_THROW(SpeciesSystem<1>({{"a", {}, 1, 1.0}}, PairWeightMode::mean_field),
               ParameterError);
}

TEST(PbCounts, Examples) {
  const auto a = pb_particle_counts(2.0, 0.5, 2.0 / 1024.0, 1.0, -1.0);
  EXPECT_EQ(a.n_plus, 1024u);
  EXPECT_EQ(a.n_minus, 1280u);
  EXPECT_DOUBLE_EQ(a.q_minus, 2.5);
  const auto b = pb_particle_counts(10.0, 0.1, 0.1, 1.0, -1.0);
  EXPECT_EQ(b.n_plus, 100u);
  EXPECT_EQ(b.n_minus, 101u);
  EXPECT_NEAR(b.q_minus, 10.1, 1e-12);
  const auto c = pb_particle_counts(3.0, 0.0, 0.1, 1.0, -1.0);
  EXPECT_EQ(c.n_plus, c.n_minus);
}

TEST(PbCounts, InfeasibleAndInvalid) {
  EXPECT_THROW(pb_particle_counts(1.0, -2.0, 0.1, 1.0, -1.0), InfeasibleChargeError);
  EXPECT_THROW(pb_particle_counts(1.0, 0.0, 0.0, 1.0, -1.0), ParameterError);
}

TEST(PbCounts, NeutralWithinOneChargeUnit) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 200; ++k) {
    const double qp = u(rng), qf = u(rng) - 0.09, q = 0.01 * u(rng);
    const auto n = pb_particle_counts(qp, qf, q, 1.0, -1.0);
    const double net = n.n_plus * q - n.n_minus * q + qf;
    EXPECT_LE(std::abs(net), q * (1.0 + 1e-9));
  }
}
