#pragma once

// Two-layer network y^(x) = (1/N) sum_i c_i sigmoid(w_i x + b_i) on scalar
// inputs, trained by noisy SGD or by sampling the neuron Gibbs measure
//   exp(-beta (N R(theta) + lambda/2 sum_i |theta_i|^2)),
//   N R = sum_i U(theta_i) + 1/(2N) sum_{i,j} W(theta_i, theta_j) + N E[y^2]/2,
// whose Langevin dynamics is the continuous-time limit of noisy SGD.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rbmc/core.hpp"
#include "rbmc/domain.hpp"
#include "rbmc/gibbs.hpp"
#include "rbmc/measure.hpp"
#include "rbmc/sampler.hpp"

namespace rbmc::nn {

using Theta = Vec<3>;  // (c, w, b)

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t size() const { return x.size(); }
};

// x ~ U[0,1], y = sin(3x) + noise, noise ~ N(0, noise_std^2).
inline Dataset generate_data(std::size_t p, std::uint64_t seed,
                             double noise_std = 0.2) {
  require(p >= 1, "generate_data: P >= 1");
  require(noise_std >= 0.0, "generate_data: noise_std >= 0");
  std::mt19937_64 rng(mix_seed(seed, 0xda7aULL));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset d;
  d.x.resize(p);
  d.y.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    d.x[j] = u01(rng);
    const double e = g(rng);
    d.y[j] = std::sin(3.0 * d.x[j]) + noise_std * e;
  }
  return d;
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double sigma_star(double x, const Theta& th) {
  return th[0] * sigmoid(th[1] * x + th[2]);
}

// d/d(c, w, b) of c sigmoid(w x + b)
inline Theta sigma_star_gradient(double x, const Theta& th) {
  const double s = sigmoid(th[1] * x + th[2]);
  const double ds = th[0] * s * (1.0 - s);
  return Theta{s, ds * x, ds};
}

inline double predict(double x, std::span<const Theta> ensemble) {
  require(!ensemble.empty(), "predict: empty ensemble");
  double s = 0.0;
  for (const auto& th : ensemble) s += sigma_star(x, th);
  return s / static_cast<double>(ensemble.size());
}

// Predictor averaged over a weighted measure of neurons.
inline double predict(double x, const EmpiricalMeasure<3>& mu) {
  if (mu.empty()) throw EmptyMeasureError("predict: empty measure");
  return mu.expectation([x](const Theta& th) { return sigma_star(x, th); });
}

// (1/2P) sum_j |y^(x_j) - y_j|^2
template <class Predictor>
double loss_of(Predictor&& yhat, const Dataset& data) {
  require(data.size() >= 1, "loss: empty dataset");
  CompensatedSum s;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double r = yhat(data.x[j]) - data.y[j];
    s += r * r;
  }
  return 0.5 * s.value() / static_cast<double>(data.size());
}

inline double empirical_loss(std::span<const Theta> ensemble,
                             const Dataset& data) {
  return loss_of([&](double x) { return predict(x, ensemble); }, data);
}

inline double empirical_loss(const EmpiricalMeasure<3>& mu, const Dataset& data) {
  // One pass over the atoms per data point would repeat the sigmoid work for
  // every x; accumulating per atom keeps it at atoms x P.
  std::vector<double> yhat(data.size(), 0.0);
  for (std::size_t k = 0; k < mu.atoms(); ++k) {
    const double w = mu.weight(k);
    for (std::size_t j = 0; j < data.size(); ++j)
      yhat[j] += w * sigma_star(data.x[j], mu.point(k));
  }
  CompensatedSum s;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double r = yhat[j] - data.y[j];
    s += r * r;
  }
  return 0.5 * s.value() / static_cast<double>(data.size());
}

// U(theta) = -E[y sigma*(x, theta)],  W(theta, theta') = E[sigma* sigma*']
class DataPotentials {
 public:
  explicit DataPotentials(const Dataset& data) : data_(&data) {
    require(data.size() >= 1, "data_potentials: empty dataset");
    double s = 0.0;
    for (double y : data.y) s += y * y;
    mean_y2_ = s / static_cast<double>(data.size());
  }

  double U(const Theta& th) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n(); ++j)
      s += data_->y[j] * sigma_star(data_->x[j], th);
    return -s / static_cast<double>(n());
  }
  double W(const Theta& a, const Theta& b) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n(); ++j)
      s += sigma_star(data_->x[j], a) * sigma_star(data_->x[j], b);
    return s / static_cast<double>(n());
  }
  Theta grad_U(const Theta& th) const {
    Theta g{};
    for (std::size_t j = 0; j < n(); ++j)
      g -= data_->y[j] * sigma_star_gradient(data_->x[j], th);
    return (1.0 / static_cast<double>(n())) * g;
  }
  // Gradient of W in its first argument.
  Theta grad_W(const Theta& a, const Theta& b) const {
    Theta g{};
    for (std::size_t j = 0; j < n(); ++j)
      g += sigma_star(data_->x[j], b) * sigma_star_gradient(data_->x[j], a);
    return (1.0 / static_cast<double>(n())) * g;
  }
  double mean_y2() const { return mean_y2_; }
  std::size_t n() const { return data_->size(); }

 private:
  const Dataset* data_;
  double mean_y2_ = 0.0;
};

inline DataPotentials data_potentials(const Dataset& data) {
  return DataPotentials(data);
}

// (1/2N^2) sum_{i,i'} W + (1/N) sum_i U + E[y^2]/2
inline double loss_via_energy(std::span<const Theta> ensemble,
                              const Dataset& data) {
  require(!ensemble.empty(), "loss_via_energy: empty ensemble");
  const DataPotentials pot(data);
  const double n = static_cast<double>(ensemble.size());
  CompensatedSum pair, ext;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    ext += pot.U(ensemble[i]);
    pair += pot.W(ensemble[i], ensemble[i]);
    for (std::size_t k = i + 1; k < ensemble.size(); ++k)
      pair += 2.0 * pot.W(ensemble[i], ensemble[k]);
  }
  return pair.value() / (2.0 * n * n) + ext.value() / n + 0.5 * pot.mean_y2();
}

// theta_i <- theta_i - lambda s theta_i + s (y_k - y^_k) grad sigma*(x_k; theta_i)
//            + sqrt(2 s / beta) z_i
// with y^_k from the pre-update ensemble. Several samples average the data
// term. beta = +inf switches the noise off.
template <class Rng>
void noisy_sgd_step(std::vector<Theta>& ensemble,
                    std::span<const double> xs, std::span<const double> ys,
                    double s, double lambda, double beta, Rng& rng) {
  require(s > 0.0, "noisy_sgd_step: step must be positive");
  require(beta > 0.0, "noisy_sgd_step: beta must be positive");
  require(!xs.empty() && xs.size() == ys.size(),
          "noisy_sgd_step: need matching nonempty samples");
  const std::size_t b = xs.size();
  std::vector<double> resid(b);
  for (std::size_t k = 0; k < b; ++k)
    resid[k] = (ys[k] - predict(xs[k], ensemble)) / static_cast<double>(b);
  const double noise = std::isinf(beta) ? 0.0 : std::sqrt(2.0 * s / beta);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& th : ensemble) {
    Theta step{};
    for (std::size_t k = 0; k < b; ++k)
      step += resid[k] * sigma_star_gradient(xs[k], th);
    Theta next = th - (lambda * s) * th + s * step;
    if (noise > 0.0)
      for (auto& v : next) v += noise * g(rng);
    th = next;
  }
}

template <class Rng>
void noisy_sgd_step(std::vector<Theta>& ensemble, double x, double y, double s,
                    double lambda, double beta, Rng& rng) {
  noisy_sgd_step(ensemble, std::span<const double>(&x, 1),
                 std::span<const double>(&y, 1), s, lambda, beta, rng);
}

// c, w, b ~ N(0, 1)
inline std::vector<Theta> initial_ensemble(std::size_t n, std::uint64_t seed) {
  require(n >= 1, "initial_ensemble: N >= 1");
  std::mt19937_64 rng(mix_seed(seed, 0x1417ULL));
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Theta> e(n);
  for (auto& th : e)
    for (auto& v : th) v = g(rng);
  return e;
}

// Neuron ensemble as a sampler model. The smooth force on neuron i is the
// full-data gradient of N R(theta) + lambda |theta_i|^2 / 2, i.e.
//   (1/P) sum_k (y^_k - y_k) grad sigma*(x_k; theta_i) + lambda theta_i,
// where y^_k uses neuron i itself plus the (N-1)/(p-1)-scaled batch of
// other neurons. Per-neuron features sigma*(x_k; theta_j) are cached, so a
// step costs O(P p) and a full batch p = N uses the running sum directly.
// In the generic interface this is U_eff = U + W(theta, theta)/(2N) +
// lambda |theta|^2 / 2 and a pair term W/N.
class NeuronModel {
 public:
  NeuronModel(const Dataset& data, std::size_t neurons, double lambda)
      : data_(&data), pot_(data), n_(neurons), lambda_(lambda) {
    require(neurons >= 2, "NeuronModel: N >= 2");
    require(lambda >= 0.0, "NeuronModel: lambda >= 0");
  }

  // --- generic model interface -------------------------------------------
  Theta external_gradient(SpeciesIndex, const Theta& th) const {
    return pot_.grad_U(th) +
           (1.0 / static_cast<double>(n_)) * pot_.grad_W(th, th) +
           lambda_ * th;
  }
  Theta pair_gradient(SpeciesIndex, SpeciesIndex, const Theta& a,
                      const Theta& b) const {
    return (1.0 / static_cast<double>(n_)) * pot_.grad_W(a, b);
  }
  bool has_short_range() const { return false; }
  double short_range_cutoff() const { return 0.0; }
  double pair_short_energy(SpeciesIndex, SpeciesIndex, const Theta&,
                           const Theta&) const {
    return 0.0;
  }
  const DomainSpec<3>& domain() const { return domain_; }
  std::size_t total_count() const { return n_; }

  // sum_i (U + lambda|theta_i|^2/2) + 1/(2N) sum_{i,j} W, i.e. N R - N E[y^2]/2
  // plus the regularizer.
  double energy(std::span<const Theta> ens) const {
    double e = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      e += pot_.U(ens[i]) + 0.5 * lambda_ * norm2(ens[i]);
      for (std::size_t j = 0; j < ens.size(); ++j)
        e += pot_.W(ens[i], ens[j]) / (2.0 * static_cast<double>(n_));
    }
    return e;
  }

  // --- sampler hooks -------------------------------------------------------
  void bind(std::span<const Theta> positions) {
    require(positions.size() == n_, "NeuronModel: ensemble size mismatch");
    const std::size_t p = data_->size();
    features_.assign(n_ * p, 0.0);
    sum_.assign(p, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = 0; k < p; ++k) {
        const double f = sigma_star(data_->x[k], positions[i]);
        features_[i * p + k] = f;
        sum_[k] += f;
      }
  }

  Theta drift(std::span<const Theta>, std::span<const SpeciesIndex>,
              std::size_t i, const Theta& th,
              std::span<const std::size_t> batch) const {
    const std::size_t p = data_->size();
    const bool full = batch.size() + 1 == n_;
    const double scale =
        full ? 1.0
             : static_cast<double>(n_ - 1) / static_cast<double>(batch.size());
    Theta g{};
    for (std::size_t k = 0; k < p; ++k) {
      double others;
      if (full) {
        others = sum_[k] - features_[i * p + k];
      } else {
        others = 0.0;
        for (std::size_t j : batch) others += features_[j * p + k];
        others *= scale;
      }
      const double x = data_->x[k];
      const double yhat =
          (sigma_star(x, th) + others) / static_cast<double>(n_);
      g += (yhat - data_->y[k]) * sigma_star_gradient(x, th);
    }
    return (1.0 / static_cast<double>(p)) * g + lambda_ * th;
  }

  void on_accept(std::size_t i, const Theta&, const Theta& th) {
    const std::size_t p = data_->size();
    for (std::size_t k = 0; k < p; ++k) {
      const double f = sigma_star(data_->x[k], th);
      sum_[k] += f - features_[i * p + k];
      features_[i * p + k] = f;
    }
  }

  const DataPotentials& potentials() const { return pot_; }

 private:
  const Dataset* data_;
  DataPotentials pot_;
  std::size_t n_;
  double lambda_;
  DomainSpec<3> domain_ = DomainSpec<3>::all_space();
  std::vector<double> features_;
  std::vector<double> sum_;
};

struct SamplingResult {
  EmpiricalMeasure<3> measure;
  RunStats stats;
  std::vector<Theta> final_ensemble;
};

// Samples the neuron Gibbs measure with the no-split sampler and returns the
// union of all recorded neurons (the predictor is their average).
inline SamplingResult train_by_sampling(const Dataset& data, std::size_t n,
                                        double lambda,
                                        const SamplerConfig& cfg,
                                        std::uint64_t chain = 0) {
  NeuronModel model(data, n, lambda);
  ParticleConfiguration<3> init;
  init.positions = initial_ensemble(n, mix_seed(cfg.seed, chain));
  MeasureRecorder<3> rec(1);
  ChainState<3> final_state;
  SamplingResult r;
  r.stats = rbmc_run<3>(model, init, cfg, chain, rec, &final_state);
  r.measure = rec.measure(0);
  r.final_ensemble = final_state.positions;
  return r;
}

struct SgdConfig {
  double step = 10.0;
  double beta = 2000.0;
  double lambda = 0.0;
  std::uint64_t burn_in = 10000;
  std::uint64_t iterations = 20000;
  std::size_t minibatch = 1;
  std::uint64_t eval_every = 20;
  std::uint64_t seed = 0;
};

struct SgdResult {
  std::vector<Theta> final_ensemble;
  double mean_train_loss = 0.0;  // averaged over evaluated iterates
  double mean_test_loss = 0.0;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  std::size_t evaluations = 0;
};

// Noisy SGD from the same initial law as the sampler. After the burn-in,
// train/test losses of every eval_every-th iterate are averaged.
inline SgdResult train_by_sgd(const Dataset& train, const Dataset& test,
                              std::size_t n, const SgdConfig& c,
                              std::uint64_t run = 0) {
  require(c.minibatch >= 1 && c.eval_every >= 1,
          "train_by_sgd: minibatch and eval_every must be >= 1");
  std::vector<Theta> ens = initial_ensemble(n, mix_seed(c.seed, run));
  std::mt19937_64 rng(mix_seed(mix_seed(c.seed, run), 0x5fdULL));
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  std::vector<double> xs(c.minibatch), ys(c.minibatch);
  SgdResult r;
  CompensatedSum tr, te;
  const std::uint64_t total = c.burn_in + c.iterations;
  for (std::uint64_t k = 1; k <= total; ++k) {
    for (std::size_t b = 0; b < c.minibatch; ++b) {
      const std::size_t j = pick(rng);
      xs[b] = train.x[j];
      ys[b] = train.y[j];
    }
    noisy_sgd_step(ens, xs, ys, c.step, c.lambda, c.beta, rng);
    if (k > c.burn_in && (k - c.burn_in) % c.eval_every == 0) {
      tr += empirical_loss(ens, train);
      te += empirical_loss(ens, test);
      ++r.evaluations;
    }
  }
  for (const auto& th : ens)
    if (!all_finite(th)) throw NumericError("train_by_sgd: SGD diverged");
  if (r.evaluations > 0) {
    r.mean_train_loss = tr.value() / static_cast<double>(r.evaluations);
    r.mean_test_loss = te.value() / static_cast<double>(r.evaluations);
  }
  r.final_train_loss = empirical_loss(ens, train);
  r.final_test_loss = empirical_loss(ens, test);
  r.final_ensemble = std::move(ens);
  return r;
}

}  // namespace rbmc::nn
