#pragma once

// Semantic checks run after parsing and before any computation. Every
// rejection is reported as a ConfigError.

#include <string>

#include "rbmc/config.hpp"
#include "rbmc/experiments.hpp"

namespace rbmc {

namespace detail {

inline void check_sampler(const Config& c, std::size_t particles) {
  const auto s = experiments::sampler_from(c, particles, 0);
  s.validate(particles);
  require(s.samples >= s.thin,
          "sampler: samples must cover at least one recorded iteration");
  if (c.has("sampler", "chains"))
    require(c.integer("sampler", "chains") >= 1, "sampler: chains must be >= 1");
  if (c.has("sampler", "init_lo"))
    require(c.real("sampler", "init_lo") < c.real("sampler", "init_hi"),
            "sampler: need init_lo < init_hi");
}

inline void check_oracle(const Config& c) {
  experiments::picard_from(c).validate();
  require(c.integer("oracle", "nodes") >= 3, "oracle: nodes must be >= 3");
}

inline void check_diagnostics(const Config& c) {
  require(c.integer("diagnostics", "bins") >= 1, "diagnostics: bins must be >= 1");
  if (c.has("diagnostics", "alpha"))
    require(c.real("diagnostics", "alpha") > 0.0,
            "diagnostics: alpha must be positive");
}

inline void check_pb(const Config& c, ExperimentKind k) {
  const auto p = experiments::pb_params_from(c);
  auto check_counts = [&](experiments::PbParams q) {
    const auto n = q.counts();
    require(n.n_plus >= 2 && n.n_minus >= 2,
            "pb: both species need at least two particles");
    check_sampler(c, n.n_plus + n.n_minus);
  };
  if (k == ExperimentKind::convergence) {
    for (auto n : c.integer_list("convergence", "n_values")) {
      auto q = p;
      q.n_plus = static_cast<std::size_t>(n);
      require(n >= 2, "convergence: n_values must be >= 2");
      check_counts(q);
    }
    require(c.integer("convergence", "repetitions") >= 1,
            "convergence: repetitions must be >= 1");
  } else {
    check_counts(p);
  }
  if (k == ExperimentKind::pb3d) {
    require(p.split_cutoff > 0.0, "pb: split_cutoff must be positive");
    require(p.lj_epsilon >= 0.0 && p.lj_sigma > 0.0,
            "pb: need lj_epsilon >= 0 and lj_sigma > 0");
    require(p.inner > 0.0, "pb: colloid radius must be positive in 3D");
  }
  check_oracle(c);
  check_diagnostics(c);
}

inline void check_system(const Config& c, ExperimentKind k) {
  require(c.real("system", "grid_lo") < c.real("system", "grid_hi"),
          "system: need grid_lo < grid_hi");
  require(c.real("system", "stiffness") >= 0.0, "system: stiffness must be >= 0");
  if (c.text("system", "domain") == "box")
    require(c.real("system", "domain_lo") < c.real("system", "domain_hi"),
            "system: need domain_lo < domain_hi");
  if (c.text("system", "kernel") == "gaussian")
    require(c.real("system", "kernel_length") > 0.0,
            "system: kernel_length must be positive");
  if (c.text("system", "kernel") == "coulomb1d")
    require(c.real("system", "kernel_epsilon") > 0.0,
            "system: kernel_epsilon must be positive");
  if (k == ExperimentKind::fixedpoint) {
    for (auto n : c.integer_list("system", "n_values")) {
      require(n >= 2, "system: n_values must be >= 2");
      check_sampler(c, static_cast<std::size_t>(n));
    }
  } else {
    const auto n = c.integer("system", "particles");
    require(n >= 2, "system: particles must be >= 2");
    check_sampler(c, static_cast<std::size_t>(n));
    if (c.has("system", "tau_values"))
      for (double t : c.real_list("system", "tau_values"))
        require(t > 0.0, "system: tau_values must be positive");
  }
  check_oracle(c);
  check_diagnostics(c);
}

inline void check_nn(const Config& c) {
  const auto n = c.integer("nn", "neurons");
  require(n >= 2, "nn: neurons must be >= 2");
  require(c.integer("nn", "p_train") >= 1 && c.integer("nn", "p_test") >= 1,
          "nn: data sizes must be >= 1");
  require(c.real("nn", "noise_std") >= 0.0, "nn: noise_std must be >= 0");
  require(c.real("nn", "lambda") >= 0.0, "nn: lambda must be >= 0");
  require(c.real("nn", "sgd_step") > 0.0 && c.real("nn", "sgd_beta") > 0.0,
          "nn: sgd_step and sgd_beta must be positive");
  require(c.integer("nn", "sgd_minibatch") >= 1 &&
              c.integer("nn", "sgd_eval_every") >= 1,
          "nn: sgd_minibatch and sgd_eval_every must be >= 1");
  require(c.integer("nn", "predict_points") >= 2,
          "nn: predict_points must be >= 2");
  check_sampler(c, static_cast<std::size_t>(n));
}

}  // namespace detail

inline void validate_experiment(const Config& c) {
  try {
    switch (c.kind()) {
      case ExperimentKind::pb1d:
      case ExperimentKind::pb3d:
      case ExperimentKind::convergence:
        detail::check_pb(c, c.kind());
        break;
      case ExperimentKind::fixedpoint:
      case ExperimentKind::exactness:
        detail::check_system(c, c.kind());
        break;
      case ExperimentKind::nn:
        detail::check_nn(c);
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

}  // namespace rbmc
