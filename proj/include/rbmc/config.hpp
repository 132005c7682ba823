#pragma once

// Line-oriented experiment configuration:
//
//   # comment
//   [section]
//   key = value
//
// Every key is declared in a registry with its type, default and the
// experiment kinds that accept it. Parsing rejects unknown sections and keys,
// keys not valid for the chosen kind, duplicates, and missing required keys,
// all before any computation starts.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rbmc/core.hpp"

namespace rbmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { pb1d, pb3d, nn, convergence, fixedpoint, exactness };

inline const std::vector<std::pair<std::string, ExperimentKind>>& kind_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> names = {
      {"pb1d", ExperimentKind::pb1d},
      {"pb3d", ExperimentKind::pb3d},
      {"nn", ExperimentKind::nn},
      {"convergence", ExperimentKind::convergence},
      {"fixedpoint", ExperimentKind::fixedpoint},
      {"exactness", ExperimentKind::exactness}};
  return names;
}

inline std::string to_string(ExperimentKind k) {
  for (const auto& [n, v] : kind_names())
    if (v == k) return n;
  return "?";
}

namespace kinds {
inline constexpr unsigned pb1d = 1u << 0;
inline constexpr unsigned pb3d = 1u << 1;
inline constexpr unsigned nn = 1u << 2;
inline constexpr unsigned convergence = 1u << 3;
inline constexpr unsigned fixedpoint = 1u << 4;
inline constexpr unsigned exactness = 1u << 5;
inline constexpr unsigned all = 0x3f;
inline constexpr unsigned pb = pb1d | pb3d | convergence;
inline constexpr unsigned particle = pb | fixedpoint | exactness;
inline unsigned bit(ExperimentKind k) { return 1u << static_cast<unsigned>(k); }
}  // namespace kinds

enum class ValueType { real, integer, boolean, text, real_list, integer_list };

struct KeySpec {
  std::string section;
  std::string key;
  ValueType type;
  std::optional<std::string> default_value;  // nullopt: no default
  unsigned allowed;                          // kinds accepting the key
  unsigned required;                         // kinds requiring it
  std::string help;
  std::vector<std::string> choices;          // for enumerated text values
};

// The complete key registry. README.md documents the same table.
inline const std::vector<KeySpec>& key_registry() {
  using namespace kinds;
  using VT = ValueType;
  static const std::vector<KeySpec> reg = {
      {"experiment", "kind", VT::text, std::nullopt, all, all,
       "experiment family",
       {"pb1d", "pb3d", "nn", "convergence", "fixedpoint", "exactness"}},
      {"experiment", "seed", VT::integer, "1", all, 0, "base RNG seed", {}},
      {"experiment", "name", VT::text, "", all, 0, "free-form label", {}},

      {"output", "dir", VT::text, "out", all, 0, "output directory", {}},
      {"output", "write_samples", VT::boolean, "true", pb1d | pb3d, 0,
       "write samples.csv", {}},
      {"output", "max_sample_records", VT::integer, "100", pb1d | pb3d, 0,
       "cap on configurations written to samples.csv", {}},

      {"sampler", "beta", VT::real, "1", particle | nn, 0,
       "inverse temperature", {}},
      {"sampler", "batch_size", VT::integer, std::nullopt, particle | nn,
       particle | nn, "batch size p (>= 2); 0 means p = N", {}},
      {"sampler", "inner_steps", VT::integer, "1", particle | nn, 0,
       "Langevin steps m per iteration", {}},
      {"sampler", "tau", VT::real, std::nullopt, particle | nn, particle | nn,
       "step size", {}},
      {"sampler", "burn_in", VT::integer, std::nullopt, particle | nn, 0,
       "burn-in iterations N_b", {}},
      {"sampler", "burn_in_time", VT::real, std::nullopt, particle | nn, 0,
       "burn-in as time; iterations = time / tau", {}},
      {"sampler", "samples", VT::integer, std::nullopt, particle | nn, 0,
       "sampling iterations N_s", {}},
      {"sampler", "sample_time", VT::real, std::nullopt, particle | nn, 0,
       "sampling length as time; iterations = time / tau", {}},
      {"sampler", "thin", VT::integer, "1", particle | nn, 0,
       "record every thin-th iteration", {}},
      {"sampler", "movers_per_iteration", VT::text, "1", particle | nn, 0,
       "particles moved per iteration, or 'all'", {}},
      {"sampler", "batch_mode", VT::text, "per_step", particle | nn, 0,
       "fresh batch per inner step or per iteration",
       {"per_step", "per_iteration"}},
      {"sampler", "chains", VT::integer, "1", particle, 0,
       "independent chains merged into one measure", {}},
      {"sampler", "init_lo", VT::real, std::nullopt, particle, 0,
       "lower edge of the initial placement box", {}},
      {"sampler", "init_hi", VT::real, std::nullopt, particle, 0,
       "upper edge of the initial placement box", {}},

      {"pb", "epsilon", VT::real, std::nullopt, pb, pb, "dielectric constant", {}},
      {"pb", "free_charge", VT::real, std::nullopt, pb, pb,
       "free charge Q_f of the colloid", {}},
      {"pb", "q_plus", VT::real, std::nullopt, pb, pb, "total cation charge Q_+",
       {}},
      {"pb", "n_plus", VT::integer, std::nullopt, pb1d | pb3d, pb1d | pb3d,
       "numerical cations N_+ (q = Q_+ / (z_+ N_+))", {}},
      {"pb", "z_plus", VT::real, "1", pb, 0, "cation valence", {}},
      {"pb", "z_minus", VT::real, "-1", pb, 0, "anion valence", {}},
      {"pb", "inner", VT::real, "1", pb, 0, "colloid radius / left wall", {}},
      {"pb", "outer", VT::real, std::nullopt, pb, pb, "outer wall L", {}},
      {"pb", "split_cutoff", VT::real, std::nullopt, pb3d, pb3d,
       "Coulomb split radius r_c", {}},
      {"pb", "lj_epsilon", VT::real, "0", pb3d, 0,
       "Lennard-Jones well depth (0 disables the core)", {}},
      {"pb", "lj_sigma", VT::real, "0.1", pb3d, 0,
       "Lennard-Jones zero crossing; the core is truncated at r_c", {}},

      {"oracle", "nodes", VT::integer, "2049", particle, 0, "grid nodes", {}},
      {"oracle", "damping", VT::real, "0.5", particle, 0, "Picard damping", {}},
      {"oracle", "tol", VT::real, "1e-10", particle, 0, "Picard tolerance", {}},
      {"oracle", "max_iter", VT::integer, "10000", particle, 0,
       "Picard iteration cap", {}},

      {"diagnostics", "bins", VT::integer, "50", particle, 0, "histogram bins",
       {}},
      {"diagnostics", "alpha", VT::real, std::nullopt, particle, 0,
       "H^-alpha exponent (default 1 in 1D, 2 in 3D)", {}},

      {"system", "potential", VT::text, "quadratic", fixedpoint | exactness, 0,
       "external potential U", {"quadratic", "zero"}},
      {"system", "stiffness", VT::real, "1", fixedpoint | exactness, 0,
       "lambda in U = lambda x^2 / 2", {}},
      {"system", "kernel", VT::text, "zero", fixedpoint | exactness, 0,
       "pair kernel W",
       {"zero", "gaussian", "constant", "coulomb1d", "harmonic"}},
      {"system", "kernel_amplitude", VT::real, "1", fixedpoint | exactness, 0,
       "amplitude (gaussian, constant) or stiffness (harmonic)", {}},
      {"system", "kernel_length", VT::real, "1", fixedpoint | exactness, 0,
       "gaussian length scale", {}},
      {"system", "kernel_epsilon", VT::real, "1", fixedpoint | exactness, 0,
       "coulomb1d dielectric constant", {}},
      {"system", "n_values", VT::integer_list, std::nullopt, fixedpoint,
       fixedpoint, "particle numbers to compare", {}},
      {"system", "particles", VT::integer, "1000", exactness, 0,
       "particle number", {}},
      {"system", "tau_values", VT::real_list, std::nullopt, exactness, 0,
       "step sizes compared at equal physical time (default tau, tau/2)", {}},
      {"system", "grid_lo", VT::real, std::nullopt, fixedpoint | exactness,
       fixedpoint | exactness, "oracle grid lower end", {}},
      {"system", "grid_hi", VT::real, std::nullopt, fixedpoint | exactness,
       fixedpoint | exactness, "oracle grid upper end", {}},
      {"system", "domain", VT::text, "all_space", fixedpoint | exactness, 0,
       "particle domain", {"all_space", "box"}},
      {"system", "domain_lo", VT::real, std::nullopt, fixedpoint | exactness,
       0, "box lower wall", {}},
      {"system", "domain_hi", VT::real, std::nullopt, fixedpoint | exactness,
       0, "box upper wall", {}},

      {"convergence", "n_values", VT::integer_list, std::nullopt, convergence,
       convergence, "cation numbers N_+", {}},
      {"convergence", "repetitions", VT::integer, "8", convergence, 0,
       "independent repetitions M per N", {}},

      {"nn", "neurons", VT::integer, "64", nn, 0, "network width N", {}},
      {"nn", "noise_std", VT::real, "0.2", nn, 0,
       "standard deviation of the label noise", {}},
      {"nn", "p_train", VT::integer, "256", nn, 0, "training set size", {}},
      {"nn", "p_test", VT::integer, "4096", nn, 0, "test set size", {}},
      {"nn", "lambda", VT::real, "0", nn, 0, "l2 regularization", {}},
      {"nn", "sgd_step", VT::real, "10", nn, 0, "noisy SGD step s", {}},
      {"nn", "sgd_beta", VT::real, "2000", nn, 0, "noisy SGD beta", {}},
      {"nn", "sgd_burn_in", VT::integer, "10000", nn, 0,
       "SGD iterations before loss averaging", {}},
      {"nn", "sgd_iterations", VT::integer, "20000", nn, 0,
       "SGD iterations whose losses are averaged", {}},
      {"nn", "sgd_minibatch", VT::integer, "1", nn, 0,
       "data samples per SGD step", {}},
      {"nn", "sgd_eval_every", VT::integer, "20", nn, 0,
       "loss evaluation stride during averaging", {}},
      {"nn", "predict_points", VT::integer, "201", nn, 0,
       "rows of predictions.csv on [0, 1]", {}},
  };
  return reg;
}

inline const KeySpec* find_key(const std::string& section,
                               const std::string& key) {
  for (const auto& k : key_registry())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

// Parsed and validated configuration. Values are kept as text exactly as
// resolved (defaults filled in), so they can be written back verbatim.
class Config {
 public:
  using Table = std::map<std::string, std::map<std::string, std::string>>;

  static Table parse_text(const std::string& text,
                          const std::string& origin = "<config>") {
    Table t;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string s = trim(strip_comment(line));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') fail("malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) fail("empty section name");
        t[section];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail("expected key = value");
      if (section.empty()) fail("key outside of any section");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) fail("empty key");
      if (t[section].count(key)) fail("duplicate key " + section + "." + key);
      t[section][key] = value;
    }
    return t;
  }

  static Config from_text(const std::string& text,
                          const std::string& origin = "<config>") {
    return from_table(parse_text(text, origin), origin);
  }

  static Config from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str(), path);
  }

  // Validates the raw table and fills in defaults.
  static Config from_table(const Table& raw, const std::string& origin = "<config>") {
    auto kind_it = raw.find("experiment");
    if (kind_it == raw.end() || !kind_it->second.count("kind"))
      throw ConfigError(origin + ": missing required key experiment.kind");
    const std::string kname = kind_it->second.at("kind");
    std::optional<ExperimentKind> kind;
    for (const auto& [n, v] : kind_names())
      if (n == kname) kind = v;
    if (!kind) throw ConfigError(origin + ": unknown experiment kind '" + kname + "'");
    const unsigned bit = kinds::bit(*kind);

    Config c;
    c.kind_ = *kind;
    for (const auto& [section, keys] : raw) {
      bool known_section = false;
      for (const auto& k : key_registry())
        if (k.section == section && (k.allowed & bit)) known_section = true;
      if (!known_section)
        throw ConfigError(origin + ": section [" + section +
                          "] is not valid for kind " + kname);
      for (const auto& [key, value] : keys) {
        const KeySpec* spec = find_key(section, key);
        if (!spec)
          throw ConfigError(origin + ": unknown key " + section + "." + key);
        if (!(spec->allowed & bit))
          throw ConfigError(origin + ": key " + section + "." + key +
                            " is not valid for kind " + kname);
        check_value(*spec, value, origin);
        c.values_[section][key] = value;
      }
    }
    for (const auto& k : key_registry()) {
      if (!(k.allowed & bit)) continue;
      const bool present = c.has(k.section, k.key);
      if (!present && (k.required & bit))
        throw ConfigError(origin + ": missing required key " + k.section +
                          "." + k.key);
      if (!present && k.default_value)
        c.values_[k.section][k.key] = *k.default_value;
    }
    c.check_consistency(origin);
    return c;
  }

  ExperimentKind kind() const { return kind_; }
  const Table& values() const { return values_; }

  bool has(const std::string& s, const std::string& k) const {
    auto it = values_.find(s);
    return it != values_.end() && it->second.count(k);
  }
  const std::string& text(const std::string& s, const std::string& k) const {
    if (!has(s, k)) throw ConfigError("config value " + s + "." + k + " not set");
    return values_.at(s).at(k);
  }
  double real(const std::string& s, const std::string& k) const {
    return parse_real(text(s, k), s + "." + k);
  }
  std::int64_t integer(const std::string& s, const std::string& k) const {
    return parse_integer(text(s, k), s + "." + k);
  }
  bool boolean(const std::string& s, const std::string& k) const {
    return parse_bool(text(s, k), s + "." + k);
  }
  std::vector<double> real_list(const std::string& s, const std::string& k) const {
    std::vector<double> v;
    for (const auto& item : split_list(text(s, k)))
      v.push_back(parse_real(item, s + "." + k));
    return v;
  }
  std::vector<std::int64_t> integer_list(const std::string& s,
                                         const std::string& k) const {
    std::vector<std::int64_t> v;
    for (const auto& item : split_list(text(s, k)))
      v.push_back(parse_integer(item, s + "." + k));
    return v;
  }
  double real_or(const std::string& s, const std::string& k, double d) const {
    return has(s, k) ? real(s, k) : d;
  }

  void set(const std::string& s, const std::string& k, const std::string& v) {
    const KeySpec* spec = find_key(s, k);
    if (!spec) throw ConfigError("unknown key " + s + "." + k);
    check_value(*spec, v, "override");
    values_[s][k] = v;
  }

  // Canonical text form; parsing it back gives the same Config.
  std::string to_text() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [section, keys] : values_) {
      if (!first) os << "\n";
      first = false;
      os << "[" << section << "]\n";
      for (const auto& [k, v] : keys) os << k << " = " << v << "\n";
    }
    return os.str();
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static double parse_real(const std::string& v, const std::string& what) {
    std::istringstream in(v);
    in.imbue(std::locale::classic());
    double d;
    in >> d;
    if (in.fail() || !(in >> std::ws).eof() || !std::isfinite(d))
      throw ConfigError(what + ": expected a number, got '" + v + "'");
    return d;
  }
  static std::int64_t parse_integer(const std::string& v,
                                    const std::string& what) {
    std::int64_t x = 0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [p, ec] = std::from_chars(b, e, x);
    if (ec == std::errc() && p == e) return x;
    // Allow integral values written in exponent form, e.g. 5e7.
    const double d = parse_real(v, what);
    if (d != std::floor(d) || std::abs(d) > 9.0e18)
      throw ConfigError(what + ": expected an integer, got '" + v + "'");
    return static_cast<std::int64_t>(d);
  }
  static bool parse_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(what + ": expected true/false, got '" + v + "'");
  }

 private:
  static std::string strip_comment(const std::string& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '#' || line[i] == ';') {
        if (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))
          return line.substr(0, i);
      }
    }
    return line;
  }

  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
      cur = trim(cur);
      if (!cur.empty()) out.push_back(cur);
    }
    return out;
  }

  static void check_value(const KeySpec& k, const std::string& v,
                          const std::string& origin) {
    const std::string what = origin + ": " + k.section + "." + k.key;
    switch (k.type) {
      case ValueType::real:
        parse_real(v, what);
        break;
      case ValueType::integer:
        if (parse_integer(v, what) < 0)
          throw ConfigError(what + ": must be nonnegative");
        break;
      case ValueType::boolean:
        parse_bool(v, what);
        break;
      case ValueType::text:
        if (!k.choices.empty() &&
            std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end())
          throw ConfigError(what + ": invalid value '" + v + "'");
        break;
      case ValueType::real_list: {
        auto items = split_list(v);
        if (items.empty()) throw ConfigError(what + ": empty list");
        for (const auto& i : items) parse_real(i, what);
        break;
      }
      case ValueType::integer_list: {
        auto items = split_list(v);
        if (items.empty()) throw ConfigError(what + ": empty list");
        for (const auto& i : items)
          if (parse_integer(i, what) < 1)
            throw ConfigError(what + ": entries must be >= 1");
        break;
      }
    }
  }

  void check_consistency(const std::string& origin) const {
    if (kind_ == ExperimentKind::nn) return;
    auto both = [&](const char* a, const char* b) {
      if (has("sampler", a) && has("sampler", b))
        throw ConfigError(origin + ": give only one of sampler." + a +
                          " and sampler." + b);
    };
    both("burn_in", "burn_in_time");
    both("samples", "sample_time");
    if (!has("sampler", "samples") && !has("sampler", "sample_time"))
      throw ConfigError(origin +
                        ": missing required key sampler.samples (or "
                        "sampler.sample_time)");
    const std::string& movers = text("sampler", "movers_per_iteration");
    if (movers != "all") {
      if (parse_integer(movers, "sampler.movers_per_iteration") < 1)
        throw ConfigError(origin + ": sampler.movers_per_iteration must be >= 1");
    }
    if (has("sampler", "init_lo") != has("sampler", "init_hi"))
      throw ConfigError(origin + ": init_lo and init_hi go together");
    if (has("system", "domain") && text("system", "domain") == "box" &&
        (!has("system", "domain_lo") || !has("system", "domain_hi")))
      throw ConfigError(origin + ": box domain needs domain_lo and domain_hi");
  }

  ExperimentKind kind_ = ExperimentKind::pb1d;
  Table values_;
};

}  // namespace rbmc
