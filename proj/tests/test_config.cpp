#include <gtest/gtest.h>

#include <filesystem>

#include "rbmc/config.hpp"
#include "rbmc/io.hpp"
#include "rbmc/presets.hpp"
#include "rbmc/validate.hpp"

using namespace rbmc;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
[experiment]
kind = pb1d   # trailing comment
seed = 7
; full-line comment
[pb]
epsilon = 1
free_charge = 0.5
q_plus = 2
outer = 15
n_plus = 16
[sampler]
batch_size = 4
tau = 0.005
samples = 1000
thin = 10
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

std::string error_of(const std::string& text) {
  try {
    const auto c = Config::from_text(text, "t.ini");
    validate_experiment(c);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
  const auto c = Config::from_text(kMinimal);
  EXPECT_EQ(c.kind(), ExperimentKind::pb1d);
  EXPECT_EQ(c.integer("experiment", "seed"), 7);
  EXPECT_EQ(c.integer("pb", "n_plus"), 16);
  EXPECT_DOUBLE_EQ(c.real("pb", "z_minus"), -1.0);
  EXPECT_DOUBLE_EQ(c.real("pb", "inner"), 1.0);
  EXPECT_EQ(c.integer("oracle", "nodes"), 2049);
  EXPECT_EQ(c.integer("diagnostics", "bins"), 50);
  EXPECT_NO_THROW(validate_experiment(c));
}

TEST(Config, RejectsUnknownAndMisplacedKeys) {
  EXPECT_NE(error_of(with("[sampler]\nthin = 5\n")).find("duplicate key sampler.thin"),
            std::string::npos);
  EXPECT_NE(error_of(with("[oracle]\nsmoothing = 1\n")).find("unknown key oracle.smoothing"),
            std::string::npos);
  EXPECT_NE(error_of(with("[nn]\nneurons = 4\n")).find("not valid for kind"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nkind = pb2d\n").find("unknown experiment kind"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nseed = 1\n").find("missing required key experiment.kind"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment]\nkind = fixedpoint\n[sampler]\nsamples = 10\n")
                .find("missing required key"),
            std::string::npos);
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("[experiment]\nkind = pb1d\nkind = pb3d\n").find("t.ini:3"),
            std::string::npos);
  EXPECT_NE(error_of("[experiment\n").find("malformed section"), std::string::npos);
  EXPECT_NE(error_of("kind = pb1d\n").find("outside of any section"), std::string::npos);
  EXPECT_NE(error_of("[experiment]\njust words\n").find("t.ini:2"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  EXPECT_NE(error_of(with("[oracle]\ndamping = lots\n")).find("expected a number"),
            std::string::npos);
  EXPECT_NE(error_of(with("[oracle]\nmax_iter = 1.5\n")).find("expected an integer"),
            std::string::npos);
  EXPECT_NE(error_of(with("[output]\nwrite_samples = maybe\n")).find("true/false"),
            std::string::npos);
  EXPECT_NE(error_of(with("[sampler]\nburn_in = 5\nburn_in_time = 5\n")).find("only one of"),
            std::string::npos);
  EXPECT_NE(error_of(with("[sampler]\nmovers_per_iteration = 0\n")).find("movers"),
            std::string::npos);
  EXPECT_NE(error_of(with("[sampler]\nbatch_mode = sometimes\n")).find("invalid value"),
            std::string::npos);
  EXPECT_FALSE(error_of(with("[sampler]\nbatch_size = 1000\n")).empty());
  EXPECT_FALSE(error_of(with("[sampler]\nbeta = -1\n")).empty());
  EXPECT_FALSE(error_of(with("[oracle]\ndamping = 0\n")).empty());
  EXPECT_FALSE(error_of(with("[pb]\nq_plus = 0\n")).empty());
  EXPECT_FALSE(error_of("[experiment]\nkind = pb1d\n[pb]\nn_plus = 4\n").empty());
}

TEST(Config, ValueParsers) {
  EXPECT_EQ(Config::parse_integer("5e7", "x"), 50000000);
  EXPECT_EQ(Config::parse_integer("-12", "x"), -12);
  EXPECT_THROW(Config::parse_integer("2.5", "x"), ConfigError);
  EXPECT_DOUBLE_EQ(Config::parse_real("1e-3", "x"), 1e-3);
  EXPECT_THROW(Config::parse_real("1e-3x", "x"), ConfigError);
  EXPECT_THROW(Config::parse_real("inf", "x"), ConfigError);
  EXPECT_TRUE(Config::parse_bool("yes", "x"));
  EXPECT_FALSE(Config::parse_bool("0", "x"));
  EXPECT_EQ(Config::trim("  a b \t"), "a b");
  const auto c = Config::from_text(
      "[experiment]\nkind = convergence\n[sampler]\nbatch_size = 2\ntau = 0.1\n"
      "samples = 10\n[pb]\nepsilon = 1\nfree_charge = 0.5\nq_plus = 2\nouter = 15\n"
      "[convergence]\nn_values = 16, 32 ,64\n");
  EXPECT_EQ(c.integer_list("convergence", "n_values"),
            (std::vector<std::int64_t>{16, 32, 64}));
}

TEST(Config, TextRoundTrip) {
  for (const auto& p : presets()) {
    const auto c = Config::from_text(p.text, p.name);
    const auto back = Config::from_text(c.to_text());
    EXPECT_EQ(back.values(), c.values()) << p.name;
    EXPECT_EQ(back.kind(), c.kind());
  }
}

TEST(Config, OverridesAreChecked) {
  auto c = Config::from_text(kMinimal);
  c.set("sampler", "tau", "0.01");
  EXPECT_DOUBLE_EQ(c.real("sampler", "tau"), 0.01);
  EXPECT_THROW(c.set("sampler", "tau", "fast"), ConfigError);
  EXPECT_THROW(c.set("sampler", "speed", "1"), ConfigError);
}

TEST(Config, EveryPresetValidates) {
  const std::vector<std::string> required = {"pb1d_paper", "pb1d_smoke", "pb3d_paper",
                                             "pb3d_smoke", "nn_paper", "convergence_desk"};
  for (const auto& name : required) EXPECT_NE(find_preset(name), nullptr) << name;
  for (const auto& p : presets()) {
    const auto c = Config::from_text(p.text, p.name);
    EXPECT_NO_THROW(validate_experiment(c)) << p.name;
  }
  EXPECT_EQ(find_preset("nope"), nullptr);
}

TEST(Config, RegistryIsDocumentedAndDefaultsAreValid) {
  for (const auto& k : key_registry()) {
    EXPECT_FALSE(k.help.empty()) << k.section << "." << k.key;
    EXPECT_NE(k.allowed, 0u) << k.section << "." << k.key;
    EXPECT_EQ(k.required & ~k.allowed, 0u) << k.section << "." << k.key;
    if (k.default_value) {
      auto c = Config::from_text(kMinimal);
      if (k.allowed & kinds::pb1d) EXPECT_NO_THROW(c.set(k.section, k.key, *k.default_value));
    }
  }
}

TEST(Manifest, ConfigRoundTrip) {
  const auto dir = fs::temp_directory_path() / "rbmc_test_manifest";
  fs::create_directories(dir);
  const auto c = Config::from_text(find_preset("nn_paper"), "nn_paper");
  Manifest m(c);
  m.note("a note");
  m.file("losses.csv");
  m.write(dir / "manifest.json");
  const auto back = config_from_manifest(dir / "manifest.json");
  EXPECT_EQ(back.values(), c.values());
  EXPECT_EQ(back.kind(), ExperimentKind::nn);
  EXPECT_THROW(config_from_manifest(dir / "missing.json"), ConfigError);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{\"config\": 3}";
  }
  EXPECT_THROW(config_from_manifest(dir / "bad.json"), ConfigError);
  fs::remove_all(dir);
}

TEST(Csv, FormatRoundTripsDoubles) {
  const auto dir = fs::temp_directory_path() / "rbmc_test_csv";
  fs::create_directories(dir);
  const double v = 0.1 + 0.2;
  {
    CsvWriter w(dir / "a.csv", {"x", "y", "z"});
    w.row(v, std::uint64_t{3}, "s");
    w.cell(1.0).blank().cell("t");
    w.end_row();
    w.cell(1.0);
    EXPECT_THROW(w.end_row(), std::logic_error);
  }
  const auto rows = read_csv(dir / "a.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(std::stod(rows[1][0]), v);
  EXPECT_EQ(rows[2][1], "");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  fs::remove_all(dir);
}
