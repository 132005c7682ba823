#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rbmc/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "rbmc_test_cli";

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result cli(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(RBMC_CLI) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const auto p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<std::vector<std::string>> csv(const fs::path& p) { return rbmc::read_csv(p); }

const char* kNnShort = R"([experiment]
kind = nn
seed = 5
[nn]
neurons = 8
p_train = 32
p_test = 64
sgd_step = 1
sgd_burn_in = 200
sgd_iterations = 400
predict_points = 11
[sampler]
beta = 2000
batch_size = 4
tau = 1
burn_in = 200
samples = 400
thin = 10
)";

}  // namespace

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { fs::remove_all(kWork); }
};

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli("--version").code, 0);
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("run --bogus-flag x").code, 2);
  EXPECT_EQ(cli("run " + (kWork / "missing.ini").string()).code, 2);
  const auto bad = write_config("bad.ini", std::string(kNnShort) + "[nn]\nwidth = 3\n");
  const auto r = cli("run " + bad.string() + " --out " + (kWork / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
  EXPECT_FALSE(fs::exists(kWork / "bad")) << "rejected before any computation";
  // valid configuration whose oracle cannot converge: runtime error
  const auto stuck = write_config("stuck.ini", "[oracle]\nmax_iter = 1\n");
  EXPECT_EQ(cli("run " + stuck.string() + " --preset pb1d_smoke --out " +
                (kWork / "stuck").string())
                .code,
            1);
}

TEST_F(Cli, PresetListing) {
  const auto r = cli("presets");
  EXPECT_EQ(r.code, 0);
  for (const char* n : {"pb1d_paper", "pb1d_smoke", "pb3d_paper", "pb3d_smoke",
                        "nn_paper", "convergence_desk"})
    EXPECT_NE(r.out.find(n), std::string::npos) << n;
  const auto s = cli("show pb1d_smoke");
  EXPECT_EQ(s.code, 0);
  EXPECT_EQ(s.out, slurp(fs::path(RBMC_CONFIG_DIR) / "pb1d_smoke.ini"));
  EXPECT_EQ(cli("show nope").code, 2);
  EXPECT_EQ(cli("run --preset nope").code, 2);
}

TEST_F(Cli, Pb1dSmokeWritesFilesAndReruns) {
  const auto dir = kWork / "pb1d";
  const auto r = cli("run --preset pb1d_smoke --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = nlohmann::json::parse(r.out);
  EXPECT_EQ(summary["charge_audit"].get<double>(), 0.0);

  const auto dens = csv(dir / "density.csv");
  EXPECT_EQ(dens[0], (std::vector<std::string>{"x", "rho_plus", "rho_minus",
                                               "oracle_plus", "oracle_minus"}));
  // normalized to the species charges Q_+ = 2, Q_- = 2.5 over the box
  double qp = 0, qm = 0, op = 0;
  const double width = std::stod(dens[2][0]) - std::stod(dens[1][0]);
  for (std::size_t k = 1; k < dens.size(); ++k) {
    qp += std::stod(dens[k][1]) * width;
    qm += std::stod(dens[k][2]) * width;
    op += std::stod(dens[k][3]) * width;
  }
  EXPECT_NEAR(qp, 2.0, 1e-9);
  EXPECT_NEAR(qm, 2.5, 1e-9);
  EXPECT_NEAR(op, 2.0, 1e-6);

  const auto samples = csv(dir / "samples.csv");
  EXPECT_EQ(samples[0], (std::vector<std::string>{"chain", "iteration", "particle",
                                                  "species", "x0"}));
  ASSERT_GT(samples.size(), 1u);
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const double x = std::stod(samples[k][4]);
    ASSERT_GE(x, 1.0);
    ASSERT_LE(x, 15.0);
  }

  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["kind"], "pb1d");
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("wall_seconds"));
  EXPECT_TRUE(m.contains("acceptance_rate"));
  EXPECT_EQ(m["config"]["pb"]["n_plus"], "64");

  const auto again = kWork / "pb1d_again";
  ASSERT_EQ(cli("run " + (dir / "manifest.json").string() + " --out " + again.string()).code,
            0);
  EXPECT_EQ(slurp(dir / "density.csv"), slurp(again / "density.csv"));
  EXPECT_EQ(slurp(dir / "samples.csv"), slurp(again / "samples.csv"));
}

TEST_F(Cli, NnIsSeedDeterministic) {
  const auto cfg = write_config("nn.ini", kNnShort);
  const auto a = kWork / "nn_a", b = kWork / "nn_b", c = kWork / "nn_c";
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + a.string()).code, 0);
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + b.string()).code, 0);
  ASSERT_EQ(cli("run " + cfg.string() + " --seed 6 --out " + c.string()).code, 0);
  EXPECT_EQ(slurp(a / "losses.csv"), slurp(b / "losses.csv"));
  EXPECT_EQ(slurp(a / "predictions.csv"), slurp(b / "predictions.csv"));
  EXPECT_NE(slurp(a / "losses.csv"), slurp(c / "losses.csv"));
  const auto losses = csv(a / "losses.csv");
  ASSERT_EQ(losses.size(), 5u);
  EXPECT_EQ(losses[0], (std::vector<std::string>{"method", "split", "value"}));
  EXPECT_EQ(losses[1][0] + "/" + losses[1][1], "sgd/train");
  EXPECT_EQ(losses[4][0] + "/" + losses[4][1], "sampling/test");
  const auto pred = csv(a / "predictions.csv");
  EXPECT_EQ(pred.size(), 12u);
  EXPECT_EQ(pred[0], (std::vector<std::string>{"x", "y_true", "y_sgd", "y_sampled"}));
}

TEST_F(Cli, NnNoiselessFit) {
  const auto cfg = write_config("nn_clean.ini", R"([experiment]
kind = nn
[nn]
neurons = 16
noise_std = 0
p_train = 64
p_test = 64
sgd_step = 2
sgd_beta = 1e15
sgd_minibatch = 64
sgd_burn_in = 19000
sgd_iterations = 1000
sgd_eval_every = 100
[sampler]
beta = 1e15
batch_size = 4
tau = 1
samples = 10
)");
  const auto dir = kWork / "nn_clean";
  const auto r = cli("run " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto losses = csv(dir / "losses.csv");
  EXPECT_LT(std::stod(losses[1][2]), 1e-3);
}

TEST_F(Cli, SingleNConvergenceHasNoFit) {
  const auto cfg = write_config("conv.ini", R"([experiment]
kind = convergence
[pb]
epsilon = 1
free_charge = 0.5
q_plus = 2
outer = 15
[convergence]
n_values = 16
repetitions = 1
[sampler]
batch_size = 4
tau = 0.005
burn_in_time = 5
sample_time = 20
thin = 10
movers_per_iteration = all
[oracle]
damping = 0.2
)");
  const auto dir = kWork / "conv";
  const auto r = cli("run " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rates = csv(dir / "rates.csv");
  ASSERT_EQ(rates.size(), 2u);
  EXPECT_EQ(rates[0], (std::vector<std::string>{"N", "mswe", "slope"}));
  EXPECT_EQ(rates[1][0], "16");
  EXPECT_EQ(rates[1][2], "");
  const auto runs = csv(dir / "runs.csv");
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0], (std::vector<std::string>{"N", "err_plus", "err_minus", "repetition"}));
  EXPECT_TRUE(nlohmann::json::parse(r.out)["slope"].is_null());
}

TEST_F(Cli, ZeroInteractionMatchesBoltzmann) {
  const auto cfg = write_config("free.ini", R"([experiment]
kind = fixedpoint
[system]
potential = quadratic
stiffness = 1
kernel = zero
n_values = 50
domain = box
domain_lo = 0
domain_hi = 3
grid_lo = 0
grid_hi = 3
[sampler]
batch_size = 2
tau = 0.002
burn_in_time = 2
sample_time = 100
thin = 50
movers_per_iteration = all
[diagnostics]
bins = 12
)");
  const auto dir = kWork / "free";
  const auto r = cli("run " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dens = csv(dir / "density.csv");
  ASSERT_EQ(dens.size(), 13u);
  // exp(-x^2/2) restricted to [0, 3], bin averages by erf
  const double z = std::sqrt(M_PI / 2) * std::erf(3 / std::sqrt(2.0));
  double tv = 0.0;
  for (std::size_t k = 1; k < dens.size(); ++k) {
    const double a = 0.25 * (k - 1), b = a + 0.25;
    const double want = std::sqrt(M_PI / 2) *
                        (std::erf(b / std::sqrt(2.0)) - std::erf(a / std::sqrt(2.0))) / z;
    EXPECT_NEAR(std::stod(dens[k][3]) * 0.25, want, 1e-6) << k;
    tv += 0.5 * std::abs(std::stod(dens[k][2]) * 0.25 - want);
  }
  EXPECT_LT(tv, 0.02);
}

TEST_F(Cli, Pb3dShortRun) {
  // file keys override the preset
  const auto cfg = write_config("pb3d.ini", "[sampler]\nburn_in = 2000\nsamples = 20000\n");
  const auto dir = kWork / "pb3d";
  const auto r = cli("run " + cfg.string() + " --preset pb3d_smoke --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = nlohmann::json::parse(r.out);
  EXPECT_LE(std::abs(s["charge_audit"].get<double>()), s["q"].get<double>());
  EXPECT_GT(s["radius_min"].get<double>(), 1.0);
  EXPECT_LT(s["radius_max"].get<double>(), 10.0);
  const auto dens = csv(dir / "density_radial.csv");
  EXPECT_EQ(dens[0], (std::vector<std::string>{"r", "rho_plus", "rho_minus",
                                               "oracle_plus", "oracle_minus"}));
  const double width = std::stod(dens[2][0]) - std::stod(dens[1][0]);
  double qp = 0.0;
  for (std::size_t k = 1; k < dens.size(); ++k) {
    const double a = std::stod(dens[k][0]) - 0.5 * width, b = a + width;
    qp += std::stod(dens[k][1]) * 4.0 * M_PI / 3.0 * (b * b * b - a * a * a);
  }
  EXPECT_NEAR(qp, 10.0, 1e-6);
}
