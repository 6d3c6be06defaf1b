#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cohmoment/cli.hpp"

using namespace cohmoment;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "cohmoment_cli_stdout.txt";
  const std::string cmd = std::string(COHMOMENT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cohmoment_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    w3_ = (dir_ / "w3.json").string();
    write_state_file(w3_, DensityMatrix::from_pure(w_state(3, 3)));
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string w3_;
};

}  // namespace

TEST_F(CliTest, MomentPrintsValue) {
  Outcome r = run("moment --state " + w3_ + " --n 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Q_1 = 3"), std::string::npos) << r.out;
  r = run("moment --state " + w3_ + " --n 2 --sigma 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Q_2 = " + fmt(threshold(2, 3, 1.0))), std::string::npos) << r.out;
}

TEST_F(CliTest, MomentOracle) {
  Outcome r = run("moment --state " + w3_ + " --n 2 --sigma 0.7 --mu 0,0.3,1 --oracle --samples 200000 --seed 3");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  r = run("moment --state " + w3_ + " --n 2 --sigma 0.7 --oracle --samples 1");
  EXPECT_EQ(r.code, 1) << r.out;
}

TEST_F(CliTest, ValidationErrorsExitOne) {
  const std::string bad = (dir_ / "bad.json").string();
  std::ofstream(bad) << R"({"dim":2,"re":[[1.5,0],[0,-0.5]],"im":[[0,0],[0,0]]})";
  Outcome r = run("moment --state " + bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("NotPositive"), std::string::npos) << r.out;
  EXPECT_EQ(run("moment --state " + (dir_ / "missing.json").string()).code, 1);
  EXPECT_EQ(run("moment --state " + w3_ + " --n 4").code, 1);
  EXPECT_EQ(run("moment --state " + w3_ + " --mu 0,1").code, 1);
  EXPECT_EQ(run("moment --state " + w3_ + " --sigma -1").code, 1);
  EXPECT_EQ(run("moment").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("experiment fig9").code, 1);
  EXPECT_EQ(run("experiment fig3 --purity 0.5 --out " + dir_.string()).code, 1);
  EXPECT_EQ(run("experiment fig3 --samples 0 --out " + dir_.string()).code, 1);
  EXPECT_EQ(run("verify everything").code, 1);
}

TEST_F(CliTest, CertifyWState) {
  const Outcome r = run("certify --state " + w3_ + " --n 2 --sigma 0.5");
  EXPECT_EQ(r.code, 0);
  // Q_2 of W_3 equals the k = 3 threshold: strictness leaves k = 3
  EXPECT_NE(r.out.find("certified_k = 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("k,threshold,exceeded"), std::string::npos);
}

TEST_F(CliTest, ThresholdsCsv) {
  const fs::path out = dir_ / "t.csv";
  EXPECT_EQ(run("thresholds --n 2 --k 3 --out " + out.string()).code, 0);
  const std::string s = slurp(out);
  EXPECT_EQ(s.rfind("# manifest_hash=", 0), 0u);
  EXPECT_NE(s.find("\nn,k,l,v\n"), std::string::npos);
  EXPECT_NE(s.find("\n2,3,1,16\n"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2 + 1 + 3 * 5);
  EXPECT_EQ(run("thresholds --n 4").code, 1);
}

TEST_F(CliTest, Fig3PointMassAndReproducibility) {
  const fs::path a = dir_ / "a", b = dir_ / "b";
  const std::string args = "experiment fig3 --sigma 0 --sigma-g 0,0.3 --samples 20 --seed 5 --out ";
  ASSERT_EQ(run(args + a.string()).code, 0);
  ASSERT_EQ(run(args + b.string() + " --threads 3").code, 0);
  const std::string csv = slurp(a / "fig3.csv");
  EXPECT_EQ(csv, slurp(b / "fig3.csv"));
  EXPECT_NE(csv.find("# seed=5\n"), std::string::npos);
  EXPECT_NE(csv.find("n,sigma,sigma_G,R_mean,R_stderr,N_delta\n"), std::string::npos);
  EXPECT_NE(csv.find("\n3,0,0,0.166666666667,0,20\n"), std::string::npos) << csv;

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_NE(csv.find("# manifest_hash=" + manifest["hash"].get<std::string>()), std::string::npos);
  EXPECT_EQ(manifest["seed"], 5);
  const auto env = nlohmann::json::parse(slurp(a / "fig3.json"));
  EXPECT_EQ(env["seed"], 5);
  EXPECT_TRUE(env.contains("timestamp"));
  EXPECT_EQ(env["config"]["n_delta"], 20);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  const fs::path cfg = dir_ / "run.cfg";
  std::ofstream(cfg) << "schema = 1\nsigma = 0\nsigma_g = 0\nsamples = 2\nseed = 9\n";
  ASSERT_EQ(run("experiment fig4 --config " + cfg.string() + " --out " + (dir_ / "x").string()).code, 0);
  ASSERT_EQ(run("experiment fig4 --config " + cfg.string() + " --samples 3 --out " + (dir_ / "y").string()).code, 0);
  EXPECT_NE(slurp(dir_ / "x" / "fig4.csv").find(",2\n"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "y" / "fig4.csv").find(",3\n"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "x" / "fig4.csv").find("# seed=9"), std::string::npos);

  std::ofstream(cfg) << "sigma = 0\n";
  EXPECT_EQ(run("experiment fig4 --config " + cfg.string() + " --out " + (dir_ / "z").string()).code, 1);
  std::ofstream(cfg) << "schema = 1\nbudget = 3\n";
  EXPECT_EQ(run("experiment fig4 --config " + cfg.string() + " --out " + (dir_ / "z").string()).code, 1);
}

TEST_F(CliTest, SmallFig5AndTable3) {
  ASSERT_EQ(run("experiment fig5 --d 3 --k 2,3 --purity 0.5,1 --budget 2 --out " + dir_.string()).code, 0);
  const std::string fig5 = slurp(dir_ / "fig5.csv");
  EXPECT_NE(fig5.find("k,purity,constrained_max,global_max,pure_threshold,critical_purity\n"), std::string::npos);

  ASSERT_EQ(run("experiment table3 --d 4 --k 2,3 --sigma 0,0.5 --sigma-g 0,0.3 --samples 2 --states 6 --restarts 3 --out " +
                dir_.string()).code,
            0);
  EXPECT_TRUE(fs::exists(dir_ / "table3_k2.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "table3_k3.csv"));
  const std::string t3 = slurp(dir_ / "table3.csv");
  EXPECT_NE(t3.find("k,sigma_G,R_opt,R_ref,r_2,r_3,sigma_max_2,sigma_max_3\n"), std::string::npos);
  EXPECT_NE(t3.find("# d=4\n"), std::string::npos);
  EXPECT_EQ(run("experiment table3 --sigma 0.5 --out " + dir_.string()).code, 1);
}

TEST_F(CliTest, VerifyScopes) {
  Outcome r = run("verify thresholds");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("status,check,detail\n"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  r = run("verify schur --samples 200");
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(CliInProcess, InjectedCoefficientFailsVerify) {
  VerifyOptions opt;
  opt.coeff = [](int n, std::int64_t k, int l) {
    if (n == 2 && l == 1) return std::int64_t{4};
    return coefficient(n, k, l);
  };
  std::ostringstream out;
  EXPECT_EQ(cli::cmd_verify("thresholds", cli::Flags{}, out, opt), cli::kCheckFailed);
  EXPECT_NE(out.str().find("FAIL,coefficient sum rule,violated at (n,k) = (2,1) (2,3)"), std::string::npos) << out.str();
  EXPECT_EQ(out.str().find("(2,2)"), std::string::npos);
}

TEST(CliInProcess, PresetResolution) {
  cli::Flags f;
  f.sigma = "0.5";
  f.seed = 4;
  const KeyValueConfig c = cli::resolve_config("fig3", f);
  EXPECT_EQ(c.get("sigma"), "0.5");
  EXPECT_EQ(c.get("seed"), "4");
  EXPECT_EQ(c.get("d"), "7");
  f.budget = "3";
  EXPECT_THROW(cli::resolve_config("fig3", f), InputError);
  EXPECT_THROW(cli::preset_defaults("nope"), InputError);
  for (const auto& p : cli::preset_names()) EXPECT_NO_THROW(cli::preset_defaults(p));
}

TEST(CliInProcess, OracleDiscrepancy) {
  McEstimate mc;
  mc.estimate = 1.0 + 1e-16;
  mc.std_error = 1e-19;
  EXPECT_EQ(oracle_discrepancy(1.0, mc), 0.0);
  mc.estimate = 1.3;
  mc.std_error = 0.1;
  EXPECT_NEAR(oracle_discrepancy(1.0, mc), 3.0, 1e-12);
  mc.std_error = 0.0;
  EXPECT_TRUE(std::isinf(oracle_discrepancy(1.0, mc)));
  EXPECT_THROW(run_verify("nope"), InputError);
}
