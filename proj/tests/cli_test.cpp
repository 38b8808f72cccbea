#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / (std::string("qndsim_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::string& args) {
    const std::string cmd = std::string(QNDSIM_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) {
    std::ifstream in(dir_ / name);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

const char* small_max = R"(
[lattice]
n_atoms = 8
n_sites = 4
illuminated = 2
[geometry]
preset = diffraction_maximum
)";

TEST_F(CliTest, RunTrajectoryWritesOutputs) {
  const auto cfg = write("run.ini", small_max);
  EXPECT_EQ(run("run-trajectory " + cfg.string() + " --seed 9 --out-dir " + (dir_ / "out").string()), 0) << read("stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "snapshots.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "distributions" / "snapshot_000.csv"));
  std::ifstream summary(dir_ / "out" / "summary.json");
  std::stringstream s;
  s << summary.rdbuf();
  EXPECT_NE(s.str().find("\"seed\": 9"), std::string::npos);
}

TEST_F(CliTest, SnapshotOverride) {
  const auto cfg = write("run.ini", std::string(small_max) + "[run]\nmax_tau = 1\nstop_on_collapse = false\n");
  ASSERT_EQ(run("run-trajectory " + cfg.string() + " --snapshots 0,0.5,1 --out-dir " + (dir_ / "out").string()), 0)
      << read("stderr.txt");
  std::ifstream in(dir_ / "out" / "snapshots.csv");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, RunEnsemble) {
  const auto cfg = write("run.ini", small_max);
  EXPECT_EQ(run("run-ensemble " + cfg.string() + " --n-traj 20 --out-dir " + (dir_ / "out").string()), 0) << read("stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "histogram.csv"));
}

TEST_F(CliTest, OracleCheck) {
  const auto cfg = write("run.ini", "[lattice]\nn_atoms = 4\nn_sites = 4\n[geometry]\npreset = diffraction_minimum\n"
                                    "[run]\nmax_tau = 0.2\nstop_on_collapse = false\n");
  EXPECT_EQ(run("oracle-check " + cfg.string() + " --out-dir " + (dir_ / "out").string()), 0) << read("stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "oracle_check.csv"));
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  const auto bad = write("bad.ini", std::string(small_max) + "kappa = 0\n");
  EXPECT_EQ(run("run-trajectory " + bad.string()), 2);
  EXPECT_NE(read("stderr.txt").find("geometry.kappa"), std::string::npos);
  EXPECT_EQ(run("run-trajectory " + (dir_ / "missing.ini").string()), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("run-trajectory"), 2);
}

TEST_F(CliTest, RuntimeErrorsExitWithThree) {
  // Too many configurations for the oracle.
  const auto big = write("big.ini", "[lattice]\nn_atoms = 12\nn_sites = 8\n[geometry]\npreset = diffraction_minimum\n"
                                    "[run]\nmax_tau = 0.01\nstop_on_collapse = false\n");
  EXPECT_EQ(run("oracle-check " + big.string() + " --out-dir " + (dir_ / "out").string()), 3);
  // Output directory blocked by a regular file.
  const auto cfg = write("run.ini", small_max);
  write("blocker", "x");
  EXPECT_EQ(run("run-trajectory " + cfg.string() + " --out-dir " + (dir_ / "blocker" / "sub").string()), 3);
}

}  // namespace
