#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdsrq/experiment.hpp"

using namespace gdsrq;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("gdsrq_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_agents = 12;
  c.dim = 3;
  c.radius = 0.5;
  c.iterations = 200;
  c.cadence = 10;
  return c;
}

fs::path write_config_file(const fs::path& dir, const ExperimentConfig& c,
                           const std::string& extra = "") {
  const auto p = dir / "experiment.cfg";
  std::ofstream out(p);
  write_config(out, c);
  out << extra;
  return p;
}

}  // namespace

TEST(Config, RoundTrip) {
  ExperimentConfig c = small_config();
  c.schedule.lambda_alpha = 0.875;
  c.schedule.lambda_beta = 0.55;
  c.objective = "centers";
  std::stringstream ss;
  write_config(ss, c);
  EXPECT_EQ(read_config(ss), c);
}

TEST(Config, ShippedFilesParse) {
  const auto c = read_config_file(fs::path(GDSRQ_CONFIG_DIR) / "regression.cfg");
  EXPECT_EQ(c, ExperimentConfig{});
  std::ifstream in(fs::path(GDSRQ_CONFIG_DIR) / "bits_sweep.cfg");
  const auto s = read_sweep_spec(in);
  EXPECT_EQ(s.parameter, "bits");
  EXPECT_EQ(s.values, (std::vector<double>{2, 4, 6, 8}));
  EXPECT_EQ(s.seeds_per_cell, 10u);
}

TEST(Config, MissingAndUnknownKeysAreNamed) {
  std::stringstream ss("n_agents = 5\ndim = 2\nbogus = 1\n");
  try {
    read_config(ss);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (const char* key : {"radius", "lambda_beta", "seed", "bogus"})
      EXPECT_NE(msg.find(key), std::string::npos) << key << " not in: " << msg;
  }
}

TEST(Config, RejectsBadValues) {
  std::stringstream dup("seed = 1\nseed = 2\n");
  EXPECT_THROW(parse_key_values(dup), std::invalid_argument);
  ExperimentConfig c = small_config();
  std::stringstream ss;
  write_config(ss, c);
  std::string text = ss.str();
  text.replace(text.find("radius = "), 12, "radius = x.y");
  std::stringstream bad(text);
  EXPECT_THROW(read_config(bad), std::invalid_argument);
}

TEST(Csv, TrajectoryRoundTrip) {
  RunTrajectory t;
  t.records = {{0, 1.5, 0.25, 0.125, 1e-300}, {10, 0.1, 3.0e-17, 2.5e-5, 0.0}};
  std::stringstream ss;
  write_trajectory_csv(ss, t);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kTrajectoryHeader);
  EXPECT_EQ(read_trajectory_csv(ss), t.records);
}

TEST(Csv, ReferenceRoundTrip) {
  ReferenceSolution r;
  r.x_star = {0.1, -0.33333333333333331, 1.0};
  r.f_star = 0.0123;
  r.tol = 1e-10;
  r.iterations = 77;
  r.residual = 3e-11;
  std::stringstream ss;
  write_reference(ss, r);
  const auto back = read_reference(ss);
  EXPECT_EQ(back.x_star, r.x_star);
  EXPECT_EQ(back.f_star, r.f_star);
}

TEST(Cli, RunWritesTrajectory) {
  TempDir dir;
  CliOptions o;
  o.config = write_config_file(dir.path(), small_config());
  o.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cli_run(o, out, err), kExitOk) << err.str();
  std::ifstream csv(o.out_dir / "trajectory.csv");
  EXPECT_EQ(read_trajectory_csv(csv).size(), 200u / 10u + 1u);
  for (const char* f : {"summary.txt", "reference.txt", "config.txt", "graph_edges.txt",
                        "graph_coords.txt", "mixing.csv", "dataset.csv"})
    EXPECT_TRUE(fs::exists(o.out_dir / f)) << f;
}

TEST(Cli, RunRefusesInvalidSchedule) {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.schedule.lambda_beta = 0.5;
  CliOptions o;
  o.config = write_config_file(dir.path(), c);
  o.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  EXPECT_EQ(cli_run(o, out, err), kExitValidationFailure);
  EXPECT_NE(err.str().find("lambda_beta_range"), std::string::npos);
  EXPECT_FALSE(fs::exists(o.out_dir / "trajectory.csv"));
  o.waive_validation = true;
  EXPECT_EQ(cli_run(o, out, err), kExitOk);
}

TEST(Cli, RunIsByteReproducible) {
  TempDir dir;
  CliOptions o;
  o.config = write_config_file(dir.path(), small_config());
  std::ostringstream out, err;
  o.out_dir = dir.path() / "a";
  ASSERT_EQ(cli_run(o, out, err), kExitOk);
  o.out_dir = dir.path() / "b";
  o.threads = 4;
  ASSERT_EQ(cli_run(o, out, err), kExitOk);
  EXPECT_EQ(slurp(dir.path() / "a" / "trajectory.csv"), slurp(dir.path() / "b" / "trajectory.csv"));
}

TEST(Cli, RunOverrides) {
  TempDir dir;
  CliOptions o;
  o.config = write_config_file(dir.path(), small_config());
  o.out_dir = dir.path() / "out";
  o.iterations = 35;
  o.bits = 0;
  std::ostringstream out, err;
  ASSERT_EQ(cli_run(o, out, err), kExitOk);
  std::ifstream csv(o.out_dir / "trajectory.csv");
  EXPECT_EQ(read_trajectory_csv(csv).back().k, 35u);
  EXPECT_NE(slurp(o.out_dir / "config.txt").find("bits = 0"), std::string::npos);
}

TEST(Cli, MissingConfigIsRuntimeError) {
  CliOptions o;
  o.config = "/nonexistent/none.cfg";
  std::ostringstream out, err;
  EXPECT_EQ(cli_run(o, out, err), kExitRuntimeError);
  EXPECT_EQ(cli_validate(o, out, err), kExitRuntimeError);
}

TEST(Cli, SweepArtifacts) {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.iterations = 50;
  CliOptions o;
  o.config = write_config_file(dir.path(), c, "sweep = bits\nvalues = 2, 4, 6, 8\nseeds_per_cell = 10\n");
  o.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  ASSERT_EQ(cli_sweep(o, out, err), kExitOk) << err.str();
  std::size_t cells = 0;
  for (const auto& e : fs::directory_iterator(o.out_dir / "cells")) cells += e.path().extension() == ".csv";
  EXPECT_EQ(cells, 40u);
  EXPECT_TRUE(fs::exists(o.out_dir / "sweep_gap_z.csv"));
  EXPECT_TRUE(fs::exists(o.out_dir / "sweep_gap_z.svg"));
  std::ifstream in(o.out_dir / "sweep_gap_z.csv");
  EXPECT_EQ(read_sweep_csv(in).size(), 4u * (50u / 10u + 1u));
}

TEST(Cli, SingleValueSweepMatchesRun) {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.iterations = 60;
  c.seed = 5;
  CliOptions run_opts;
  run_opts.config = write_config_file(dir.path(), c);
  run_opts.out_dir = dir.path() / "run";
  std::ostringstream out, err;
  ASSERT_EQ(cli_run(run_opts, out, err), kExitOk);

  CliOptions sweep_opts;
  sweep_opts.config = write_config_file(dir.path(), c, "sweep = bits\nvalues = 4\nseeds_per_cell = 1\n");
  sweep_opts.out_dir = dir.path() / "sweep";
  ASSERT_EQ(cli_sweep(sweep_opts, out, err), kExitOk) << err.str();
  EXPECT_EQ(slurp(dir.path() / "run" / "trajectory.csv"),
            slurp(dir.path() / "sweep" / "cells" / "bits-4_seed-5.csv"));
}

TEST(Cli, ValidateExitCodes) {
  TempDir dir;
  std::ostringstream out, err;
  CliOptions o;
  o.config = write_config_file(dir.path(), small_config());
  EXPECT_EQ(cli_validate(o, out, err), kExitOk) << out.str();

  ExperimentConfig c = small_config();
  c.schedule.lambda_alpha = 0.4;
  o.config = write_config_file(dir.path(), c);
  out.str("");
  EXPECT_EQ(cli_validate(o, out, err), kExitValidationFailure);
  EXPECT_NE(out.str().find("FAIL  lambda_alpha_range"), std::string::npos);

  c = small_config();
  c.schedule.beta0 = 50.0;
  o.config = write_config_file(dir.path(), c);
  out.str("");
  EXPECT_EQ(cli_validate(o, out, err), kExitValidationFailure);
  EXPECT_NE(out.str().find("FAIL  spectral_gap_beta0"), std::string::npos);
}

TEST(Chart, DeterministicSvg) {
  std::vector<ChartSeries> s(2);
  s[0].label = "a";
  s[1].label = "b";
  for (int k = 1; k <= 100; ++k) {
    s[0].points.emplace_back(k, 1.0 / k);
    s[1].points.emplace_back(k, 2.0 / std::sqrt(k));
  }
  const auto svg = svg_line_chart(s, "gap", "value");
  EXPECT_EQ(svg, svg_line_chart(s, "gap", "value"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
