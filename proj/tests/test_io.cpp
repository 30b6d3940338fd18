#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stratostab/config.hpp"
#include "stratostab/matrix_io.hpp"
#include "stratostab/model.hpp"
#include "stratostab/pipeline.hpp"

using namespace stratostab;

TEST_CASE("matrix file round trip") {
  SUBCASE("identity") {
    const Matrix a = Matrix::Identity(3, 3);
    std::stringstream buf;
    write_matrix(buf, a);
    const Matrix b = read_matrix(buf);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("complex entries survive exactly") {
    Matrix a(2, 2);
    a << Complex(1.25, -0.5), Complex(0, 3.5), Complex(-2.0, 1e-17), Complex(0.1, 0.2);
    std::stringstream buf;
    write_matrix(buf, a);
    const Matrix b = read_matrix(buf);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("non-square parses but the model builder rejects it") {
    std::stringstream buf("2 3 real\n1 2 3 4 5 6\n");
    const Matrix a = read_matrix(buf);
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK_THROWS_AS(build_from_matrix(a, RealVector::Ones(2), RealVector::Ones(2)),
                    ConfigError);
  }
  SUBCASE("malformed inputs") {
    std::stringstream h("x 3 real\n");
    CHECK_THROWS_AS(read_matrix(h), ConfigError);
    std::stringstream k("2 2 quaternion\n1 2 3 4\n");
    CHECK_THROWS_AS(read_matrix(k), ConfigError);
    std::stringstream t("2 2 real\n1 2 3\n");
    CHECK_THROWS_WITH_AS(read_matrix(t),
                         doctest::Contains("expected 4 numbers, found 3"), ConfigError);
    std::stringstream e("2 2 real\n1 2 3 4 5\n");
    CHECK_THROWS_AS(read_matrix(e), ConfigError);
    std::stringstream n("2 2 real\n1 2 3 oops\n");
    CHECK_THROWS_AS(read_matrix(n), ConfigError);
  }
}

TEST_CASE("config parsing") {
  SUBCASE("full config") {
    const std::string text = R"cfg(
# canonical instance
[model]
kind = "advection_diffusion"
n = 200
nu = 0.01
f = 0.0
c = -0.5

[mask]
lo = 0.3
hi = 0.5

[controller]
kind = "real"
target_rate = -0.15

[sde]
dt = 2e-4
T = 60.0
paths = 64
seed = 12345

[certify]
gamma = 0.0
window = 0.5

[output]
directory = "out"
)cfg";
    const ExperimentConfig cfg = parse_config_text(text, "<test>");
    CHECK(cfg.n == 200);
    CHECK(cfg.nu == 0.01);
    CHECK(cfg.c == -0.5);
    CHECK(cfg.mask_lo == 0.3);
    CHECK(cfg.mask_hi == 0.5);
    CHECK(cfg.controller_kind == "real");
    CHECK(cfg.target_rate == -0.15);
    CHECK_FALSE(cfg.sigma_override.has_value());
    CHECK(cfg.dt == 2e-4);
    CHECK(cfg.horizon == 60.0);
    CHECK(cfg.paths == 64);
    CHECK(cfg.seed == 12345);
    CHECK(cfg.window == 0.5);
    CHECK(cfg.output_dir == "out");
  }
  SUBCASE("defaults apply when sections are omitted") {
    const ExperimentConfig cfg = parse_config_text("[sde]\npaths = 8\n", "<test>");
    CHECK(cfg.model_kind == "advection_diffusion");
    CHECK(cfg.paths == 8);
  }
  SUBCASE("rejected configs") {
    CHECK_THROWS_AS(parse_config_text("[model]\nkind = banana\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nn = 4\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[mask]\nlo = 0.5\nhi = 0.2\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[sde]\npaths = 0\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[unknown]\nx = 1\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[sde]\nwat = 1\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[sde]\ndt\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[controller]\ntarget_rate = 0.5\n", "<t>"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nkind = matrix\n", "<t>"), ConfigError);
  }
}

TEST_CASE("trajectory CSV round trip") {
  Trajectory traj;
  traj.times.resize(12);
  traj.norm_x.resize(12);
  traj.norm_xu.resize(12);
  traj.norm_xs.resize(12);
  for (Index i = 0; i < 12; ++i) {
    traj.times(i) = 0.5 * static_cast<double>(i);
    traj.norm_x(i) = std::exp(-0.3 * traj.times(i));
    traj.norm_xu(i) = 0.25 * traj.norm_x(i);
    traj.norm_xs(i) = 0.75 * traj.norm_x(i);
  }
  const auto dir = std::filesystem::temp_directory_path() / "stratostab_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "traj.csv").string();
  write_trajectory_csv(path, traj);
  const Trajectory back = read_trajectory_csv(path);
  CHECK((back.times - traj.times).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.norm_x - traj.norm_x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.norm_xu - traj.norm_xu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.norm_xs - traj.norm_xs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pipeline on a small instance is deterministic") {
  ExperimentConfig cfg;
  cfg.n = 48;
  cfg.nu = 0.01;
  cfg.c = -0.5;
  cfg.mask_lo = 0.3;
  cfg.mask_hi = 0.6;
  cfg.controller_kind = "real";
  cfg.sigma_override = 4.0;
  cfg.dt = 5e-4;
  cfg.horizon = 12.0;
  cfg.paths = 8;
  cfg.seed = 5;
  cfg.gamma = 0.05;

  const auto dir1 = std::filesystem::temp_directory_path() / "stratostab_run_a";
  const auto dir2 = std::filesystem::temp_directory_path() / "stratostab_run_b";
  RunOptions opt1;
  opt1.output_dir = dir1.string();
  RunOptions opt2;
  opt2.output_dir = dir2.string();
  opt2.threads = 2;

  const ExperimentReport r1 = run_pipeline(cfg, opt1);
  const ExperimentReport r2 = run_pipeline(cfg, opt2);
  CHECK(r1.n_modes == 4);
  CHECK(r1.channels == 3);
  CHECK(r1.verdict == r2.verdict);

  // Byte-identical outputs independent of threading.
  for (const char* name :
       {"spectrum.csv", "spectrum.json", "synthesis.json", "trajectory_path0003.csv",
        "ensemble.csv", "certificate.json", "summary.txt"}) {
    std::ifstream a(dir1 / name), b(dir2 / name);
    REQUIRE(a.good());
    REQUIRE(b.good());
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("pipeline surfaces the failing stage") {
  ExperimentConfig cfg;
  cfg.n = 10;
  cfg.nu = 0.01;
  cfg.c = 0.0;
  cfg.mask_lo = 0.501;
  cfg.mask_hi = 0.543;  // contains no grid point of the n=10 grid
  RunOptions opts;
  opts.write_outputs = false;
  try {
    run_pipeline(cfg, opts);
    FAIL("expected a stage error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("stage 'model'") != std::string::npos);
  }
}
