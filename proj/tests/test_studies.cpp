#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "blockgp/studies.hpp"

using namespace blockgp;
using Catch::Matchers::WithinAbs;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("blockgp_study_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("schwefel function values") {
  REQUIRE(schwefel(Eigen::VectorXd::Zero(4)) == 0.0);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(4), b = Eigen::VectorXd::Zero(4);
  a(0) = 0.37;
  b(1) = 0.37;
  REQUIRE(schwefel(a) == schwefel(b));  // coordinate symmetry
  Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
  c(0) = 0.5;
  REQUIRE_THAT(schwefel(c), WithinAbs(0.18058915853139122, 1e-15));
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad(2) = 1.0;
  REQUIRE_THROWS_AS(schwefel(bad), std::invalid_argument);
}

TEST_CASE("approx study: block predictor tracks the dense one more closely") {
  StudyConfig cfg;
  cfg.k = 4;
  cfg.seed = 1;
  cfg.grid = 200;  // smaller grid for the unit test; acceptance runs the full one
  const ApproxResult r = run_approx_core(cfg);
  REQUIRE(r.mad_blubp < r.mad_cl);
  REQUIRE(std::isfinite(r.mad_blubp));
}

TEST_CASE("approx study: singleton blocks still produce finite curves") {
  StudyConfig cfg;
  cfg.k = 16;
  cfg.seed = 2;
  cfg.grid = 100;
  const ApproxResult r = run_approx_core(cfg);
  for (const auto& pr : r.blubp) {
    REQUIRE(std::isfinite(pr.mean));
    REQUIRE(std::isfinite(pr.variance));
    REQUIRE(pr.variance >= 0.0);
  }
}

TEST_CASE("table study: single replication reports squared error as MSE") {
  StudyConfig cfg;
  cfg.scenario = "1d";
  cfg.reps = 1;
  cfg.seed = 3;
  cfg.n = 40;
  cfg.k = 4;
  cfg.grid = 20;
  cfg.multistarts = 2;
  cfg.methods = {"CI"};
  const MetricsReport rep = run_table_core(cfg);
  const auto& ps = rep.by_method.at("CI").stats.at("phi1");
  REQUIRE(rep.by_method.at("CI").failures == 0);
  REQUIRE_THAT(ps.mse, WithinAbs(ps.bias * ps.bias, 1e-12));
}

TEST_CASE("table study: MSE = bias^2 + variance identity") {
  StudyConfig cfg;
  cfg.scenario = "1d";
  cfg.reps = 6;
  cfg.seed = 4;
  cfg.n = 30;
  cfg.k = 3;
  cfg.grid = 10;
  cfg.multistarts = 2;
  cfg.max_iter = 120;
  cfg.methods = {"CI", "CML"};
  const MetricsReport rep = run_table_core(cfg);
  for (const auto& m : rep.methods) {
    for (const auto& pn : rep.param_names) {
      const auto& ps = rep.by_method.at(m).stats.at(pn);
      REQUIRE_THAT(ps.mse, WithinAbs(ps.bias * ps.bias + ps.variance,
                                     1e-12 * std::max(1.0, ps.mse)));
    }
  }
}

TEST_CASE("table study config validation") {
  StudyConfig cfg;
  cfg.scenario = "bad";
  REQUIRE_THROWS_AS(run_table_core(cfg), std::invalid_argument);
  cfg.scenario = "1d";
  cfg.reps = 0;
  REQUIRE_THROWS_AS(run_table_core(cfg), std::invalid_argument);
  cfg.reps = 1;
  cfg.n = 6000;  // beyond the dense cap with ML requested
  cfg.k = 10;
  cfg.methods = {"ML"};
  REQUIRE_THROWS_AS(run_table_core(cfg), std::invalid_argument);
}

TEST_CASE("schwefel study: tiny run produces finite report and k=1 collapse works") {
  StudyConfig cfg;
  cfg.n = 60;
  cfg.k = 3;
  cfg.grid = 50;
  cfg.seed = 5;
  cfg.multistarts = 1;
  cfg.max_iter = 60;
  const SchwefelResult r = run_schwefel_core(cfg);
  REQUIRE(r.mse.count("CI") == 1);
  for (const auto& [m, v] : r.mse) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= 0.0);
  }
  REQUIRE_THROWS_AS(
      [] {
        StudyConfig big;
        big.n = 30000;
        big.k = 10;
        return run_schwefel_core(big);
      }(),
      std::invalid_argument);
}

TEST_CASE("study outputs are byte-identical across thread counts") {
  StudyConfig cfg;
  cfg.scenario = "1d";
  cfg.reps = 4;
  cfg.n = 30;
  cfg.k = 3;
  cfg.grid = 15;
  cfg.seed = 6;
  cfg.multistarts = 2;
  cfg.max_iter = 100;
  cfg.methods = {"CI", "CML"};

  TempDir d1("t1"), d2("t2");
  cfg.threads = 1;
  cfg.outdir = d1.path.string();
  run_table_study(cfg);
  cfg.threads = 4;
  cfg.outdir = d2.path.string();
  run_table_study(cfg);
  for (const char* f : {"report.json", "estimates.csv", "rmse.csv"}) {
    REQUIRE(slurp((d1.path / f).string()) == slurp((d2.path / f).string()));
  }
}
