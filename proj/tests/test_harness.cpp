#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tsnet/harness.hpp"
#include "test_support.hpp"

using namespace tsnet;
namespace fs = std::filesystem;

namespace {

std::vector<RateRow> power_law(double C, double exponent, int reps = 3) {
  std::vector<RateRow> rows;
  for (std::size_t n : {128, 256, 512, 1024, 2048})
    for (int r = 0; r < reps; ++r) rows.push_back({n, r, 0, C * std::pow(static_cast<double>(n), exponent)});
  return rows;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.teacher_widths = {2, 3};
  cfg.student_widths = {2, 6};
  cfg.n_grid = {64, 128, 256};
  cfg.reps = 2;
  cfg.train.epochs = 60;
  cfg.train.restarts = 1;
  cfg.train.step0 = 0.5;
  cfg.workers = 1;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("slope fit on synthetic power laws") {
  const auto a = fit_rate_slope(power_law(3.0, -2.0 / 3));
  CHECK(a.slope == doctest::Approx(-2.0 / 3).epsilon(1e-9));
  CHECK(a.r_squared == doctest::Approx(1.0));
  CHECK(a.ci_low <= a.slope);
  CHECK(a.ci_high >= a.slope);

  CHECK(fit_rate_slope(power_law(0.5, -1.0)).slope == doctest::Approx(-1.0).epsilon(1e-9));

  const auto flat = fit_rate_slope(power_law(0.2, 0.0));
  CHECK(std::abs(flat.slope) <= 1e-9);
  CHECK(flat.r_squared == doctest::Approx(0.0));

  // A zero mean is dropped with a warning; failed rows are ignored.
  auto rows = power_law(1.0, -1.0);
  for (auto& r : rows)
    if (r.n == 2048) r.excess_risk = 0.0;
  rows.push_back({128, 9, 0, 1e6, 0.0, 0.0, "failed: diverged"});
  const auto dropped = fit_rate_slope(rows);
  CHECK(dropped.n_used.size() == 4);
  CHECK(dropped.warnings.size() == 1);
  CHECK(dropped.slope == doctest::Approx(-1.0).epsilon(1e-9));

  std::vector<RateRow> two;
  for (const auto& r : power_law(1.0, -1.0))
    if (r.n <= 256) two.push_back(r);
  CHECK_THROWS_AS(fit_rate_slope(two), ConfigError);
}

TEST_CASE("cell seeds") {
  CHECK(cell_seed(1, 256, 0) == cell_seed(1, 256, 0));
  CHECK(cell_seed(1, 256, 0) != cell_seed(1, 256, 1));
  CHECK(cell_seed(1, 256, 0) != cell_seed(1, 512, 0));
  CHECK(cell_seed(1, 256, 0) != cell_seed(2, 256, 0));
}

TEST_CASE("config json") {
  const auto cfg = tiny_config();
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  auto j = cfg.to_json();
  j["unknown_key"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

  auto bad = cfg;
  bad.n_grid = {256, 128};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.reps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.student_widths = {3, 6};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("single-cell experiment") {
  auto cfg = tiny_config();
  cfg.n_grid = {64};
  cfg.reps = 1;
  const auto result = run_rate_experiment(cfg);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].ok());
  CHECK(result.rows[0].excess_risk >= 0.0);
  CHECK(result.rows[0].seed == cell_seed(cfg.seed, 64, 0));
  // The row is reproducible from its seed alone.
  const auto again = run_cell(build_distribution(cfg), cfg, 64, 0);
  CHECK(again.excess_risk == result.rows[0].excess_risk);
}

TEST_CASE("experiment output is independent of the worker count") {
  const fs::path dir1 = fs::temp_directory_path() / "tsnet_test_run1";
  const fs::path dir2 = fs::temp_directory_path() / "tsnet_test_run2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  auto cfg = tiny_config();
  cfg.output_dir = dir1.string();
  cfg.workers = 1;
  const auto a = run_rate_experiment(cfg);
  cfg.output_dir = dir2.string();
  cfg.workers = 3;
  const auto b = run_rate_experiment(cfg);
  REQUIRE(a.rows.size() == 6);
  CHECK(slurp(dir1 / "rows.csv") == slurp(dir2 / "rows.csv"));
  CHECK(fs::exists(dir1 / "report.json"));
  CHECK(fs::exists(dir1 / "timings.csv"));
  CHECK_FALSE(fs::exists(dir1 / "rows.partial.csv"));
  for (std::size_t i = 1; i < a.rows.size(); ++i)
    CHECK(std::make_pair(a.rows[i - 1].n, a.rows[i - 1].rep) < std::make_pair(a.rows[i].n, a.rows[i].rep));

  const auto rows = read_rows_csv((dir1 / "rows.csv").string());
  REQUIRE(rows.size() == a.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].excess_risk == a.rows[i].excess_risk);
    CHECK(rows[i].seed == a.rows[i].seed);
  }
  const auto report = nlohmann::json::parse(slurp(dir1 / "report.json"));
  CHECK(report.contains("fit"));
  CHECK(report.contains("environment"));
  CHECK(report["config"]["seed"] == cfg.seed);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("realizable teacher: risk falls with n") {
  auto cfg = tiny_config();
  cfg.n_grid = {32, 2048};
  cfg.reps = 4;
  cfg.train.epochs = 300;
  const auto result = run_rate_experiment(cfg);
  double small = 0.0, large = 0.0;
  for (const auto& r : result.rows) (r.n == 32 ? small : large) += r.excess_risk;
  CHECK(large < small);
}

TEST_CASE("noise-condition report") {
  const auto affine = verify_a3_report(test::affine_1d(1.0, -0.3));
  REQUIRE(affine.rows.size() == 1);
  CHECK(affine.rows[0].outcome == "pass");
  CHECK(affine.pass_rate == 1.0);

  const auto constant = verify_a3_report(test::affine_1d(0.0, 1.0));
  CHECK(constant.rows[0].outcome == "no active pieces");
  CHECK(constant.pass_rate == 1.0);

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
  const auto batch = verify_a3_report({1, 8}, WeightDistribution::Normal, seeds);
  CHECK(batch.rows.size() == 20);
  CHECK(batch.pass_rate >= 0.95);
  CHECK(batch.to_json()["rows"].size() == 20);
}

#ifdef TSNET_CLI_PATH
TEST_CASE("command-line exit codes") {
  const std::string cli = TSNET_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const fs::path dir = fs::temp_directory_path() / "tsnet_cli_test";
  fs::create_directories(dir);
  const auto net = (dir / "net.json").string();
  save_network(test::affine_1d(1.0, -0.5), net);

  CHECK(run("bounds serra --widths 2,3") == 0);
  CHECK(run("regions --net " + net + " --box 0,1") == 0);
  CHECK(run("bounds serra --widths 2,x") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("regions --net " + (dir / "missing.json").string()) == 2);
  CHECK(run("experiment --config " + (dir / "missing.json").string()) == 2);
  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"layers":[{"w":[[1]],"b":[0)";
  }
  CHECK(run("regions --net " + (dir / "bad.json").string()) == 2);
  // Knots 2, -1, 0 at x = 0, 1/4, 1/2, then flat at zero: mean zero, and the flat
  // piece lies on the decision boundary, so the noise condition is unverifiable.
  {
    std::ofstream flat(dir / "flat.json");
    flat << R"({"layers":[{"w":[[1.0],[1.0],[1.0]],"b":[1.0,-0.25,-0.5]},{"w":[[-12.0,16.0,-4.0]],"b":[14.0]}]})";
  }
  CHECK(run("noise --net " + (dir / "flat.json").string()) == 3);
  fs::remove_all(dir);
}
#endif
