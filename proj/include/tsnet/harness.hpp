#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsnet/distribution.hpp"
#include "tsnet/network.hpp"
#include "tsnet/training.hpp"

namespace tsnet {

/// One rate experiment. Widths lists start with the input dimension d.
struct ExperimentConfig {
  int d = 2;
  std::vector<int> teacher_widths{2, 4};
  std::optional<std::string> teacher_file;
  std::uint64_t teacher_seed = 7;
  WeightDistribution weight_dist = WeightDistribution::Normal;
  Mode mode = Mode::Overlap;
  std::optional<double> tau;
  std::vector<int> student_widths{2, 16, 16};
  std::vector<std::size_t> n_grid{256, 512, 1024, 2048, 4096, 8192, 16384};
  int reps = 20;
  std::uint64_t seed = 20240501;
  std::optional<VolumeMode> risk_mode;
  std::size_t mc_samples = 1000000;
  /// Headline training budget: one restart with a larger step than the
  /// standalone default, which plateaus well above the Bayes risk in 2000 epochs.
  TrainConfig train = [] {
    TrainConfig t;
    t.step0 = 0.5;
    t.restarts = 1;
    return t;
  }();
  unsigned workers = 0;  ///< 0: hardware concurrency
  std::string output_dir;

  /// Throws ConfigError on invalid combinations.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

struct RateRow {
  std::size_t n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  double excess_risk = 0.0;
  double standard_error = 0.0;
  double train_seconds = 0.0;
  std::string status = "ok";  ///< "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
};

/// OLS fit of log(mean excess risk) on log n.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;
  double r_squared = 0.0;
  double ci_low = 0.0;   ///< 95% t-interval for the slope
  double ci_high = 0.0;
  std::vector<std::size_t> n_used;
  std::vector<double> mean_risk;
  std::vector<std::string> warnings;
};

struct RateResult {
  std::vector<RateRow> rows;  ///< sorted by (n, rep)
  SlopeFit fit;
  std::size_t failed_rows = 0;
};

/// Child seed of cell (n, rep).
std::uint64_t cell_seed(std::uint64_t master, std::size_t n, int rep);

/// Teacher distribution named by the configuration.
TeacherDistribution build_distribution(const ExperimentConfig& config);

/// Trains and scores one (n, rep) cell from its own seed.
RateRow run_cell(const TeacherDistribution& dist, const ExperimentConfig& config, std::size_t n, int rep);

/// Runs every (n, rep) cell on a worker pool; output is independent of the
/// schedule. When `output_dir` is set, rows are appended to rows.partial.csv as
/// they finish, and rows.csv, timings.csv and report.json are written at the end.
RateResult run_rate_experiment(const ExperimentConfig& config);

/// Needs at least three distinct n with positive mean risk; n with zero mean
/// are dropped with a warning, failed rows are ignored.
SlopeFit fit_rate_slope(const std::vector<RateRow>& rows);

void write_rows_csv(const std::vector<RateRow>& rows, const std::string& path);
void write_timings_csv(const std::vector<RateRow>& rows, const std::string& path);
std::vector<RateRow> read_rows_csv(const std::string& path);
nlohmann::ordered_json report_json(const ExperimentConfig& config, const RateResult& result);

/// Noise-constant check over a batch of teachers.
struct A3Row {
  std::uint64_t seed = 0;
  double c = 0.0;
  double T = 0.0;
  std::size_t active_pieces = 0;
  double worst_ratio = 0.0;   ///< max over the grid of measured(t) / (c t)
  std::string outcome;        ///< "pass", "fail", "no active pieces" or "error: ..."
};

struct A3Report {
  std::vector<A3Row> rows;
  double pass_rate = 0.0;  ///< "no active pieces" counts as a pass

  nlohmann::ordered_json to_json() const;
};

/// Random teachers: widths start with d; each seed is normalized on the unit box.
A3Report verify_a3_report(const std::vector<int>& widths, WeightDistribution dist,
                          const std::vector<std::uint64_t>& seeds, int grid_points = 64);
/// A fixed teacher (normalized first).
A3Report verify_a3_report(const NetworkParams& teacher, int grid_points = 64);

}  // namespace tsnet
