#include "tsnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "tsnet/errors.hpp"
#include "tsnet/random.hpp"

namespace tsnet {

namespace {

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (d < 1) throw ConfigError("d must be positive");
  if (!teacher_file && (teacher_widths.empty() || teacher_widths.front() != d)) {
    throw ConfigError("teacher_widths must start with the input dimension d");
  }
  if (student_widths.empty() || student_widths.front() != d) {
    throw ConfigError("student_widths must start with the input dimension d");
  }
  if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
      throw ConfigError("n_grid must be positive and strictly ascending");
    }
  }
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (risk_mode == VolumeMode::Exact && d > 2) throw ConfigError("exact risk evaluation requires d <= 2");
  if (tau && mode != Mode::Separable) throw ConfigError("tau only applies to separable mode");
  if (mc_samples < 1) throw ConfigError("mc_samples must be positive");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  if (teacher_file) {
    j["teacher_file"] = *teacher_file;
  } else {
    j["teacher_widths"] = teacher_widths;
    j["teacher_seed"] = teacher_seed;
    j["weight_dist"] = tsnet::to_string(weight_dist);
  }
  j["mode"] = tsnet::to_string(mode);
  if (tau) j["tau"] = *tau;
  j["student_widths"] = student_widths;
  j["n_grid"] = n_grid;
  j["reps"] = reps;
  j["seed"] = seed;
  if (risk_mode) j["risk_mode"] = *risk_mode == VolumeMode::Exact ? "exact" : "mc";
  j["mc_samples"] = mc_samples;
  j["train"] = {{"epochs", train.epochs},
                {"restarts", train.restarts},
                {"step0", train.step0},
                {"B", train.spec.max_abs_weight},
                {"F", train.spec.max_sup_norm},
                {"max_depth", train.spec.max_depth},
                {"max_width", train.spec.max_width},
                {"max_nonzero", train.spec.max_nonzero},
                {"clip_weights", train.clip_weights},
                {"rescale_output", train.rescale_output},
                {"probe_points", train.probe_points}};
  j["workers"] = workers;
  if (!output_dir.empty()) j["output_dir"] = output_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "d",        "teacher_widths", "teacher_file", "teacher_seed", "weight_dist", "mode",
      "tau",      "student_widths", "n_grid",       "reps",         "seed",        "risk_mode",
      "mc_samples", "train",        "workers",      "output_dir"};
  static const std::vector<std::string> known_train = {"epochs",    "restarts",     "step0",        "B",
                                                       "F",         "max_depth",    "max_width",    "max_nonzero",
                                                       "clip_weights", "rescale_output", "probe_points"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.d = get_or(j, "d", c.d);
    c.teacher_widths = get_or(j, "teacher_widths", std::vector<int>{c.d, 4});
    if (j.contains("teacher_file")) c.teacher_file = j.at("teacher_file").get<std::string>();
    c.teacher_seed = get_or(j, "teacher_seed", c.teacher_seed);
    if (j.contains("weight_dist")) c.weight_dist = parse_weight_distribution(j.at("weight_dist").get<std::string>());
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    c.student_widths = get_or(j, "student_widths", std::vector<int>{c.d, 16, 16});
    c.n_grid = get_or(j, "n_grid", c.n_grid);
    c.reps = get_or(j, "reps", c.reps);
    c.seed = get_or(j, "seed", c.seed);
    if (j.contains("risk_mode")) {
      const auto m = j.at("risk_mode").get<std::string>();
      if (m == "exact") {
        c.risk_mode = VolumeMode::Exact;
      } else if (m == "mc") {
        c.risk_mode = VolumeMode::MonteCarlo;
      } else {
        throw ConfigError("risk_mode must be 'exact' or 'mc'");
      }
    }
    c.mc_samples = get_or(j, "mc_samples", c.mc_samples);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      for (const auto& [key, _] : t.items()) {
        if (std::find(known_train.begin(), known_train.end(), key) == known_train.end()) {
          throw ConfigError("unknown train key '" + key + "'");
        }
      }
      c.train.epochs = get_or(t, "epochs", c.train.epochs);
      c.train.restarts = get_or(t, "restarts", c.train.restarts);
      c.train.step0 = get_or(t, "step0", c.train.step0);
      c.train.spec.max_abs_weight = get_or(t, "B", c.train.spec.max_abs_weight);
      c.train.spec.max_sup_norm = get_or(t, "F", c.train.spec.max_sup_norm);
      c.train.spec.max_depth = get_or(t, "max_depth", c.train.spec.max_depth);
      c.train.spec.max_width = get_or(t, "max_width", c.train.spec.max_width);
      c.train.spec.max_nonzero = get_or(t, "max_nonzero", c.train.spec.max_nonzero);
      c.train.clip_weights = get_or(t, "clip_weights", c.train.clip_weights);
      c.train.rescale_output = get_or(t, "rescale_output", c.train.rescale_output);
      c.train.probe_points = get_or(t, "probe_points", c.train.probe_points);
    }
    c.workers = get_or(j, "workers", c.workers);
    c.output_dir = get_or(j, "output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t n, int rep) {
  return derive_seed(master, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)});
}

TeacherDistribution build_distribution(const ExperimentConfig& config) {
  config.validate();
  const NetworkParams raw = config.teacher_file
                                ? load_network(*config.teacher_file)
                                : make_random_teacher(config.teacher_widths, config.teacher_seed, config.weight_dist);
  if (raw.input_dim() != config.d) throw ConfigError("teacher input dimension does not match d");
  TeacherDistribution dist = normalize_teacher(raw, Box::unit(config.d));
  if (config.mode == Mode::Separable) return dist.with_mode(Mode::Separable, config.tau);
  return dist;
}

RateRow run_cell(const TeacherDistribution& dist, const ExperimentConfig& config, std::size_t n, int rep) {
  RateRow row;
  row.n = n;
  row.rep = rep;
  row.seed = cell_seed(config.seed, n, rep);
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dataset data = sample(dist, n, derive_seed(row.seed, {0}));
    TrainConfig train = config.train;
    train.widths.assign(config.student_widths.begin() + 1, config.student_widths.end());
    train.seed = derive_seed(row.seed, {1});
    train.record_history = false;
    const TrainedStudent student = hinge_erm(data, train);
    row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Estimate risk = excess_risk(dist, student.net, {config.risk_mode, config.mc_samples});
    row.excess_risk = risk.value;
    row.standard_error = risk.standard_error;
  } catch (const NumericalError& e) {
    row.status = std::string("failed: ") + e.what();
    row.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

namespace {

void write_row(std::ostream& out, const RateRow& r) {
  std::string status = r.status;
  std::replace(status.begin(), status.end(), ',', ';');
  out << r.n << ',' << r.rep << ',' << r.seed << ',' << format_real(r.excess_risk) << ','
      << format_real(r.standard_error) << ',' << status << '\n';
}

}  // namespace

RateResult run_rate_experiment(const ExperimentConfig& config) {
  config.validate();
  const TeacherDistribution dist = build_distribution(config);

  std::vector<std::pair<std::size_t, int>> cells;
  for (std::size_t n : config.n_grid) {
    for (int rep = 0; rep < config.reps; ++rep) cells.emplace_back(n, rep);
  }
  RateResult result;
  result.rows.resize(cells.size());

  std::unique_ptr<std::ofstream> partial;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    partial = std::make_unique<std::ofstream>(std::filesystem::path(config.output_dir) / "rows.partial.csv");
    *partial << "n,rep,seed,excess_risk,se,status\n";
  }
  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      result.rows[i] = run_cell(dist, config, cells[i].first, cells[i].second);
      if (partial) {
        std::lock_guard<std::mutex> lock(io);
        write_row(*partial, result.rows[i]);
        partial->flush();
      }
    }
  };
  unsigned workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(result.rows.begin(), result.rows.end(),
            [](const RateRow& a, const RateRow& b) { return std::tie(a.n, a.rep) < std::tie(b.n, b.rep); });
  result.failed_rows = static_cast<std::size_t>(
      std::count_if(result.rows.begin(), result.rows.end(), [](const RateRow& r) { return !r.ok(); }));
  try {
    result.fit = fit_rate_slope(result.rows);
  } catch (const ConfigError& e) {
    result.fit.warnings.push_back(std::string("slope not fitted: ") + e.what());
    result.fit.slope = std::numeric_limits<double>::quiet_NaN();
  }

  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    partial.reset();
    write_rows_csv(result.rows, (dir / "rows.csv").string());
    write_timings_csv(result.rows, (dir / "timings.csv").string());
    std::ofstream report(dir / "report.json");
    report << report_json(config, result).dump(2) << '\n';
    std::filesystem::remove(dir / "rows.partial.csv");
  }
  return result;
}

SlopeFit fit_rate_slope(const std::vector<RateRow>& rows) {
  std::map<std::size_t, std::pair<double, int>> sums;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    auto& s = sums[r.n];
    s.first += r.excess_risk;
    s.second += 1;
  }
  SlopeFit fit;
  std::vector<double> xs, ys;
  for (const auto& [n, s] : sums) {
    const double mean = s.first / s.second;
    if (!(mean > 0.0)) {
      fit.warnings.push_back("n=" + std::to_string(n) + " dropped: mean excess risk is zero");
      continue;
    }
    fit.n_used.push_back(n);
    fit.mean_risk.push_back(mean);
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(mean));
  }
  const std::size_t k = xs.size();
  if (k < 3) throw ConfigError("slope fit needs at least 3 distinct n with positive mean risk");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += e * e;
  }
  // A flat series has nothing to explain; report R^2 = 0 rather than 0/0.
  fit.r_squared = syy > 1e-300 ? std::max(0.0, 1.0 - sse / syy) : 0.0;
  fit.standard_error = std::sqrt(sse / static_cast<double>(k - 2) / sxx);
  const boost::math::students_t t(static_cast<double>(k - 2));
  const double q = boost::math::quantile(boost::math::complement(t, 0.025));
  fit.ci_low = fit.slope - q * fit.standard_error;
  fit.ci_high = fit.slope + q * fit.standard_error;
  return fit;
}

void write_rows_csv(const std::vector<RateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "n,rep,seed,excess_risk,se,status\n";
  for (const auto& r : rows) write_row(out, r);
}

void write_timings_csv(const std::vector<RateRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "n,rep,train_secs\n";
  for (const auto& r : rows) out << r.n << ',' << r.rep << ',' << format_real(r.train_seconds) << '\n';
}

std::vector<RateRow> read_rows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rows file " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("n,rep,seed,excess_risk", 0) != 0) throw ParseError(path + ": unexpected header");
  std::vector<RateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 5) throw ParseError(path + ": short row '" + line + "'");
    RateRow r;
    try {
      r.n = std::stoull(cells[0]);
      r.rep = std::stoi(cells[1]);
      r.seed = std::stoull(cells[2]);
      r.excess_risk = std::stod(cells[3]);
      r.standard_error = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw ParseError(path + ": bad number in row '" + line + "'");
    }
    if (cells.size() > 5) r.status = cells[5];
    rows.push_back(r);
  }
  return rows;
}

nlohmann::ordered_json report_json(const ExperimentConfig& config, const RateResult& result) {
  nlohmann::ordered_json j;
  j["config"] = config.to_json();
  j["regime"] = "hinge-loss surrogate (0-1 ERM approximated by the sign of the hinge minimizer)";
  nlohmann::ordered_json fit;
  fit["slope"] = result.fit.slope;
  fit["stderr"] = result.fit.standard_error;
  fit["r2"] = result.fit.r_squared;
  fit["ci95"] = {result.fit.ci_low, result.fit.ci_high};
  fit["intercept"] = result.fit.intercept;
  fit["n_used"] = result.fit.n_used;
  fit["mean_excess_risk"] = result.fit.mean_risk;
  fit["warnings"] = result.fit.warnings;
  j["fit"] = fit;
  j["rows"] = result.rows.size();
  j["failed_rows"] = result.failed_rows;
  nlohmann::ordered_json failed = nlohmann::ordered_json::array();
  for (const auto& r : result.rows) {
    if (!r.ok()) failed.push_back({{"n", r.n}, {"rep", r.rep}, {"status", r.status}});
  }
  j["failures"] = failed;
  j["environment"] = {{"compiler", __VERSION__},
                      {"cxx_standard", static_cast<long>(__cplusplus)},
                      {"hardware_threads", std::thread::hardware_concurrency()},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)}};
  return j;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json A3Report::to_json() const {
  nlohmann::ordered_json j;
  j["pass_rate"] = pass_rate;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    list.push_back({{"seed", r.seed},
                    {"c", r.c},
                    {"T", r.T},
                    {"active_pieces", r.active_pieces},
                    {"worst_ratio", r.worst_ratio},
                    {"outcome", r.outcome}});
  }
  j["rows"] = list;
  return j;
}

namespace {

A3Row check_teacher(const NetworkParams& raw, std::uint64_t seed, int grid_points) {
  A3Row row;
  row.seed = seed;
  const int d = static_cast<int>(raw.input_dim());
  if (d > 2) {
    row.outcome = "error: exact noise profile needs d <= 2";
    return row;
  }
  std::optional<TeacherDistribution> dist;
  try {
    dist.emplace(normalize_teacher(raw, Box::unit(d)));
  } catch (const ConfigError&) {
    row.outcome = "no active pieces";
    return row;
  }
  try {
    const A3Constants a3 = a3_constants_analytic(*dist);
    row.c = a3.c;
    row.T = a3.T;
    row.active_pieces = a3.active_pieces;
    if (!a3.has_active) {
      row.outcome = "no active pieces";
      return row;
    }
    std::vector<double> grid;
    for (int i = 1; i <= grid_points; ++i) grid.push_back(a3.T * i / grid_points);
    const NoiseProfile profile = noise_profile(*dist, grid, a3.T);
    bool ok = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double bound = a3.c * grid[i];
      row.worst_ratio = std::max(row.worst_ratio, profile.measured[i].value / bound);
      if (profile.measured[i].value > bound * (1.0 + 1e-9) + 1e-12) ok = false;
    }
    row.outcome = ok ? "pass" : "fail";
  } catch (const NumericalError& e) {
    row.outcome = std::string("error: ") + e.what();
  }
  return row;
}

A3Report summarize(std::vector<A3Row> rows) {
  A3Report report;
  report.rows = std::move(rows);
  std::size_t good = 0;
  for (const auto& r : report.rows) {
    if (r.outcome == "pass" || r.outcome == "no active pieces") ++good;
  }
  report.pass_rate = report.rows.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(report.rows.size());
  return report;
}

}  // namespace

A3Report verify_a3_report(const std::vector<int>& widths, WeightDistribution dist,
                          const std::vector<std::uint64_t>& seeds, int grid_points) {
  std::vector<A3Row> rows;
  for (std::uint64_t seed : seeds) rows.push_back(check_teacher(make_random_teacher(widths, seed, dist), seed, grid_points));
  return summarize(std::move(rows));
}

A3Report verify_a3_report(const NetworkParams& teacher, int grid_points) {
  return summarize({check_teacher(teacher, 0, grid_points)});
}

}  // namespace tsnet
