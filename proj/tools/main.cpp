#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsnet/bounds.hpp"
#include "tsnet/distribution.hpp"
#include "tsnet/errors.hpp"
#include "tsnet/geometry.hpp"
#include "tsnet/harness.hpp"
#include "tsnet/network.hpp"
#include "tsnet/training.hpp"

using namespace tsnet;

namespace {

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  return out;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_reals(text)) {
    if (v != static_cast<int>(v)) throw ConfigError("expected integers in '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Box parse_box(const std::string& text, int d) {
  const auto v = parse_reals(text);
  if (v.size() == 2) {
    if (!(v[0] < v[1])) throw ConfigError("box needs lo < hi");
    return Box::cube(d, v[0], v[1]);
  }
  if (v.size() == static_cast<std::size_t>(2 * d)) {
    Box b{Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (int i = 0; i < d; ++i) {
      b.lower(i) = v[2 * i];
      b.upper(i) = v[2 * i + 1];
      if (!(b.lower(i) < b.upper(i))) throw ConfigError("box needs lo < hi on every axis");
    }
    return b;
  }
  throw ConfigError("box must be 'lo,hi' or 'lo1,hi1,...,lod,hid'");
}

Architecture architecture(const std::string& widths) {
  const auto w = parse_ints(widths);
  if (w.size() < 2) throw ConfigError("--widths needs the input dimension followed by hidden widths");
  return {w.front(), {w.begin() + 1, w.end()}};
}

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReLU teacher-student classification toolkit"};
  app.require_subcommand(1);

  // regions
  auto* regions = app.add_subcommand("regions", "Enumerate the linear regions of a network over a box");
  std::string net_path, box_text = "0,1", dump_path;
  regions->add_option("--net", net_path, "Network JSON document")->required();
  regions->add_option("--box", box_text, "lo,hi (cube) or lo1,hi1,...");
  regions->add_option("--dump", dump_path, "Write one JSON line per region");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Evaluate a region-count or entropy bound");
  std::string bound_kind, widths_text;
  int N = 2, L = 1, d = 1;
  long long S_big = 1;
  double delta = 0.5, B = 1.0;
  bounds->add_option("kind", bound_kind, "serra|montufar|active|bracketing|gclass|covering")
      ->required()
      ->check(CLI::IsMember({"serra", "montufar", "active", "bracketing", "gclass", "covering"}));
  bounds->add_option("--widths", widths_text, "n0,n1,...,nL (serra, montufar, active)");
  bounds->add_option("--d", d, "Input dimension (bracketing, gclass)");
  bounds->add_option("--S", S_big, "Vertex or nonzero-parameter budget (bracketing, covering)");
  bounds->add_option("--N", N, "Width (gclass, covering)");
  bounds->add_option("--L", L, "Depth (gclass, covering)");
  bounds->add_option("--B", B, "Weight bound (covering)");
  bounds->add_option("--delta", delta, "Resolution");

  // noise
  auto* noise = app.add_subcommand("noise", "Noise constants of a teacher, or a batch check over random teachers");
  std::string noise_net, noise_widths = "1,8", noise_dist = "normal", t_grid_text;
  int noise_seeds = 50, grid_points = 64;
  noise->add_option("--net", noise_net, "Teacher network (normalized on the unit box first)");
  noise->add_option("--widths", noise_widths, "Random teachers: d,n1,...");
  noise->add_option("--seeds", noise_seeds, "Random teachers: number of seeds");
  noise->add_option("--dist", noise_dist, "normal|uniform");
  noise->add_option("--t-grid", t_grid_text, "Explicit t grid for the measured profile");
  noise->add_option("--grid-points", grid_points, "Grid size over (0, T]");

  // sample
  auto* sampler = app.add_subcommand("sample", "Draw a labeled dataset from a teacher");
  std::string sample_net, sample_mode = "overlap", sample_out;
  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  double sample_tau = -1.0;
  sampler->add_option("--net", sample_net, "Raw teacher network")->required();
  sampler->add_option("--n", sample_n, "Sample size");
  sampler->add_option("--seed", sample_seed, "Seed");
  sampler->add_option("--mode", sample_mode, "overlap|separable");
  sampler->add_option("--tau", sample_tau, "Separable margin (default 0.1 sup|g|)");
  sampler->add_option("--out", sample_out, "CSV path")->required();

  // train
  auto* train = app.add_subcommand("train", "Hinge-loss ERM on a CSV dataset");
  std::string data_path, train_widths = "2,8,8", out_path, history_path;
  TrainConfig tc;
  train->add_option("--data", data_path, "CSV with x_1..x_d,y")->required();
  train->add_option("--widths", train_widths, "d,n1,...,nL");
  train->add_option("--epochs", tc.epochs, "Full-batch steps per restart");
  train->add_option("--restarts", tc.restarts, "Random restarts");
  train->add_option("--step", tc.step0, "Initial step size");
  train->add_option("--seed", tc.seed, "Seed");
  train->add_option("--B", tc.spec.max_abs_weight, "Parameter bound");
  train->add_option("--F", tc.spec.max_sup_norm, "Sup-norm bound");
  train->add_option("--out", out_path, "Trained network JSON")->required();
  train->add_option("--history", history_path, "History CSV (epoch,hinge_risk,zero_one_risk)");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a rate experiment from a JSON config");
  std::string config_path, exp_out;
  std::uint64_t exp_seed = 0;
  unsigned exp_workers = 0;
  experiment->add_option("--config", config_path, "Experiment config JSON")->required();
  auto* seed_opt = experiment->add_option("--seed", exp_seed, "Override the master seed");
  experiment->add_option("--out", exp_out, "Override the output directory");
  auto* workers_opt = experiment->add_option("--workers", exp_workers, "Worker threads");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the log-log rate slope of a rows.csv");
  std::string rows_path;
  fit->add_option("--rows", rows_path, "rows.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*regions) {
      const NetworkParams net = load_network(net_path);
      const Box box = parse_box(box_text, static_cast<int>(net.input_dim()));
      const RegionDecomposition decomp = enumerate_regions(net, box);
      if (!dump_path.empty()) {
        std::ofstream out(dump_path);
        if (!out) throw ConfigError("cannot write " + dump_path);
        for (const auto& r : decomp.regions) {
          nlohmann::ordered_json line;
          line["pattern"] = r.pattern.to_string();
          line["gradient"] = vec_json(r.gradient);
          line["offset"] = r.offset;
          nlohmann::ordered_json vs = nlohmann::ordered_json::array();
          for (const auto& v : r.cell.vertices()) vs.push_back(vec_json(v));
          line["vertices"] = vs;
          out << line.dump() << '\n';
        }
      }
      nlohmann::ordered_json j;
      j["total"] = decomp.size();
      j["active"] = count_active_pieces(decomp);
      j["vertices"] = piece_vertices(decomp).size();
      std::cout << j.dump() << '\n';
    } else if (*bounds) {
      BoundReport r;
      if (bound_kind == "serra") r = report_serra(architecture(widths_text));
      if (bound_kind == "montufar") r = report_montufar(architecture(widths_text));
      if (bound_kind == "active") r = report_active(architecture(widths_text));
      if (bound_kind == "bracketing") r = report_bracketing(d, static_cast<int>(S_big), delta);
      if (bound_kind == "gclass") r = report_gclass(N, L, d, delta);
      if (bound_kind == "covering") r = report_covering(L, N, S_big, B, delta);
      std::cout << r.to_json().dump() << '\n';
    } else if (*noise) {
      if (!noise_net.empty()) {
        const NetworkParams raw = load_network(noise_net);
        const TeacherDistribution dist = normalize_teacher(raw, Box::unit(static_cast<int>(raw.input_dim())));
        const A3Constants a3 = a3_constants_analytic(dist);
        std::vector<double> grid;
        if (!t_grid_text.empty()) {
          grid = parse_reals(t_grid_text);
        } else {
          const double top = a3.T > 0.0 ? a3.T : 1.0;
          for (int i = 1; i <= grid_points; ++i) grid.push_back(top * i / grid_points);
        }
        const NoiseProfile profile = noise_profile(dist, grid, a3.T > 0.0 ? a3.T : grid.back());
        nlohmann::ordered_json j;
        j["c"] = a3.c;
        j["T"] = a3.T;
        j["k_min"] = a3.k_min;
        j["active_pieces"] = a3.active_pieces;
        j["boundary_pieces"] = a3.boundary_pieces;
        j["kappa"] = 1;
        j["measured_c"] = profile.c;
        j["satisfied"] = !a3.has_active || profile.satisfies(a3.c, a3.T);
        nlohmann::ordered_json curve = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < grid.size(); ++i) {
          curve.push_back({{"t", grid[i]}, {"measured", profile.measured[i].value}, {"se", profile.measured[i].standard_error}});
        }
        j["curve"] = curve;
        std::cout << j.dump() << '\n';
      } else {
        std::vector<std::uint64_t> seeds;
        for (int s = 0; s < noise_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
        const A3Report report =
            verify_a3_report(parse_ints(noise_widths), parse_weight_distribution(noise_dist), seeds, grid_points);
        std::cout << report.to_json().dump() << '\n';
      }
    } else if (*sampler) {
      const NetworkParams raw = load_network(sample_net);
      TeacherDistribution dist = normalize_teacher(raw, Box::unit(static_cast<int>(raw.input_dim())));
      if (parse_mode(sample_mode) == Mode::Separable) {
        dist = dist.with_mode(Mode::Separable, sample_tau > 0.0 ? std::optional<double>(sample_tau) : std::nullopt);
      }
      write_dataset_csv(sample(dist, sample_n, sample_seed), sample_out);
    } else if (*train) {
      const Dataset data = read_dataset_csv(data_path);
      const auto w = parse_ints(train_widths);
      if (w.empty() || w.front() != data.dim()) throw ConfigError("--widths must start with the data dimension");
      tc.widths.assign(w.begin() + 1, w.end());
      const TrainedStudent student = hinge_erm(data, tc);
      save_network(student.net, out_path);
      if (!history_path.empty()) write_history_csv(student.history, history_path);
      nlohmann::ordered_json j;
      j["initial_hinge_risk"] = student.initial_hinge_risk;
      j["final_hinge_risk"] = student.final_hinge_risk;
      j["final_zero_one_risk"] = student.final_zero_one_risk;
      j["best_restart"] = student.best_restart;
      std::cout << j.dump() << '\n';
    } else if (*experiment) {
      ExperimentConfig config = ExperimentConfig::load(config_path);
      if (*seed_opt) config.seed = exp_seed;
      if (!exp_out.empty()) config.output_dir = exp_out;
      if (*workers_opt) config.workers = exp_workers;
      const RateResult result = run_rate_experiment(config);
      std::cout << report_json(config, result)["fit"].dump() << '\n';
    } else if (*fit) {
      const SlopeFit f = fit_rate_slope(read_rows_csv(rows_path));
      nlohmann::ordered_json j;
      j["slope"] = f.slope;
      j["stderr"] = f.standard_error;
      j["r2"] = f.r_squared;
      j["ci95"] = {f.ci_low, f.ci_high};
      j["n_used"] = f.n_used;
      j["warnings"] = f.warnings;
      for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << j.dump() << '\n';
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
