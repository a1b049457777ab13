#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "tsnet/distribution.hpp"
#include "tsnet/geometry.hpp"
#include "tsnet/network.hpp"

namespace tsnet {

/// Hinge-loss ERM settings. `widths` are the hidden widths; the input dimension
/// comes from the data.
struct TrainConfig {
  std::vector<int> widths{16, 16};
  NetworkClassSpec spec{8, 64, 1 << 20, 10.0, 2.0};
  int epochs = 2000;
  double step0 = 0.1;  ///< step size step0 / sqrt(1 + t)
  int restarts = 5;
  std::uint64_t seed = 0;
  bool clip_weights = true;    ///< clip every parameter to [-B, B] after each step
  bool rescale_output = true;  ///< shrink the output layer so |f| <= F on the data after each step
  std::size_t probe_points = 10000;  ///< final sup-norm check grid over the data's bounding box
  bool record_history = true;
};

struct HistoryRow {
  int epoch = 0;
  double hinge_risk = 0.0;
  double zero_one_risk = 0.0;
};

struct TrainedStudent {
  NetworkParams net;
  std::vector<HistoryRow> history;  ///< restart that produced `net`
  double initial_hinge_risk = 0.0;
  double final_hinge_risk = 0.0;
  double final_zero_one_risk = 0.0;
  int best_restart = 0;
};

/// (1/n) sum max(0, 1 - y f(x)).
double hinge_risk(const NetworkParams& net, const Dataset& data);

/// Fraction of points with sign(f(x)) != y, where sign(0) = +1.
double empirical_01_risk(const NetworkParams& net, const Dataset& data);

/// Gradient of f(x) with respect to every weight and bias (same shapes as the
/// layers). Uses relu'(0) = 0.
std::vector<Layer<double>> parameter_gradient(const NetworkParams& net, const Eigen::VectorXd& x);

/// Empirical hinge risk and its subgradient over the whole dataset; the hinge
/// derivative at the kink y f = 1 is taken as 0.
std::pair<double, std::vector<Layer<double>>> hinge_subgradient(const NetworkParams& net, const Dataset& data);

/// All parameters in layer order, weights row-major then bias.
Eigen::VectorXd flatten_parameters(const std::vector<Layer<double>>& layers);
NetworkParams with_parameters(const NetworkParams& shape, const Eigen::VectorXd& theta);

/// i.i.d. uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
NetworkParams initialize_student(int input_dim, const std::vector<int>& widths, std::uint64_t seed);

/// Full-batch subgradient descent with restarts; returns the iterate with the
/// smallest empirical hinge risk seen. Throws NumericalError on divergence.
TrainedStudent hinge_erm(const Dataset& data, const TrainConfig& config);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

/// Exact empirical 0-1 minimizer over unions of at most k intervals (d = 1).
struct IntervalErm {
  std::vector<Interval> intervals;  ///< predicted +1 set, sorted and disjoint
  std::size_t errors = 0;
  double risk = 0.0;
};

/// Dynamic program over the sorted distinct sample locations; interval endpoints
/// sit at midpoints between neighbours (or at the domain ends).
IntervalErm interval_dp_01_erm(const Dataset& data, int max_intervals, double domain_lo = 0.0,
                               double domain_hi = 1.0);

}  // namespace tsnet
