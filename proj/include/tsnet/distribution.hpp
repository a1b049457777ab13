#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsnet/geometry.hpp"
#include "tsnet/network.hpp"
#include "tsnet/polytope.hpp"

namespace tsnet {

enum class Mode { Overlap, Separable };

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

/// Labeled sample: points are the columns of `x` (d x n), labels are +1 / -1.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  int dim() const { return static_cast<int>(x.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
};

/// CSV with header x_1..x_d,y.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

/// How a raw network was turned into a teacher.
struct NormalizationReport {
  double raw_mean = 0.0;   ///< mean of the raw network over the box (subtracted from the output bias)
  double scale = 1.0;      ///< factor applied to the output layer after the shift
  double epsilon = 0.1;    ///< sup |g| = 2 - epsilon after scaling
  double mean_standard_error = 0.0;
};

/// Labeled-data distribution generated by a teacher network g.
///
/// Overlap: x ~ Uniform(box), P(y = 1 | x) = 1/2 + g(x)/4, so that the class
/// densities are p = (1 + g/2)/|box| and q = (1 - g/2)/|box|.
/// Separable: x ~ Uniform({|g| > tau}), y = sign(g(x)).
/// The Bayes set is G* = {g >= 0} in both modes.
class TeacherDistribution {
 public:
  TeacherDistribution(NetworkParams teacher, Box box, Mode mode, double tau, NormalizationReport report);

  const NetworkParams& teacher() const { return teacher_; }
  const Box& box() const { return box_; }
  Mode mode() const { return mode_; }
  double tau() const { return tau_; }
  const NormalizationReport& normalization() const { return report_; }
  /// Linear pieces of g over the box (d <= 4).
  const RegionDecomposition& regions() const;

  double g(const Eigen::VectorXd& x) const { return teacher_(x); }
  double eta(const Eigen::VectorXd& x) const;
  double p(const Eigen::VectorXd& x) const;
  double q(const Eigen::VectorXd& x) const;
  bool in_bayes_set(const Eigen::VectorXd& x) const { return g(x) >= 0.0; }

  /// Same teacher with a different labeling mode. Separable mode defaults to
  /// tau = 0.1 * sup |g|.
  TeacherDistribution with_mode(Mode mode, std::optional<double> tau = std::nullopt) const;

  /// Lebesgue measure of {g > tau} and {g < -tau} (exact for d <= 2).
  std::pair<double, double> separable_support_volumes() const;

 private:
  NetworkParams teacher_;
  Box box_;
  Mode mode_;
  double tau_;
  NormalizationReport report_;
  std::shared_ptr<const RegionDecomposition> regions_;
  std::pair<double, double> support_volumes_{0.0, 0.0};
};

/// Shifts the output bias so the mean of g over the box is zero, then scales the
/// output layer so sup |g| = 2 - epsilon. Throws ConfigError for a constant net.
TeacherDistribution normalize_teacher(const NetworkParams& raw, const Box& box, double epsilon = 0.1,
                                      std::size_t mc_samples = 1 << 18);

/// Deterministic given (dist, n, seed); points are drawn in fixed-size batches,
/// each from its own stream derived from (seed, batch index).
Dataset sample(const TeacherDistribution& dist, std::size_t n, std::uint64_t seed);

/// Measured Q{|g| <= t} and the smallest c with measured(t) <= c t for t <= T.
struct NoiseProfile {
  double kappa = 1.0;
  bool separable = false;  ///< kappa = infinity
  double c = 0.0;
  double T = 0.0;
  std::vector<double> t;
  std::vector<Estimate> measured;

  /// measured(t) <= c t for every grid t <= T (Monte Carlo points get 3 standard errors of slack).
  bool satisfies(double c_bound, double T_bound) const;
};

NoiseProfile noise_profile(const TeacherDistribution& dist, const std::vector<double>& t_grid,
                           std::optional<double> T = std::nullopt, std::size_t mc_samples = 1 << 18);

/// Noise constants read off the linear pieces of g.
///
/// k_i is the smallest |partial derivative| of g on a piece that meets the zero
/// set; T is the smallest nonzero |g| at a piece vertex; c = 2 s X / min k_i
/// where s counts those pieces and X is the largest cross-section of the box.
struct A3Constants {
  double c = 0.0;
  double T = 0.0;
  double k_min = 0.0;
  std::size_t active_pieces = 0;
  std::size_t boundary_pieces = 0;  ///< active plus pieces touching zero
  bool has_active = false;
};

A3Constants a3_constants_analytic(const TeacherDistribution& dist);

struct RiskOptions {
  std::optional<VolumeMode> mode;  ///< default: exact for d <= 2, Monte Carlo otherwise
  std::size_t mc_samples = 1000000;
};

/// R(student) - R(Bayes) under the distribution.
Estimate excess_risk(const TeacherDistribution& dist, const NetworkParams& student, const RiskOptions& options = {});

/// Population 0-1 risk of sign(f) estimated directly on Sobol points.
Estimate population_risk_monte_carlo(const TeacherDistribution& dist, const NetworkParams& student,
                                     std::size_t samples);

/// d_{p,q}(A, B): integral of |p - q| over the symmetric difference.
Estimate d_pq(const TeacherDistribution& dist, const std::vector<Polytope>& a, const std::vector<Polytope>& b,
              const RiskOptions& options = {});

}  // namespace tsnet
