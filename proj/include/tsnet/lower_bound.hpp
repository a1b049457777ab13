#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "tsnet/distribution.hpp"
#include "tsnet/network.hpp"

namespace tsnet {

/// Parameters of the minimax lower-bound construction on [0,1]^d.
struct LowerBoundConfig {
  int M = 2;
  std::vector<int> omega;  ///< M^(d-1) bits, first coordinate slowest
  double kappa = 1.0;
  int d = 2;
  double c2 = 1.0;    ///< noise constant of the construction
  double eta0 = 0.1;  ///< free offset in q0; b2 is solved from it so q0 integrates to 1
};

/// Densities q0 and p_omega whose Bayes set is {x_d <= 1/2 + b_omega(x_{-d})}.
///
///   q0 = (1 - eta0 - b1) 1{x_d < 1/2} + 1{1/2 <= x_d < 1/2 + e^-M} + (1 + eta0 + b2) 1{x_d >= 1/2 + e^-M}
///   p  = 1 + ((1/2 + e^-M - x_d) / c2)^(1/kappa) 1{1/2 <= x_d <= 1/2 + b(x_{-d})} - b3 1{x_d > 1/2 + b(x_{-d})}
///
/// b1 = c2^(-1/kappa) e^(-M/kappa); b2 has a closed form; b3 uses a closed-form inner
/// integral over x_d and adaptive Gauss-Kronrod quadrature over x_{-d}.
class LowerBoundFamily {
 public:
  /// Throws ConfigError for M < 2, d < 2, a wrong omega length, or an infeasible normalization.
  explicit LowerBoundFamily(LowerBoundConfig config);

  const LowerBoundConfig& config() const { return config_; }
  int dim() const { return config_.d; }
  double b1() const { return b1_; }
  double b2() const { return b2_; }
  double b3() const { return b3_; }
  /// Upper bound on p_omega: 1 + (e^-M / c2)^(1/kappa).
  double c1() const;
  /// Paper-style bound c2^(-1/kappa) e^(-M(1+1/kappa)) / ((1/2 - e^-M)(1 + 1/kappa)).
  double b3_bound() const;

  /// b_omega on x_{-d} (input dimension d - 1).
  const NetworkParams& b_omega_net() const { return b_omega_; }
  double b_omega(const Eigen::VectorXd& x_minus_d) const;

  double q0(const Eigen::VectorXd& x) const;
  double p(const Eigen::VectorXd& x) const;
  /// x_d <= 1/2 + b_omega(x_{-d}); p >= q0 inside and p <= q0 outside.
  bool in_bayes_set(const Eigen::VectorXd& x) const;

  /// ReLU net b_omega(x_{-d}) - relu(x_d) + 1/2; its nonnegative set is the Bayes set.
  NetworkParams bayes_classifier() const;

  /// |integral - 1| for q0 and p_omega, by quadrature independent of the one used for b3.
  std::pair<double, double> normalization_defects() const;

  /// Balanced labels: y = +1 draws x from p_omega, y = -1 from q0 (rejection sampling).
  Dataset sample(std::size_t n, std::uint64_t seed) const;

 private:
  double strip_height(double x_d) const;
  double integrate_over_cube(const std::function<double(const Eigen::VectorXd&)>& f, int dims) const;

  LowerBoundConfig config_;
  NetworkParams b_omega_;
  double b1_ = 0.0;
  double b2_ = 0.0;
  double b3_ = 0.0;
};

/// b_omega for any d >= 2: a sum of e^-M-scaled spikes centred on the grid (J - 1) / M.
NetworkParams make_b_omega_nd(int M, int d, const std::vector<int>& omega);

}  // namespace tsnet
