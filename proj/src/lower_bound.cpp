#include "tsnet/lower_bound.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tsnet/errors.hpp"
#include "tsnet/random.hpp"

namespace tsnet {

namespace {

using boost::math::quadrature::gauss_kronrod;

std::size_t int_pow(int base, int exponent) {
  std::size_t r = 1;
  for (int i = 0; i < exponent; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// Adaptive Gauss-Kronrod over [a, b] split at the given interior breakpoints.
double integrate_segments(const std::function<double(double)>& f, std::vector<double> cuts, double a, double b) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::clamp(cuts[i], a, b);
    const double hi = std::clamp(cuts[i + 1], a, b);
    if (hi - lo <= 0.0) continue;
    // Boost floors its error estimate near 1e-12 relative, so a tighter tolerance
    // only forces refinement to full depth.
    total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 10, 1e-10);
  }
  return total;
}

}  // namespace

NetworkParams make_b_omega_nd(int M, int d, const std::vector<int>& omega) {
  if (M < 1) throw ConfigError("b_omega needs M >= 1");
  if (d < 2) throw ConfigError("b_omega needs d >= 2");
  const int m = d - 1;
  if (omega.size() != int_pow(M, m)) {
    throw ConfigError("omega must have M^(d-1) = " + std::to_string(int_pow(M, m)) + " entries");
  }
  if (m == 1) return make_b_omega(M, omega);

  std::vector<std::vector<int>> centres;
  for (std::size_t flat = 0; flat < omega.size(); ++flat) {
    if (omega[flat] == 0) continue;
    std::vector<int> J(m);
    std::size_t rest = flat;
    for (int i = m - 1; i >= 0; --i) {
      J[i] = static_cast<int>(rest % static_cast<std::size_t>(M));
      rest /= static_cast<std::size_t>(M);
    }
    centres.push_back(std::move(J));
  }
  const auto k = static_cast<Eigen::Index>(centres.size());
  if (k == 0) {
    Layer<double> l1{Eigen::MatrixXd::Zero(1, m), Eigen::VectorXd::Zero(1)};
    Layer<double> l2{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)};
    Layer<double> out{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1)};
    return NetworkParams({l1, l2, out});
  }
  // Spike centred at J/M: relu(1 - sum_i |M x_i - J_i|).
  Layer<double> l1{Eigen::MatrixXd::Zero(2 * m * k, m), Eigen::VectorXd::Zero(2 * m * k)};
  Layer<double> l2{Eigen::MatrixXd::Zero(k, 2 * m * k), Eigen::VectorXd::Ones(k)};
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int i = 0; i < m; ++i) {
      const Eigen::Index row = 2 * m * c + 2 * i;
      l1.weights(row, i) = M;
      l1.bias(row) = -centres[c][i];
      l1.weights(row + 1, i) = -M;
      l1.bias(row + 1) = centres[c][i];
      l2.weights(c, row) = -1.0;
      l2.weights(c, row + 1) = -1.0;
    }
  }
  Layer<double> out{Eigen::MatrixXd::Constant(1, k, std::exp(-M)), Eigen::VectorXd::Zero(1)};
  return NetworkParams({l1, l2, out});
}

LowerBoundFamily::LowerBoundFamily(LowerBoundConfig config) : config_(std::move(config)) {
  const int M = config_.M;
  const int d = config_.d;
  if (M < 2) throw ConfigError("lower-bound family needs M >= 2");
  if (d < 2) throw ConfigError("lower-bound family needs d >= 2");
  if (!(config_.kappa > 0.0) || !(config_.c2 > 0.0)) throw ConfigError("kappa and c2 must be positive");
  if (config_.omega.empty()) config_.omega.assign(int_pow(M, d - 1), 0);
  for (int bit : config_.omega) {
    if (bit != 0 && bit != 1) throw ConfigError("omega entries must be 0 or 1");
  }
  b_omega_ = make_b_omega_nd(M, d, config_.omega);

  const double k = config_.kappa;
  const double eM = std::exp(-M);
  b1_ = std::pow(config_.c2, -1.0 / k) * std::exp(-M / k);
  if (1.0 - config_.eta0 - b1_ < 0.0) throw ConfigError("q0 is negative below the strip: eta0 + b1 > 1");
  // (1 - eta0 - b1)/2 + e^-M + (1 + eta0 + b2)(1/2 - e^-M) = 1
  b2_ = (1.0 - 0.5 * (1.0 - config_.eta0 - b1_) - eM) / (0.5 - eM) - 1.0 - config_.eta0;
  if (!(b2_ > 0.0)) throw ConfigError("q0 normalization is infeasible (b2 <= 0)");

  // Inner integral over the strip is closed form; the outer one is numerical.
  const double a = 1.0 + 1.0 / k;
  const double scale = std::pow(config_.c2, -1.0 / k) / a;
  double strip = 0.0;
  double bump = 0.0;
  const int m = d - 1;
  strip = integrate_over_cube(
      [&](const Eigen::VectorXd& u) {
        const double b = b_omega(u);
        if (b > eM * (1.0 + 1e-12)) throw NumericalError("b_omega exceeds e^-M");
        return scale * (std::pow(eM, a) - std::pow(std::max(0.0, eM - b), a));
      },
      m);
  bump = integrate_over_cube([&](const Eigen::VectorXd& u) { return b_omega(u); }, m);
  b3_ = strip / (0.5 - bump);
}

double LowerBoundFamily::c1() const {
  return 1.0 + std::pow(std::exp(-config_.M) / config_.c2, 1.0 / config_.kappa);
}

double LowerBoundFamily::b3_bound() const {
  const double k = config_.kappa;
  const double eM = std::exp(-config_.M);
  return std::pow(config_.c2, -1.0 / k) * std::exp(-config_.M * (1.0 + 1.0 / k)) / ((0.5 - eM) * (1.0 + 1.0 / k));
}

double LowerBoundFamily::b_omega(const Eigen::VectorXd& x_minus_d) const { return b_omega_(x_minus_d); }

double LowerBoundFamily::strip_height(double x_d) const {
  return std::pow(std::max(0.0, 0.5 + std::exp(-config_.M) - x_d) / config_.c2, 1.0 / config_.kappa);
}

double LowerBoundFamily::q0(const Eigen::VectorXd& x) const {
  if (x.size() != config_.d) throw DimensionError("q0 expects a point of dimension d");
  const double xd = x(config_.d - 1);
  if (xd < 0.5) return 1.0 - config_.eta0 - b1_;
  if (xd < 0.5 + std::exp(-config_.M)) return 1.0;
  return 1.0 + config_.eta0 + b2_;
}

double LowerBoundFamily::p(const Eigen::VectorXd& x) const {
  if (x.size() != config_.d) throw DimensionError("p expects a point of dimension d");
  const double xd = x(config_.d - 1);
  const double b = b_omega(x.head(config_.d - 1));
  if (xd < 0.5) return 1.0;
  if (xd <= 0.5 + b) return 1.0 + strip_height(xd);
  return 1.0 - b3_;
}

bool LowerBoundFamily::in_bayes_set(const Eigen::VectorXd& x) const {
  if (x.size() != config_.d) throw DimensionError("in_bayes_set expects a point of dimension d");
  return x(config_.d - 1) <= 0.5 + b_omega(x.head(config_.d - 1));
}

NetworkParams LowerBoundFamily::bayes_classifier() const {
  const int d = config_.d;
  const auto& layers = b_omega_.layers();
  std::vector<Layer<double>> out;
  // Append relu(x_d) as an extra hidden unit; deeper b_omega nets pass it through
  // relu(relu(x_d)) = relu(x_d).
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& src = layers[l];
    const Eigen::Index rows = src.out_dim() + 1;
    const Eigen::Index cols = l == 0 ? d : src.in_dim() + 1;
    Layer<double> layer{Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(rows)};
    layer.weights.topLeftCorner(src.out_dim(), src.in_dim()) = src.weights;
    layer.bias.head(src.out_dim()) = src.bias;
    layer.weights(rows - 1, cols - 1) = 1.0;
    out.push_back(std::move(layer));
  }
  const auto& src = layers.back();
  Layer<double> last{Eigen::MatrixXd::Zero(1, src.in_dim() + 1), Eigen::VectorXd::Constant(1, src.bias(0) + 0.5)};
  last.weights.leftCols(src.in_dim()) = src.weights;
  last.weights(0, src.in_dim()) = -1.0;
  out.push_back(std::move(last));
  return NetworkParams(std::move(out));
}

double LowerBoundFamily::integrate_over_cube(const std::function<double(const Eigen::VectorXd&)>& f, int dims) const {
  const int M = config_.M;
  std::vector<double> grid;
  for (int k = 1; k < M; ++k) grid.push_back(static_cast<double>(k) / M);
  // Selected spike centres, decoded as in make_b_omega_nd.
  std::vector<std::vector<int>> centres;
  if (dims >= 2) {
    for (std::size_t flat = 0; flat < config_.omega.size(); ++flat) {
      if (config_.omega[flat] == 0) continue;
      std::vector<int> J(static_cast<std::size_t>(dims));
      std::size_t rest = flat;
      for (int i = dims - 1; i >= 0; --i) {
        J[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(M));
        rest /= static_cast<std::size_t>(M);
      }
      centres.push_back(std::move(J));
    }
  }
  Eigen::VectorXd point(dims);
  std::function<double(int)> nest = [&](int axis) -> double {
    if (axis == dims) return f(point);
    // Slicing a spike at fixed outer coordinates leaves a hat whose support ends
    // move with them; those ends are kinks of the integrand along this axis.
    std::vector<double> cuts = grid;
    for (const auto& J : centres) {
      double used = 0.0;
      for (int i = 0; i < axis; ++i) used += std::abs(M * point(i) - J[static_cast<std::size_t>(i)]);
      if (used >= 1.0) continue;
      const double centre = static_cast<double>(J[static_cast<std::size_t>(axis)]) / M;
      cuts.push_back(centre - (1.0 - used) / M);
      cuts.push_back(centre + (1.0 - used) / M);
    }
    return integrate_segments(
        [&, axis](double t) {
          point(axis) = t;
          return nest(axis + 1);
        },
        cuts, 0.0, 1.0);
  };
  return nest(0);
}

std::pair<double, double> LowerBoundFamily::normalization_defects() const {
  const int d = config_.d;
  const double eM = std::exp(-config_.M);
  // Integrate over x_d first, splitting at every jump of the densities.
  const double q_total = integrate_over_cube(
      [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd x(d);
        x.head(d - 1) = u;
        return integrate_segments(
            [&](double t) {
              x(d - 1) = t;
              return q0(x);
            },
            {0.5, 0.5 + eM}, 0.0, 1.0);
      },
      d - 1);
  const double p_total = integrate_over_cube(
      [&](const Eigen::VectorXd& u) {
        const double b = b_omega(u);
        return integrate_segments(
            [&](double t) {
              if (t < 0.5) return 1.0;
              if (t <= 0.5 + b) return 1.0 + strip_height(t);
              return 1.0 - b3_;
            },
            {0.5, 0.5 + b, 0.5 + eM}, 0.0, 1.0);
      },
      d - 1);
  return {std::abs(q_total - 1.0), std::abs(p_total - 1.0)};
}

Dataset LowerBoundFamily::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const int d = config_.d;
  const double envelope = std::max({c1(), 1.0 + config_.eta0 + b2_, 1.0});
  Dataset data{Eigen::MatrixXd(d, static_cast<Eigen::Index>(n)), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  constexpr std::size_t kBatch = 4096;
  for (std::size_t start = 0, batch = 0; start < n; start += kBatch, ++batch) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(batch)}));
    for (std::size_t i = start; i < std::min(n, start + kBatch); ++i) {
      const bool positive = rng.uniform() < 0.5;
      Eigen::VectorXd x(d);
      while (true) {
        for (int k = 0; k < d; ++k) x(k) = rng.uniform();
        const double density = positive ? p(x) : q0(x);
        if (rng.uniform() * envelope < density) break;
      }
      data.x.col(static_cast<Eigen::Index>(i)) = x;
      data.y(static_cast<Eigen::Index>(i)) = positive ? 1.0 : -1.0;
    }
  }
  return data;
}

}  // namespace tsnet
