#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/random/sobol.hpp>

namespace tsnet {

/// Axis-aligned box [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box cube(int dim, double lo, double hi) {
    return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
  }
  static Box unit(int dim) { return cube(dim, 0.0, 1.0); }

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const { return (upper - lower).prod(); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  bool contains(const Eigen::VectorXd& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
};

/// normal . x <= offset, with a unit-length normal.
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;

  double slack(const Eigen::VectorXd& x) const { return offset - normal.dot(x); }
};

/// Estimate with a standard error; the error is zero for exact computations.
struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Bounded, full-dimensional convex polytope holding both representations.
///
/// Every vertex carries the sorted indices of the halfspaces tight at it; cutting
/// by a hyperplane walks the edges found through those incidences, so no LP is
/// needed. Cuts that would leave a zero-volume piece drop that piece.
class Polytope {
 public:
  struct Split;

  static Polytope from_box(const Box& box);

  int dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  const std::vector<Eigen::VectorXd>& vertices() const { return vertices_; }
  const std::vector<std::vector<int>>& incidence() const { return incidence_; }

  /// Cut by the affine function normal . x - offset (normal need not be unit length).
  Split split(const Eigen::VectorXd& normal, double offset) const;

  /// Part with normal . x <= offset; empty when that part has zero volume.
  std::optional<Polytope> clip(const Eigen::VectorXd& normal, double offset) const;

  std::optional<Polytope> intersect(const Polytope& other) const;

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;

  /// Min and max of gradient . x + offset over the polytope.
  std::pair<double, double> range(const Eigen::VectorXd& gradient, double offset) const;

  Eigen::VectorXd vertex_mean() const;
  Box bounding_box() const;

  /// Exact volume; interval length for d = 1, shoelace for d = 2. Throws ConfigError for d >= 3.
  double volume() const;
  /// Exact centroid for d <= 2. Throws ConfigError for d >= 3.
  Eigen::VectorXd centroid() const;
  /// Integral of gradient . x + offset over the polytope (d <= 2).
  double integrate_affine(const Eigen::VectorXd& gradient, double offset) const;

  /// Vertices of a d = 2 polytope in counter-clockwise order.
  std::vector<Eigen::VectorXd> ordered_polygon() const;

  /// Checks the H/V consistency invariants: every vertex satisfies all halfspaces
  /// and is tight on at least d of them.
  bool is_consistent(double tol = 1e-7) const;

 private:
  Polytope() = default;

  void prune_redundant();

  int dim_ = 0;
  std::vector<Halfspace> halfspaces_;
  std::vector<Eigen::VectorXd> vertices_;
  std::vector<std::vector<int>> incidence_;
};

/// Outcome of cutting by the hyperplane normal . x = offset.
struct Polytope::Split {
  std::optional<Polytope> below;  ///< part with normal . x <= offset
  std::optional<Polytope> above;  ///< part with normal . x >= offset
  bool on_hyperplane = false;     ///< affine function vanishes on the whole polytope
};

/// Unscrambled Sobol points mapped into a box.
class SobolSequence {
 public:
  explicit SobolSequence(const Box& box) : box_(box), engine_(static_cast<std::size_t>(box.dim())) {}

  Eigen::VectorXd next() {
    Eigen::VectorXd u(box_.dim());
    for (int i = 0; i < box_.dim(); ++i) {
      const double r = (static_cast<double>(engine_()) + 0.5) * 0x1.0p-64;
      u(i) = box_.lower(i) + (box_.upper(i) - box_.lower(i)) * r;
    }
    return u;
  }

 private:
  Box box_;
  boost::random::sobol engine_;
};

/// Monte Carlo volume over the polytope's bounding box with a binomial standard error.
Estimate volume_monte_carlo(const Polytope& polytope, std::size_t samples);

}  // namespace tsnet
