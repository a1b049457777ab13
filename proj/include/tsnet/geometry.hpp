#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "tsnet/network.hpp"
#include "tsnet/polytope.hpp"

namespace tsnet {

/// On/off state of every hidden unit, ordered by (layer, unit).
class ActivationPattern {
 public:
  ActivationPattern() = default;
  explicit ActivationPattern(std::vector<bool> bits) : bits_(std::move(bits)) {}

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void push_back(bool active) { bits_.push_back(active); }

  /// "1" for active, "0" for inactive.
  std::string to_string() const;

  auto operator<=>(const ActivationPattern&) const = default;

 private:
  std::vector<bool> bits_;
};

/// A linear piece: on `cell` the network equals gradient . x + offset.
struct LinearRegion {
  ActivationPattern pattern;
  Eigen::VectorXd gradient;
  double offset = 0.0;
  Polytope cell;

  double value_at(const Eigen::VectorXd& x) const { return gradient.dot(x) + offset; }
};

/// All linear pieces of a network over a domain, sorted by pattern.
struct RegionDecomposition {
  Box box;
  std::vector<LinearRegion> regions;

  std::size_t size() const { return regions.size(); }
};

/// Exact enumeration of the activation regions of `net` inside `box`.
///
/// Each hidden unit's pre-activation is affine on every current cell; the cell is
/// cut by its zero set and each side carries on with the unit switched on or off.
/// A pre-activation that vanishes on a whole cell counts as off. Zero-volume
/// pieces are dropped.
RegionDecomposition enumerate_regions(const NetworkParams& net, const Box& box);

/// Same, restricted to an arbitrary convex polytope domain.
std::vector<LinearRegion> enumerate_regions(const NetworkParams& net, const Polytope& domain);

/// Regions on which the affine map takes both signs. Touching zero without
/// crossing does not count.
std::size_t count_active_pieces(const RegionDecomposition& decomp);
bool is_active(const LinearRegion& region);

/// Deduplicated union of all cell vertices (1e-9 Euclidean merge radius).
std::vector<Eigen::VectorXd> piece_vertices(const RegionDecomposition& decomp);

/// Convex pieces whose union is {x in box : net(x) >= 0}.
std::vector<Polytope> decision_region(const RegionDecomposition& decomp);

/// Sup norm of the network over the box, attained at a piece vertex.
double sup_norm(const RegionDecomposition& decomp);

/// Size limits plus sup-norm bound (vertex maximum and a regular probe grid).
bool is_member(const NetworkClassSpec& spec, const NetworkParams& net, const Box& box);

enum class VolumeMode { Exact, MonteCarlo };

/// Lebesgue measure of a union of interior-disjoint polytopes.
Estimate union_volume(const std::vector<Polytope>& pieces, VolumeMode mode = VolumeMode::Exact,
                      std::size_t samples = 100000);

/// d_Delta: Lebesgue measure of the symmetric difference of two unions of
/// interior-disjoint polytopes inside `box`. Exact for d <= 2.
Estimate symmetric_difference_volume(const std::vector<Polytope>& a, const std::vector<Polytope>& b, const Box& box,
                                     VolumeMode mode = VolumeMode::Exact, std::size_t samples = 100000);

/// Closed interval [lo, hi]; empty when lo > hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const { return lo > hi; }
  double length() const { return empty() ? 0.0 : hi - lo; }
  bool contains(const Interval& other) const {
    return other.empty() || (!empty() && lo <= other.lo && other.hi <= hi);
  }
};

/// Inner set U and outer set V with U inside every bracketed interval inside V.
struct Bracket {
  Interval inner;
  Interval outer;

  double defect() const { return outer.length() - inner.length(); }
};

/// Bracket cover of all subintervals of [0,1] on the grid {i / M}, M = ceil(1/delta):
/// one pair ([x_{i+1}, x_j], [x_i, x_{j+1}]) for each 0 <= i <= j < M.
std::vector<Bracket> bracket_cover_1d(double delta);

/// Grid spacing count M used by `bracket_cover_1d`.
int bracket_grid_size(double delta);

/// The cover element bracketing [a, b].
Bracket find_bracket(const std::vector<Bracket>& cover, double a, double b);

}  // namespace tsnet
