#include "tsnet/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include "tsnet/errors.hpp"

namespace tsnet {

namespace {

constexpr double kRelTol = 1e-10;
constexpr double kAbsTol = 1e-14;
constexpr double kRankTol = 1e-9;

std::vector<int> intersect_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

Polytope Polytope::from_box(const Box& box) {
  const int d = box.dim();
  if (d < 1) throw ConfigError("box must have positive dimension");
  if (!((box.upper - box.lower).array() > 0.0).all()) throw ConfigError("box must have positive extent");
  Polytope p;
  p.dim_ = d;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(d, i);
    p.halfspaces_.push_back({e, box.upper(i)});   // index 2i
    p.halfspaces_.push_back({-e, -box.lower(i)});  // index 2i + 1
  }
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
    Eigen::VectorXd v(d);
    std::vector<int> tight;
    for (int i = 0; i < d; ++i) {
      const bool hi = (mask >> i) & 1U;
      v(i) = hi ? box.upper(i) : box.lower(i);
      tight.push_back(2 * i + (hi ? 0 : 1));
    }
    std::sort(tight.begin(), tight.end());
    p.vertices_.push_back(std::move(v));
    p.incidence_.push_back(std::move(tight));
  }
  return p;
}

Polytope::Split Polytope::split(const Eigen::VectorXd& normal, double offset) const {
  Split result;
  const double norm = normal.norm();
  const auto n = vertices_.size();
  std::vector<double> s(n);
  double max_abs_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = normal.dot(vertices_[i]) - offset;
    max_abs_x = std::max(max_abs_x, vertices_[i].cwiseAbs().maxCoeff());
  }
  const double tol = kRelTol * (norm * max_abs_x + std::abs(offset)) + kAbsTol;
  const bool any_below = std::any_of(s.begin(), s.end(), [&](double v) { return v < -tol; });
  const bool any_above = std::any_of(s.begin(), s.end(), [&](double v) { return v > tol; });

  if (!any_below && !any_above) {
    result.on_hyperplane = true;
    result.below = *this;
    result.above = *this;
    return result;
  }
  if (!any_above) {
    result.below = *this;
    return result;
  }
  if (!any_below) {
    result.above = *this;
    return result;
  }

  // Genuine cut: both parts are full-dimensional.
  const Eigen::VectorXd unit = normal / norm;
  const double unit_offset = offset / norm;
  const int k = static_cast<int>(halfspaces_.size());

  std::vector<Eigen::VectorXd> cut_points;
  std::vector<std::vector<int>> cut_incidence;
  for (std::size_t u = 0; u < n; ++u) {
    if (s[u] >= -tol) continue;
    for (std::size_t v = 0; v < n; ++v) {
      if (s[v] <= tol) continue;
      std::vector<int> common = intersect_sorted(incidence_[u], incidence_[v]);
      if (static_cast<int>(common.size()) < dim_ - 1) continue;
      if (dim_ > 1) {
        Eigen::MatrixXd rows(static_cast<Eigen::Index>(common.size()), dim_);
        for (std::size_t r = 0; r < common.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = halfspaces_[common[r]].normal.transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
        lu.setThreshold(kRankTol);
        if (lu.rank() != dim_ - 1) continue;
      }
      const double lambda = s[u] / (s[u] - s[v]);
      Eigen::VectorXd point = vertices_[u] + lambda * (vertices_[v] - vertices_[u]);
      common.push_back(k);
      // Merge coincident cut points produced by degenerate vertex configurations.
      bool merged = false;
      for (std::size_t c = 0; c < cut_points.size(); ++c) {
        if ((cut_points[c] - point).norm() <= 1e-12 * (1.0 + max_abs_x)) {
          std::vector<int> joined;
          std::set_union(cut_incidence[c].begin(), cut_incidence[c].end(), common.begin(), common.end(),
                         std::back_inserter(joined));
          cut_incidence[c] = std::move(joined);
          merged = true;
          break;
        }
      }
      if (!merged) {
        cut_points.push_back(std::move(point));
        cut_incidence.push_back(std::move(common));
      }
    }
  }

  auto build = [&](bool keep_below) {
    Polytope child;
    child.dim_ = dim_;
    child.halfspaces_ = halfspaces_;
    child.halfspaces_.push_back(keep_below ? Halfspace{unit, unit_offset} : Halfspace{-unit, -unit_offset});
    for (std::size_t i = 0; i < n; ++i) {
      const bool on = std::abs(s[i]) <= tol;
      const bool keep = keep_below ? s[i] <= tol : s[i] >= -tol;
      if (!keep) continue;
      child.vertices_.push_back(vertices_[i]);
      std::vector<int> tight = incidence_[i];
      if (on) tight.push_back(k);
      child.incidence_.push_back(std::move(tight));
    }
    for (std::size_t c = 0; c < cut_points.size(); ++c) {
      child.vertices_.push_back(cut_points[c]);
      child.incidence_.push_back(cut_incidence[c]);
    }
    child.prune_redundant();
    return child;
  };
  result.below = build(true);
  result.above = build(false);
  return result;
}

std::optional<Polytope> Polytope::clip(const Eigen::VectorXd& normal, double offset) const {
  Split parts = split(normal, offset);
  return std::move(parts.below);
}

std::optional<Polytope> Polytope::intersect(const Polytope& other) const {
  std::optional<Polytope> current = *this;
  for (const auto& h : other.halfspaces_) {
    current = current->clip(h.normal, h.offset);
    if (!current) return std::nullopt;
  }
  return current;
}

void Polytope::prune_redundant() {
  // A facet is tight at >= d vertices; anything tight at fewer is redundant.
  std::vector<int> counts(halfspaces_.size(), 0);
  for (const auto& tight : incidence_) {
    for (int h : tight) ++counts[h];
  }
  if (std::all_of(counts.begin(), counts.end(), [this](int c) { return c >= dim_; })) return;
  std::vector<int> remap(halfspaces_.size(), -1);
  std::vector<Halfspace> kept;
  for (std::size_t h = 0; h < halfspaces_.size(); ++h) {
    if (counts[h] >= dim_) {
      remap[h] = static_cast<int>(kept.size());
      kept.push_back(std::move(halfspaces_[h]));
    }
  }
  halfspaces_ = std::move(kept);
  for (auto& tight : incidence_) {
    std::vector<int> next;
    for (int h : tight) {
      if (remap[h] >= 0) next.push_back(remap[h]);
    }
    std::sort(next.begin(), next.end());
    tight = std::move(next);
  }
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  for (const auto& h : halfspaces_) {
    if (h.normal.dot(x) > h.offset + tol) return false;
  }
  return true;
}

std::pair<double, double> Polytope::range(const Eigen::VectorXd& gradient, double offset) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : vertices_) {
    const double value = gradient.dot(v) + offset;
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  return {lo, hi};
}

Eigen::VectorXd Polytope::vertex_mean() const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim_);
  for (const auto& v : vertices_) mean += v;
  return mean / static_cast<double>(vertices_.size());
}

Box Polytope::bounding_box() const {
  Box box{vertices_.front(), vertices_.front()};
  for (const auto& v : vertices_) {
    box.lower = box.lower.cwiseMin(v);
    box.upper = box.upper.cwiseMax(v);
  }
  return box;
}

std::vector<Eigen::VectorXd> Polytope::ordered_polygon() const {
  if (dim_ != 2) throw ConfigError("ordered_polygon requires d = 2");
  const Eigen::VectorXd c = vertex_mean();
  std::vector<Eigen::VectorXd> pts = vertices_;
  std::sort(pts.begin(), pts.end(), [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::atan2(a(1) - c(1), a(0) - c(0)) < std::atan2(b(1) - c(1), b(0) - c(0));
  });
  return pts;
}

double Polytope::volume() const {
  if (dim_ == 1) {
    const auto [lo, hi] = range(Eigen::VectorXd::Ones(1), 0.0);
    return hi - lo;
  }
  if (dim_ == 2) {
    const auto pts = ordered_polygon();
    double twice_area = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % pts.size()];
      twice_area += a(0) * b(1) - a(1) * b(0);
    }
    return 0.5 * std::abs(twice_area);
  }
  throw ConfigError("exact volume is available for d <= 2 only; use Monte Carlo mode");
}

Eigen::VectorXd Polytope::centroid() const {
  if (dim_ == 1) {
    const auto [lo, hi] = range(Eigen::VectorXd::Ones(1), 0.0);
    return Eigen::VectorXd::Constant(1, 0.5 * (lo + hi));
  }
  if (dim_ == 2) {
    const auto pts = ordered_polygon();
    const Eigen::VectorXd origin = pts.front();
    double area = 0.0;
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const Eigen::Vector2d a = pts[i] - origin;
      const Eigen::Vector2d b = pts[i + 1] - origin;
      const double tri = 0.5 * (a(0) * b(1) - a(1) * b(0));
      area += tri;
      acc += tri * (a + b) / 3.0;
    }
    if (area == 0.0) return vertex_mean();
    return origin + acc / area;
  }
  throw ConfigError("exact centroid is available for d <= 2 only");
}

double Polytope::integrate_affine(const Eigen::VectorXd& gradient, double offset) const {
  return volume() * (gradient.dot(centroid()) + offset);
}

bool Polytope::is_consistent(double tol) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    int tight = 0;
    for (const auto& h : halfspaces_) {
      const double slack = h.slack(vertices_[i]);
      if (slack < -tol) return false;
      if (std::abs(slack) <= tol) ++tight;
    }
    if (tight < dim_) return false;
  }
  return true;
}

Estimate volume_monte_carlo(const Polytope& polytope, std::size_t samples) {
  if (samples == 0) throw ConfigError("Monte Carlo volume needs at least one sample");
  const Box bbox = polytope.bounding_box();
  const double bbox_volume = bbox.volume();
  if (bbox_volume <= 0.0) return {};
  SobolSequence sobol(bbox);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (polytope.contains(sobol.next(), 0.0)) ++inside;
  }
  const double frac = static_cast<double>(inside) / static_cast<double>(samples);
  return {bbox_volume * frac, bbox_volume * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples))};
}

}  // namespace tsnet
