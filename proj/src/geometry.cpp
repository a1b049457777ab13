#include "tsnet/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "tsnet/errors.hpp"

namespace tsnet {

std::string ActivationPattern::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

namespace {

struct Branch {
  Polytope cell;
  ActivationPattern pattern;
  Eigen::MatrixXd map;     // current layer output = map * x + shift
  Eigen::VectorXd shift;
};

}  // namespace

std::vector<LinearRegion> enumerate_regions(const NetworkParams& net, const Polytope& domain) {
  const int d = domain.dim();
  if (net.input_dim() != d) throw DimensionError("network input dimension does not match the domain");

  std::vector<Branch> branches;
  branches.push_back({domain, {}, Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d)});

  const auto& layers = net.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& layer = layers[l];
    std::vector<Branch> finished;
    for (auto& branch : branches) {
      const Eigen::MatrixXd pre_map = layer.weights * branch.map;
      const Eigen::VectorXd pre_shift = layer.weights * branch.shift + layer.bias;
      // Cells for this parent, each with the unit states decided so far.
      std::vector<std::pair<Polytope, std::vector<bool>>> cells;
      cells.emplace_back(std::move(branch.cell), std::vector<bool>{});
      for (Eigen::Index unit = 0; unit < layer.out_dim(); ++unit) {
        const Eigen::VectorXd normal = pre_map.row(unit).transpose();
        const double offset = -pre_shift(unit);
        std::vector<std::pair<Polytope, std::vector<bool>>> next;
        for (auto& [cell, states] : cells) {
          Polytope::Split parts = cell.split(normal, offset);
          if (parts.on_hyperplane) {
            states.push_back(false);
            next.emplace_back(std::move(cell), std::move(states));
            continue;
          }
          if (parts.below) {
            auto s = states;
            s.push_back(false);
            next.emplace_back(std::move(*parts.below), std::move(s));
          }
          if (parts.above) {
            states.push_back(true);
            next.emplace_back(std::move(*parts.above), std::move(states));
          }
        }
        cells = std::move(next);
      }
      for (auto& [cell, states] : cells) {
        Branch child{std::move(cell), branch.pattern, pre_map, pre_shift};
        for (std::size_t u = 0; u < states.size(); ++u) {
          child.pattern.push_back(states[u]);
          if (!states[u]) {
            child.map.row(static_cast<Eigen::Index>(u)).setZero();
            child.shift(static_cast<Eigen::Index>(u)) = 0.0;
          }
        }
        finished.push_back(std::move(child));
      }
    }
    branches = std::move(finished);
  }

  const auto& out = layers.back();
  std::vector<LinearRegion> regions;
  regions.reserve(branches.size());
  for (auto& branch : branches) {
    Eigen::VectorXd gradient = (out.weights * branch.map).row(0).transpose();
    const double offset = (out.weights * branch.shift + out.bias)(0);
    regions.push_back({std::move(branch.pattern), std::move(gradient), offset, std::move(branch.cell)});
  }
  std::sort(regions.begin(), regions.end(),
            [](const LinearRegion& a, const LinearRegion& b) { return a.pattern < b.pattern; });
  return regions;
}

RegionDecomposition enumerate_regions(const NetworkParams& net, const Box& box) {
  return {box, enumerate_regions(net, Polytope::from_box(box))};
}

bool is_active(const LinearRegion& region) {
  const auto [lo, hi] = region.cell.range(region.gradient, region.offset);
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  return lo < -tol && hi > tol;
}

std::size_t count_active_pieces(const RegionDecomposition& decomp) {
  return static_cast<std::size_t>(std::count_if(decomp.regions.begin(), decomp.regions.end(),
                                                [](const LinearRegion& r) { return is_active(r); }));
}

std::vector<Eigen::VectorXd> piece_vertices(const RegionDecomposition& decomp) {
  constexpr double kMergeRadius = 1e-9;
  std::vector<Eigen::VectorXd> all;
  for (const auto& region : decomp.regions) {
    for (const auto& v : region.cell.vertices()) all.push_back(v);
  }
  std::sort(all.begin(), all.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a(0) < b(0); });
  std::vector<Eigen::VectorXd> unique;
  std::size_t window_start = 0;
  for (const auto& v : all) {
    while (window_start < unique.size() && unique[window_start](0) < v(0) - kMergeRadius) ++window_start;
    bool seen = false;
    for (std::size_t i = window_start; i < unique.size(); ++i) {
      if ((unique[i] - v).norm() <= kMergeRadius) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      // Keep `unique` sorted by first coordinate so the window scan stays valid.
      auto pos = std::upper_bound(unique.begin() + static_cast<std::ptrdiff_t>(window_start), unique.end(), v(0),
                                  [](double x, const Eigen::VectorXd& u) { return x < u(0); });
      unique.insert(pos, v);
    }
  }
  return unique;
}

std::vector<Polytope> decision_region(const RegionDecomposition& decomp) {
  std::vector<Polytope> pieces;
  for (const auto& region : decomp.regions) {
    // gradient . x + offset >= 0  <=>  -gradient . x <= offset
    auto part = region.cell.clip(-region.gradient, region.offset);
    if (part) pieces.push_back(std::move(*part));
  }
  return pieces;
}

double sup_norm(const RegionDecomposition& decomp) {
  double sup = 0.0;
  for (const auto& region : decomp.regions) {
    const auto [lo, hi] = region.cell.range(region.gradient, region.offset);
    sup = std::max({sup, std::abs(lo), std::abs(hi)});
  }
  return sup;
}

bool is_member(const NetworkClassSpec& spec, const NetworkParams& net, const Box& box) {
  if (!satisfies_size_limits(spec, net)) return false;
  if (sup_norm(enumerate_regions(net, box)) > spec.max_sup_norm) return false;
  const int d = box.dim();
  const int per_axis = std::max(2, static_cast<int>(std::floor(std::pow(1e4, 1.0 / d))));
  Eigen::VectorXi index = Eigen::VectorXi::Zero(d);
  const Eigen::VectorXd step = (box.upper - box.lower) / static_cast<double>(per_axis - 1);
  while (true) {
    const Eigen::VectorXd x = box.lower + step.cwiseProduct(index.cast<double>());
    if (std::abs(net(x)) > spec.max_sup_norm) return false;
    int axis = 0;
    while (axis < d && ++index(axis) == per_axis) index(axis++) = 0;
    if (axis == d) break;
  }
  return true;
}

Estimate union_volume(const std::vector<Polytope>& pieces, VolumeMode mode, std::size_t samples) {
  Estimate total;
  double variance = 0.0;
  for (const auto& p : pieces) {
    if (mode == VolumeMode::Exact) {
      total.value += p.volume();
    } else {
      const Estimate e = volume_monte_carlo(p, samples);
      total.value += e.value;
      variance += e.standard_error * e.standard_error;
    }
  }
  total.standard_error = std::sqrt(variance);
  return total;
}

namespace {

bool boxes_overlap(const Box& a, const Box& b) {
  return (a.lower.array() <= b.upper.array()).all() && (b.lower.array() <= a.upper.array()).all();
}

}  // namespace

Estimate symmetric_difference_volume(const std::vector<Polytope>& a, const std::vector<Polytope>& b, const Box& box,
                                     VolumeMode mode, std::size_t samples) {
  if (mode == VolumeMode::Exact) {
    if (box.dim() > 2) throw ConfigError("exact symmetric difference requires d <= 2");
    double overlap = 0.0;
    std::vector<Box> b_boxes;
    for (const auto& q : b) b_boxes.push_back(q.bounding_box());
    for (const auto& p : a) {
      const Box pb = p.bounding_box();
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (!boxes_overlap(pb, b_boxes[j])) continue;
        if (auto inter = p.intersect(b[j])) overlap += inter->volume();
      }
    }
    const double value = union_volume(a).value + union_volume(b).value - 2.0 * overlap;
    return {std::max(0.0, value), 0.0};
  }
  SobolSequence sobol(box);
  auto inside = [](const std::vector<Polytope>& set, const Eigen::VectorXd& x) {
    return std::any_of(set.begin(), set.end(), [&](const Polytope& p) { return p.contains(x, 0.0); });
  };
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Eigen::VectorXd x = sobol.next();
    if (inside(a, x) != inside(b, x)) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  return {box.volume() * frac, box.volume() * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples))};
}

int bracket_grid_size(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bracket cover needs 0 < delta < 1");
  return static_cast<int>(std::ceil(1.0 / delta - 1e-12));
}

std::vector<Bracket> bracket_cover_1d(double delta) {
  const int M = bracket_grid_size(delta);
  std::vector<Bracket> cover;
  cover.reserve(static_cast<std::size_t>(M) * (M + 1) / 2);
  const auto x = [M](int i) { return static_cast<double>(i) / M; };
  for (int i = 0; i < M; ++i) {
    for (int j = i; j < M; ++j) cover.push_back({{x(i + 1), x(j)}, {x(i), x(j + 1)}});
  }
  return cover;
}

Bracket find_bracket(const std::vector<Bracket>& cover, double a, double b) {
  if (!(0.0 <= a && a <= b && b <= 1.0)) throw ConfigError("find_bracket needs 0 <= a <= b <= 1");
  // The cover lists pairs (i, j), 0 <= i <= j < M, row by row.
  int M = 0;
  while (static_cast<std::size_t>(M) * (M + 1) / 2 < cover.size()) ++M;
  const int i = std::min(static_cast<int>(std::floor(a * M)), M - 1);
  const int j = std::min(static_cast<int>(std::floor(b * M)), M - 1);
  const std::size_t row_start = static_cast<std::size_t>(i) * M - static_cast<std::size_t>(i) * (i - 1) / 2;
  return cover.at(row_start + static_cast<std::size_t>(j - i));
}

}  // namespace tsnet
