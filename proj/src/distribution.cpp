#include "tsnet/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tsnet/errors.hpp"
#include "tsnet/random.hpp"

namespace tsnet {

Mode parse_mode(const std::string& name) {
  if (name == "overlap") return Mode::Overlap;
  if (name == "separable") return Mode::Separable;
  throw ConfigError("unknown mode '" + name + "' (expected overlap or separable)");
}

std::string to_string(Mode mode) { return mode == Mode::Overlap ? "overlap" : "separable"; }

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path);
  for (int i = 0; i < data.dim(); ++i) out << "x_" << (i + 1) << ',';
  out << "y\n";
  out.precision(17);
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (int i = 0; i < data.dim(); ++i) out << data.x(i, static_cast<Eigen::Index>(n)) << ',';
    out << (data.y(static_cast<Eigen::Index>(n)) > 0 ? "1" : "-1") << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset " + path + " is empty");
  const auto columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw ParseError("dataset needs columns x_1..x_d,y");
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != columns) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
    }
    if (row.back() != 1.0 && row.back() != -1.0) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": label must be -1 or 1");
    }
    rows.push_back(std::move(row));
  }
  Dataset data{Eigen::MatrixXd(columns - 1, static_cast<Eigen::Index>(rows.size())),
               Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (int i = 0; i + 1 < columns; ++i) data.x(i, static_cast<Eigen::Index>(n)) = rows[n][i];
    data.y(static_cast<Eigen::Index>(n)) = rows[n].back();
  }
  return data;
}

// ---------------------------------------------------------------------------

namespace {

// Convex piece on which a nonnegative weight is affine and the Bayes label is fixed.
struct WeightPiece {
  Polytope cell;
  Eigen::VectorXd gradient;
  double offset;
  bool bayes_positive;
};

enum class WeightKind { ExcessRisk, DensityGap };

std::vector<WeightPiece> weight_pieces(const TeacherDistribution& dist, WeightKind kind) {
  const double volume = dist.box().volume();
  std::vector<WeightPiece> pieces;
  const auto [v_plus, v_minus] = dist.separable_support_volumes();
  for (const auto& region : dist.regions().regions) {
    Polytope::Split parts = region.cell.split(region.gradient, -region.offset);
    if (parts.on_hyperplane) continue;
    for (int side = 0; side < 2; ++side) {
      const bool positive = side == 1;
      auto& cell = positive ? parts.above : parts.below;
      if (!cell) continue;
      const double sign = positive ? 1.0 : -1.0;
      if (dist.mode() == Mode::Overlap) {
        // |p - q| = |g| / |box|; excess-risk density is half of it.
        const double factor = (kind == WeightKind::ExcessRisk ? 0.5 : 1.0) * sign / volume;
        pieces.push_back({std::move(*cell), factor * region.gradient, factor * region.offset, positive});
      } else {
        // Keep {g >= tau} or {g <= -tau}.
        auto support = positive ? cell->clip(-region.gradient, region.offset - dist.tau())
                                : cell->clip(region.gradient, -region.offset - dist.tau());
        if (!support) continue;
        double w = 0.0;
        if (kind == WeightKind::ExcessRisk) {
          w = 1.0 / (v_plus + v_minus);
        } else {
          w = 1.0 / (positive ? v_plus : v_minus);
        }
        pieces.push_back({std::move(*support), Eigen::VectorXd::Zero(region.gradient.size()), w, positive});
      }
    }
  }
  return pieces;
}

VolumeMode resolve_mode(const RiskOptions& options, int d) {
  if (options.mode) {
    if (*options.mode == VolumeMode::Exact && d > 2) throw ConfigError("exact risk evaluation requires d <= 2");
    return *options.mode;
  }
  return d <= 2 ? VolumeMode::Exact : VolumeMode::MonteCarlo;
}

// Weight at x for the Monte Carlo paths.
double point_weight(const TeacherDistribution& dist, double g, WeightKind kind) {
  const double volume = dist.box().volume();
  if (dist.mode() == Mode::Overlap) return (kind == WeightKind::ExcessRisk ? 0.5 : 1.0) * std::abs(g) / volume;
  if (std::abs(g) <= dist.tau()) return 0.0;
  const auto [v_plus, v_minus] = dist.separable_support_volumes();
  if (kind == WeightKind::ExcessRisk) return 1.0 / (v_plus + v_minus);
  return 1.0 / (g > 0 ? v_plus : v_minus);
}

constexpr Eigen::Index kBatch = 4096;

}  // namespace

TeacherDistribution::TeacherDistribution(NetworkParams teacher, Box box, Mode mode, double tau,
                                         NormalizationReport report)
    : teacher_(std::move(teacher)), box_(std::move(box)), mode_(mode), tau_(tau), report_(report) {
  if (teacher_.input_dim() != box_.dim()) throw DimensionError("teacher input dimension does not match the box");
  if (mode_ == Mode::Separable && !(tau_ > 0.0)) throw ConfigError("separable mode needs tau > 0");
  if (box_.dim() <= 4) regions_ = std::make_shared<const RegionDecomposition>(enumerate_regions(teacher_, box_));
  if (mode_ == Mode::Separable) {
    if (box_.dim() <= 2) {
      double plus = 0.0, minus = 0.0;
      for (const auto& region : regions_->regions) {
        if (auto c = region.cell.clip(-region.gradient, region.offset - tau_)) plus += c->volume();
        if (auto c = region.cell.clip(region.gradient, -region.offset - tau_)) minus += c->volume();
      }
      support_volumes_ = {plus, minus};
    } else {
      SobolSequence sobol(box_);
      constexpr std::size_t kSamples = 1 << 18;
      std::size_t plus = 0, minus = 0;
      for (std::size_t i = 0; i < kSamples; ++i) {
        const double v = teacher_(sobol.next());
        if (v > tau_) ++plus;
        if (v < -tau_) ++minus;
      }
      support_volumes_ = {box_.volume() * plus / kSamples, box_.volume() * minus / kSamples};
    }
    if (support_volumes_.first <= 0.0 || support_volumes_.second <= 0.0) {
      throw ConfigError("separable margin leaves one class with empty support");
    }
  }
}

const RegionDecomposition& TeacherDistribution::regions() const {
  if (!regions_) throw ConfigError("region decomposition is only available for d <= 4");
  return *regions_;
}

double TeacherDistribution::eta(const Eigen::VectorXd& x) const {
  const double v = g(x);
  if (mode_ == Mode::Overlap) return 0.5 + 0.25 * v;
  if (v > tau_) return 1.0;
  if (v < -tau_) return 0.0;
  return 0.5;
}

double TeacherDistribution::p(const Eigen::VectorXd& x) const {
  const double v = g(x);
  if (mode_ == Mode::Overlap) return (1.0 + 0.5 * v) / box_.volume();
  return v > tau_ ? 1.0 / support_volumes_.first : 0.0;
}

double TeacherDistribution::q(const Eigen::VectorXd& x) const {
  const double v = g(x);
  if (mode_ == Mode::Overlap) return (1.0 - 0.5 * v) / box_.volume();
  return v < -tau_ ? 1.0 / support_volumes_.second : 0.0;
}

TeacherDistribution TeacherDistribution::with_mode(Mode mode, std::optional<double> tau) const {
  double t = 0.0;
  if (mode == Mode::Separable) {
    const double sup = regions_ ? sup_norm(*regions_) : 2.0 - report_.epsilon;
    t = tau.value_or(0.1 * sup);
  }
  return TeacherDistribution(teacher_, box_, mode, t, report_);
}

std::pair<double, double> TeacherDistribution::separable_support_volumes() const { return support_volumes_; }

TeacherDistribution normalize_teacher(const NetworkParams& raw, const Box& box, double epsilon,
                                      std::size_t mc_samples) {
  if (!(epsilon > 0.0 && epsilon < 2.0)) throw ConfigError("normalization epsilon must lie in (0, 2)");
  if (raw.input_dim() != box.dim()) throw DimensionError("network input dimension does not match the box");
  const RegionDecomposition decomp = enumerate_regions(raw, box);
  NormalizationReport report;
  report.epsilon = epsilon;
  if (box.dim() <= 2) {
    double integral = 0.0;
    for (const auto& region : decomp.regions) integral += region.cell.integrate_affine(region.gradient, region.offset);
    report.raw_mean = integral / box.volume();
  } else {
    SobolSequence sobol(box);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < mc_samples; ++i) {
      const double v = raw(sobol.next());
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(mc_samples);
    report.raw_mean = sum / n;
    report.mean_standard_error = std::sqrt(std::max(0.0, sum_sq / n - report.raw_mean * report.raw_mean) / n);
  }
  double sup = 0.0;
  double scale_ref = std::abs(report.raw_mean);
  for (const auto& region : decomp.regions) {
    const auto [lo, hi] = region.cell.range(region.gradient, region.offset);
    sup = std::max({sup, std::abs(lo - report.raw_mean), std::abs(hi - report.raw_mean)});
    scale_ref = std::max({scale_ref, std::abs(lo), std::abs(hi)});
  }
  if (sup <= 1e-12 * std::max(1.0, scale_ref)) {
    throw ConfigError("teacher is constant on the box; it has no decision boundary");
  }
  report.scale = (2.0 - epsilon) / sup;
  std::vector<Layer<double>> layers = raw.layers();
  auto& out = layers.back();
  out.bias(0) -= report.raw_mean;
  out.weights *= report.scale;
  out.bias *= report.scale;
  return TeacherDistribution(NetworkParams(std::move(layers)), box, Mode::Overlap, 0.0, report);
}

Dataset sample(const TeacherDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample size must be at least 1");
  const int d = dist.box().dim();
  const Box& box = dist.box();
  Dataset data{Eigen::MatrixXd(d, static_cast<Eigen::Index>(n)), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  const auto total = static_cast<Eigen::Index>(n);
  for (Eigen::Index start = 0, batch = 0; start < total; start += kBatch, ++batch) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(batch)}));
    const Eigen::Index count = std::min(kBatch, total - start);
    std::size_t attempts = 0;
    for (Eigen::Index i = 0; i < count;) {
      Eigen::VectorXd x(d);
      for (int k = 0; k < d; ++k) x(k) = rng.uniform(box.lower(k), box.upper(k));
      const double g = dist.g(x);
      ++attempts;
      if (dist.mode() == Mode::Overlap) {
        data.x.col(start + i) = x;
        data.y(start + i) = rng.uniform() < 0.5 + 0.25 * g ? 1.0 : -1.0;
        ++i;
        continue;
      }
      if (attempts > 1000 && static_cast<double>(i) < 0.01 * static_cast<double>(attempts)) {
        throw ConfigError("separable sampler rejects more than 99% of proposals; margin too large");
      }
      if (std::abs(g) <= dist.tau()) continue;
      data.x.col(start + i) = x;
      data.y(start + i) = g > 0 ? 1.0 : -1.0;
      ++i;
    }
  }
  return data;
}

// ---------------------------------------------------------------------------

bool NoiseProfile::satisfies(double c_bound, double T_bound) const {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > T_bound) continue;
    const double slack = 3.0 * measured[i].standard_error + 1e-12;
    if (measured[i].value > c_bound * t[i] + slack) return false;
  }
  return true;
}

NoiseProfile noise_profile(const TeacherDistribution& dist, const std::vector<double>& t_grid, std::optional<double> T,
                           std::size_t mc_samples) {
  if (t_grid.empty()) throw ConfigError("noise profile needs a nonempty t grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0) || (i > 0 && t_grid[i] <= t_grid[i - 1])) {
      throw ConfigError("t grid must be positive and strictly ascending");
    }
  }
  NoiseProfile profile;
  profile.separable = dist.mode() == Mode::Separable;
  profile.kappa = 1.0;
  profile.t = t_grid;
  profile.T = T.value_or(t_grid.back());
  const int d = dist.box().dim();
  if (d <= 2) {
    const auto& regions = dist.regions().regions;
    for (double t : t_grid) {
      double vol = 0.0;
      for (const auto& region : regions) {
        auto upper = region.cell.clip(region.gradient, t - region.offset);
        if (!upper) continue;
        auto band = upper->clip(-region.gradient, t + region.offset);
        if (band) vol += band->volume();
      }
      profile.measured.push_back({vol, 0.0});
    }
  } else {
    SobolSequence sobol(dist.box());
    std::vector<double> values(mc_samples);
    for (auto& v : values) v = std::abs(dist.g(sobol.next()));
    std::sort(values.begin(), values.end());
    const double volume = dist.box().volume();
    const double n = static_cast<double>(mc_samples);
    for (double t : t_grid) {
      const double frac = static_cast<double>(std::upper_bound(values.begin(), values.end(), t) - values.begin()) / n;
      profile.measured.push_back({volume * frac, volume * std::sqrt(frac * (1.0 - frac) / n)});
    }
  }
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] <= profile.T) profile.c = std::max(profile.c, profile.measured[i].value / t_grid[i]);
  }
  return profile;
}

A3Constants a3_constants_analytic(const TeacherDistribution& dist) {
  const RegionDecomposition& decomp = dist.regions();
  const Box& box = dist.box();
  const double cross_section = box.volume() / (box.upper - box.lower).minCoeff();

  A3Constants out;
  out.k_min = std::numeric_limits<double>::infinity();
  double t0 = std::numeric_limits<double>::infinity();
  std::vector<double> flat_levels;

  for (const auto& region : decomp.regions) {
    const auto [lo, hi] = region.cell.range(region.gradient, region.offset);
    const double tol = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    const bool active = is_active(region);
    const bool touching = !active && ((std::abs(lo) <= tol) || (std::abs(hi) <= tol));
    const double max_slope = region.gradient.cwiseAbs().maxCoeff();
    const bool flat = max_slope <= 1e-15 * std::max(1.0, std::abs(region.offset));
    for (const auto& v : region.cell.vertices()) {
      const double value = std::abs(region.value_at(v));
      if (value > tol) t0 = std::min(t0, value);
    }
    if (!active && !touching) {
      if (flat) flat_levels.push_back(std::abs(region.offset));
      continue;
    }
    if (active) ++out.active_pieces;
    ++out.boundary_pieces;
    if (flat) {
      throw NumericalError("noise condition unverifiable: a piece with zero gradient meets the decision boundary");
    }
    double k = region.gradient.cwiseAbs().minCoeff();
    if (k <= 1e-15 * max_slope) k = max_slope;  // a coordinate-aligned piece: use its steepest direction
    out.k_min = std::min(out.k_min, k);
  }
  out.has_active = out.active_pieces > 0;
  out.T = std::isfinite(t0) ? t0 : 0.0;
  // A flat piece sitting exactly at level t0 contributes its whole volume at t = t0.
  for (double level : flat_levels) {
    if (level <= out.T * (1.0 + 1e-12)) out.T = std::min(out.T, level * (1.0 - 1e-9));
  }
  if (out.boundary_pieces == 0) {
    out.c = 0.0;
    out.k_min = 0.0;
  } else {
    out.c = 2.0 * static_cast<double>(out.boundary_pieces) * cross_section / out.k_min;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double integrate_over_mismatch(const std::vector<WeightPiece>& pieces, const NetworkParams& student) {
  double total = 0.0;
  for (const auto& piece : pieces) {
    for (const auto& region : enumerate_regions(student, piece.cell)) {
      // Student disagrees with the Bayes label: f < 0 on a positive piece, f >= 0 on a negative one.
      auto mismatch = piece.bayes_positive ? region.cell.clip(region.gradient, -region.offset)
                                           : region.cell.clip(-region.gradient, region.offset);
      if (mismatch) total += mismatch->integrate_affine(piece.gradient, piece.offset);
    }
  }
  return total;
}

}  // namespace

Estimate excess_risk(const TeacherDistribution& dist, const NetworkParams& student, const RiskOptions& options) {
  const int d = dist.box().dim();
  if (student.input_dim() != d) throw DimensionError("student input dimension does not match the teacher");
  if (resolve_mode(options, d) == VolumeMode::Exact) {
    return {std::max(0.0, integrate_over_mismatch(weight_pieces(dist, WeightKind::ExcessRisk), student)), 0.0};
  }
  SobolSequence sobol(dist.box());
  const double volume = dist.box().volume();
  double sum = 0.0, sum_sq = 0.0;
  std::size_t remaining = options.mc_samples;
  while (remaining > 0) {
    const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(remaining, kBatch));
    Eigen::MatrixXd pts(d, count);
    for (Eigen::Index i = 0; i < count; ++i) pts.col(i) = sobol.next();
    const Eigen::VectorXd g = dist.teacher().evaluate_batch(pts);
    const Eigen::VectorXd f = student.evaluate_batch(pts);
    for (Eigen::Index i = 0; i < count; ++i) {
      const bool mismatch = (g(i) >= 0.0) != (f(i) >= 0.0);
      const double v = mismatch ? volume * point_weight(dist, g(i), WeightKind::ExcessRisk) : 0.0;
      sum += v;
      sum_sq += v * v;
    }
    remaining -= static_cast<std::size_t>(count);
  }
  const double n = static_cast<double>(options.mc_samples);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n)};
}

Estimate population_risk_monte_carlo(const TeacherDistribution& dist, const NetworkParams& student,
                                     std::size_t samples) {
  // Integrates P(y != sign f | x) against the x-marginal on Sobol points.
  const int d = dist.box().dim();
  SobolSequence sobol(dist.box());
  double sum = 0.0, sum_sq = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Eigen::VectorXd x = sobol.next();
    const double g = dist.g(x);
    double weight = 1.0;
    if (dist.mode() == Mode::Separable && std::abs(g) <= dist.tau()) weight = 0.0;
    const double eta = dist.eta(x);
    const double loss = student(x) >= 0.0 ? 1.0 - eta : eta;
    sum += weight * loss;
    sum_sq += weight * loss * loss;
    mass += weight;
  }
  (void)d;
  const double mean = sum / mass;
  return {mean, std::sqrt(std::max(0.0, sum_sq / mass - mean * mean) / mass)};
}

Estimate d_pq(const TeacherDistribution& dist, const std::vector<Polytope>& a, const std::vector<Polytope>& b,
              const RiskOptions& options) {
  const int d = dist.box().dim();
  if (resolve_mode(options, d) == VolumeMode::Exact) {
    const auto pieces = weight_pieces(dist, WeightKind::DensityGap);
    auto integral = [&](const Polytope& set) {
      double total = 0.0;
      for (const auto& piece : pieces) {
        if (auto inter = set.intersect(piece.cell)) total += inter->integrate_affine(piece.gradient, piece.offset);
      }
      return total;
    };
    double value = 0.0;
    for (const auto& p : a) value += integral(p);
    for (const auto& p : b) value += integral(p);
    for (const auto& p : a) {
      for (const auto& q : b) {
        if (auto inter = p.intersect(q)) value -= 2.0 * integral(*inter);
      }
    }
    return {std::max(0.0, value), 0.0};
  }
  SobolSequence sobol(dist.box());
  auto inside = [](const std::vector<Polytope>& set, const Eigen::VectorXd& x) {
    return std::any_of(set.begin(), set.end(), [&](const Polytope& p) { return p.contains(x, 0.0); });
  };
  const double volume = dist.box().volume();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < options.mc_samples; ++i) {
    const Eigen::VectorXd x = sobol.next();
    if (inside(a, x) == inside(b, x)) continue;
    const double v = volume * point_weight(dist, dist.g(x), WeightKind::DensityGap);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(options.mc_samples);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n)};
}

}  // namespace tsnet
