#include "tsnet/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "tsnet/errors.hpp"
#include "tsnet/random.hpp"

namespace tsnet {

namespace {

void check_data(const Dataset& data) {
  if (data.size() == 0) throw ConfigError("dataset is empty");
  if (data.y.size() != data.x.cols()) throw DimensionError("dataset has mismatched point and label counts");
}

double zero_one_from_outputs(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double predicted = f(i) >= 0.0 ? 1.0 : -1.0;
    if (predicted != y(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(f.size());
}

std::vector<Layer<double>> zeros_like(const NetworkParams& net) {
  std::vector<Layer<double>> g;
  for (const auto& layer : net.layers()) {
    g.push_back({Eigen::MatrixXd::Zero(layer.out_dim(), layer.in_dim()), Eigen::VectorXd::Zero(layer.out_dim())});
  }
  return g;
}

// Points of a regular grid over the bounding box of the data, about `count` in total.
Eigen::MatrixXd probe_grid(const Dataset& data, std::size_t count) {
  const int d = data.dim();
  const Eigen::VectorXd lo = data.x.rowwise().minCoeff();
  const Eigen::VectorXd hi = data.x.rowwise().maxCoeff();
  const int per_axis = std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(count), 1.0 / d))));
  Eigen::Index total = 1;
  for (int i = 0; i < d; ++i) total *= per_axis;
  Eigen::MatrixXd grid(d, total);
  Eigen::VectorXi index = Eigen::VectorXi::Zero(d);
  for (Eigen::Index c = 0; c < total; ++c) {
    for (int i = 0; i < d; ++i) grid(i, c) = lo(i) + (hi(i) - lo(i)) * index(i) / (per_axis - 1.0);
    int axis = 0;
    while (axis < d && ++index(axis) == per_axis) index(axis++) = 0;
  }
  return grid;
}

void scale_output(std::vector<Layer<double>>& layers, double factor) {
  layers.back().weights *= factor;
  layers.back().bias *= factor;
}

// Buffers reused across epochs so a training step does not allocate.
struct Workspace {
  std::vector<Eigen::MatrixXd> pre, acts;
  Eigen::RowVectorXd f;
  Eigen::MatrixXd delta, back;
  std::vector<Layer<double>> grad;

  // Empirical hinge and 0-1 risk of `layers`, leaving the hinge subgradient in
  // `grad`. With sup_bound > 0 the output layer is first shrunk so |f| <= sup_bound
  // on the data.
  std::pair<double, double> evaluate(std::vector<Layer<double>>& layers, const Dataset& data, double sup_bound) {
    const std::size_t hidden = layers.size() - 1;
    const double n = static_cast<double>(data.size());
    pre.resize(hidden);
    acts.resize(hidden);
    grad.resize(layers.size());
    const Eigen::MatrixXd* input = &data.x;
    for (std::size_t l = 0; l < hidden; ++l) {
      pre[l].resize(layers[l].out_dim(), data.x.cols());
      pre[l].noalias() = layers[l].weights * *input;
      pre[l].colwise() += layers[l].bias;
      acts[l] = pre[l].cwiseMax(0.0);
      input = &acts[l];
    }
    f.resize(data.x.cols());
    f.noalias() = layers.back().weights * *input;
    f.array() += layers.back().bias(0);
    if (sup_bound > 0.0) {
      const double sup = f.cwiseAbs().maxCoeff();
      if (sup > sup_bound) {
        scale_output(layers, sup_bound / sup);
        f *= sup_bound / sup;
      }
    }
    double risk = 0.0;
    std::size_t wrong = 0;
    delta.resize(1, data.x.cols());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double y = data.y(i);
      const double m = y * f(i);
      if (m < 1.0) {
        risk += 1.0 - m;
        delta(0, i) = -y / n;
      } else {
        delta(0, i) = 0.0;
      }
      if ((f(i) >= 0.0 ? 1.0 : -1.0) != y) ++wrong;
    }
    for (std::size_t l = layers.size(); l-- > 0;) {
      const Eigen::MatrixXd& a = l == 0 ? data.x : acts[l - 1];
      grad[l].weights.resize(layers[l].out_dim(), layers[l].in_dim());
      grad[l].weights.noalias() = delta * a.transpose();
      grad[l].bias = delta.rowwise().sum();
      if (l == 0) break;
      back.resize(layers[l].in_dim(), data.x.cols());
      back.noalias() = layers[l].weights.transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(back.array(), 0.0);
    }
    return {risk / n, static_cast<double>(wrong) / n};
  }
};

}  // namespace

double hinge_risk(const NetworkParams& net, const Dataset& data) {
  check_data(data);
  const Eigen::VectorXd f = net.evaluate_batch(data.x);
  return (1.0 - data.y.cwiseProduct(f).array()).max(0.0).mean();
}

double empirical_01_risk(const NetworkParams& net, const Dataset& data) {
  check_data(data);
  return zero_one_from_outputs(net.evaluate_batch(data.x), data.y);
}

std::vector<Layer<double>> parameter_gradient(const NetworkParams& net, const Eigen::VectorXd& x) {
  const auto& layers = net.layers();
  std::vector<Eigen::VectorXd> acts{x};
  std::vector<Eigen::VectorXd> pre;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    pre.push_back(layers[l].weights * acts.back() + layers[l].bias);
    acts.push_back(pre.back().cwiseMax(0.0));
  }
  auto grad = zeros_like(net);
  Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
  for (std::size_t l = layers.size(); l-- > 0;) {
    grad[l].weights = delta * acts[l].transpose();
    grad[l].bias = delta;
    if (l == 0) break;
    delta = (layers[l].weights.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return grad;
}

std::pair<double, std::vector<Layer<double>>> hinge_subgradient(const NetworkParams& net, const Dataset& data) {
  check_data(data);
  const auto& layers = net.layers();
  const double n = static_cast<double>(data.size());
  std::vector<Eigen::MatrixXd> acts{data.x};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    pre.push_back((layers[l].weights * acts.back()).colwise() + layers[l].bias);
    acts.push_back(pre.back().cwiseMax(0.0));
  }
  const Eigen::RowVectorXd f = ((layers.back().weights * acts.back()).colwise() + layers.back().bias).row(0);
  const Eigen::ArrayXd margin = data.y.array() * f.transpose().array();
  const double risk = (1.0 - margin).max(0.0).mean();
  Eigen::MatrixXd delta = (margin < 1.0).select(-data.y.array() / n, 0.0).matrix().transpose();
  auto grad = zeros_like(net);
  for (std::size_t l = layers.size(); l-- > 0;) {
    grad[l].weights.noalias() = delta * acts[l].transpose();
    grad[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
    delta = (pre[l - 1].array() > 0.0).select(back.array(), 0.0).matrix();
  }
  return {risk, std::move(grad)};
}

Eigen::VectorXd flatten_parameters(const std::vector<Layer<double>>& layers) {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += l.weights.size() + l.bias.size();
  Eigen::VectorXd theta(total);
  Eigen::Index k = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) theta(k++) = l.weights(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) theta(k++) = l.bias(r);
  }
  return theta;
}

NetworkParams with_parameters(const NetworkParams& shape, const Eigen::VectorXd& theta) {
  std::vector<Layer<double>> layers = shape.layers();
  Eigen::Index k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = theta(k++);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = theta(k++);
  }
  if (k != theta.size()) throw DimensionError("parameter vector length does not match the network");
  return NetworkParams(std::move(layers));
}

NetworkParams initialize_student(int input_dim, const std::vector<int>& widths, std::uint64_t seed) {
  if (input_dim < 1) throw ConfigError("student input dimension must be positive");
  Rng rng(seed);
  std::vector<Layer<double>> layers;
  int fan_in = input_dim;
  std::vector<int> outs = widths;
  outs.push_back(1);
  for (int out : outs) {
    if (out < 1) throw ConfigError("student widths must be positive");
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer<double> layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd(out)};
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < fan_in; ++j) layer.weights(i, j) = rng.uniform(-r, r);
    }
    for (int i = 0; i < out; ++i) layer.bias(i) = rng.uniform(-r, r);
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return NetworkParams(std::move(layers));
}

TrainedStudent hinge_erm(const Dataset& data, const TrainConfig& config) {
  check_data(data);
  if (config.epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (config.restarts < 1) throw ConfigError("restarts must be at least 1");
  if (!(config.step0 > 0.0)) throw ConfigError("step size must be positive");
  if (static_cast<int>(config.widths.size()) > config.spec.max_depth) {
    throw ConfigError("student depth exceeds the class bound L");
  }
  for (int w : config.widths) {
    if (w > config.spec.max_width) throw ConfigError("student width exceeds the class bound N");
  }
  const double B = config.spec.max_abs_weight;
  const double F = config.spec.max_sup_norm;

  Workspace work;
  TrainedStudent best;
  double best_risk = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < config.restarts; ++restart) {
    NetworkParams init = initialize_student(data.dim(), config.widths, derive_seed(config.seed, {static_cast<std::uint64_t>(restart)}));
    if (config.epochs == 0) {
      TrainedStudent out;
      out.net = init;
      out.initial_hinge_risk = out.final_hinge_risk = hinge_risk(init, data);
      out.final_zero_one_risk = empirical_01_risk(init, data);
      return out;
    }
    std::vector<Layer<double>> layers = init.layers();
    std::vector<HistoryRow> history;
    std::vector<Layer<double>> restart_best = layers;
    double restart_best_risk = std::numeric_limits<double>::infinity();
    double initial = 0.0;
    for (int t = 0; t <= config.epochs; ++t) {
      const auto [risk, zero_one] = work.evaluate(layers, data, config.rescale_output ? F : 0.0);
      if (!std::isfinite(risk) || risk > 1e6) {
        throw NumericalError("hinge training diverged at epoch " + std::to_string(t) + " (risk " +
                             std::to_string(risk) + ", restart " + std::to_string(restart) + ")");
      }
      if (t == 0) initial = risk;
      if (config.record_history) history.push_back({t, risk, zero_one});
      if (risk < restart_best_risk) {
        restart_best_risk = risk;
        restart_best = layers;
      }
      if (t == config.epochs) break;
      const double step = config.step0 / std::sqrt(1.0 + t);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weights -= step * work.grad[l].weights;
        layers[l].bias -= step * work.grad[l].bias;
        if (config.clip_weights) {
          layers[l].weights = layers[l].weights.cwiseMax(-B).cwiseMin(B);
          layers[l].bias = layers[l].bias.cwiseMax(-B).cwiseMin(B);
        }
      }
    }
    if (restart_best_risk < best_risk) {
      best_risk = restart_best_risk;
      best.net = NetworkParams(restart_best);
      best.history = std::move(history);
      best.initial_hinge_risk = initial;
      best.best_restart = restart;
    }
  }

  if (config.rescale_output && config.probe_points > 0) {
    const Eigen::MatrixXd grid = probe_grid(data, config.probe_points);
    const double sup = std::max(best.net.evaluate_batch(grid).cwiseAbs().maxCoeff(),
                                best.net.evaluate_batch(data.x).cwiseAbs().maxCoeff());
    if (sup > F) {
      auto layers = best.net.layers();
      scale_output(layers, F / sup);
      best.net = NetworkParams(std::move(layers));
    }
  }
  best.final_hinge_risk = hinge_risk(best.net, data);
  best.final_zero_one_risk = empirical_01_risk(best.net, data);
  return best;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write history " + path);
  out.precision(17);
  out << "epoch,hinge_risk,zero_one_risk\n";
  for (const auto& row : history) out << row.epoch << ',' << row.hinge_risk << ',' << row.zero_one_risk << '\n';
}

IntervalErm interval_dp_01_erm(const Dataset& data, int max_intervals, double domain_lo, double domain_hi) {
  check_data(data);
  if (data.dim() != 1) throw DimensionError("interval ERM needs one-dimensional data");
  if (max_intervals < 1) throw ConfigError("interval ERM needs k >= 1");

  // Group equal locations; each group costs its negatives if covered, its positives if not.
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    pts.emplace_back(data.x(0, static_cast<Eigen::Index>(i)), data.y(static_cast<Eigen::Index>(i)));
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> loc;
  std::vector<std::size_t> pos, neg;
  for (const auto& [x, y] : pts) {
    if (loc.empty() || x != loc.back()) {
      loc.push_back(x);
      pos.push_back(0);
      neg.push_back(0);
    }
    (y > 0 ? pos : neg).back()++;
  }
  const std::size_t G = loc.size();
  const int K = max_intervals;
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 2;
  // cost[g][j][s]: best errors over the first g groups using j intervals, with group g-1 inside (s = 1) or not.
  std::vector<std::vector<std::array<std::size_t, 2>>> cost(
      G + 1, std::vector<std::array<std::size_t, 2>>(K + 1, {kInf, kInf}));
  std::vector<std::vector<std::array<int, 2>>> from(G + 1, std::vector<std::array<int, 2>>(K + 1, {0, 0}));
  cost[0][0][0] = 0;
  for (std::size_t g = 0; g < G; ++g) {
    for (int j = 0; j <= K; ++j) {
      for (int s = 0; s < 2; ++s) {
        const std::size_t c = cost[g][j][s];
        if (c >= kInf) continue;
        // Leave group g outside.
        if (c + pos[g] < cost[g + 1][j][0]) {
          cost[g + 1][j][0] = c + pos[g];
          from[g + 1][j][0] = s;
        }
        // Cover group g, continuing the open interval or starting a new one.
        const int nj = s == 1 ? j : j + 1;
        if (nj <= K && c + neg[g] < cost[g + 1][nj][1]) {
          cost[g + 1][nj][1] = c + neg[g];
          from[g + 1][nj][1] = s;
        }
      }
    }
  }
  std::size_t best = kInf;
  int best_j = 0, best_s = 0;
  for (int j = 0; j <= K; ++j) {
    for (int s = 0; s < 2; ++s) {
      if (cost[G][j][s] < best) {
        best = cost[G][j][s];
        best_j = j;
        best_s = s;
      }
    }
  }
  // Backtrack the inside/outside state per group.
  std::vector<int> inside(G);
  int j = best_j, s = best_s;
  for (std::size_t g = G; g-- > 0;) {
    inside[g] = s;
    const int prev = from[g + 1][j][s];
    if (s == 1 && prev == 0) --j;
    s = prev;
  }
  IntervalErm result;
  result.errors = best;
  result.risk = static_cast<double>(best) / static_cast<double>(data.size());
  for (std::size_t g = 0; g < G; ++g) {
    if (!inside[g] || (g > 0 && inside[g - 1])) continue;
    std::size_t e = g;
    while (e + 1 < G && inside[e + 1]) ++e;
    const double lo = g == 0 ? domain_lo : 0.5 * (loc[g - 1] + loc[g]);
    const double hi = e + 1 == G ? domain_hi : 0.5 * (loc[e] + loc[e + 1]);
    result.intervals.push_back({lo, hi});
  }
  return result;
}

}  // namespace tsnet
