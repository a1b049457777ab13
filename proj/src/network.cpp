#include "tsnet/network.hpp"

#include <cmath>

#include "tsnet/random.hpp"

namespace tsnet {

using Matrix = NetworkParams::Matrix;
using Vector = NetworkParams::Vector;
using LayerD = Layer<double>;

bool satisfies_size_limits(const NetworkClassSpec& spec, const NetworkParams& net) {
  const SizeMetrics m = net.size_metrics();
  return m.depth <= spec.max_depth && m.max_width <= spec.max_width && m.nonzero_count <= spec.max_nonzero &&
         m.max_abs_param <= spec.max_abs_weight;
}

NetworkParams make_bump_phi() {
  LayerD hidden{Matrix::Ones(3, 1), Vector(3)};
  hidden.bias << 1.0, 0.0, -1.0;
  LayerD out{Matrix(1, 3), Vector::Zero(1)};
  out.weights << 1.0, -2.0, 1.0;
  return NetworkParams({hidden, out});
}

namespace {

// Appends exp(-M) * phi(M t - shift) to a one-hidden-layer accumulator.
void append_scaled_hat(int M, double shift, std::vector<double>& w_in, std::vector<double>& b_in,
                       std::vector<double>& w_out) {
  const double height = std::exp(-static_cast<double>(M));
  const double offsets[3] = {1.0, 0.0, -1.0};
  const double coeffs[3] = {1.0, -2.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    w_in.push_back(static_cast<double>(M));
    b_in.push_back(offsets[k] - shift);
    w_out.push_back(height * coeffs[k]);
  }
}

NetworkParams assemble_one_hidden(const std::vector<double>& w_in, const std::vector<double>& b_in,
                                  const std::vector<double>& w_out, double out_bias) {
  const auto width = static_cast<Eigen::Index>(w_in.size());
  LayerD hidden{Matrix(width, 1), Vector(width)};
  LayerD out{Matrix(1, width), Vector::Constant(1, out_bias)};
  for (Eigen::Index i = 0; i < width; ++i) {
    hidden.weights(i, 0) = w_in[i];
    hidden.bias(i) = b_in[i];
    out.weights(0, i) = w_out[i];
  }
  return NetworkParams({hidden, out});
}

}  // namespace

NetworkParams make_psi_j(int M, int j) {
  if (M < 1) throw ConfigError("make_psi_j: M must be positive");
  if (j < 1 || j > M) throw ConfigError("make_psi_j: j must lie in [1, M]");
  std::vector<double> w_in, b_in, w_out;
  append_scaled_hat(M, static_cast<double>(j - 1), w_in, b_in, w_out);
  return assemble_one_hidden(w_in, b_in, w_out, 0.0);
}

NetworkParams make_b_omega(int M, const std::vector<int>& omega) {
  if (M < 1) throw ConfigError("make_b_omega: M must be positive");
  if (static_cast<int>(omega.size()) != M) throw ConfigError("make_b_omega: omega must have length M");
  std::vector<double> w_in, b_in, w_out;
  for (int j = 1; j <= M; ++j) {
    if (omega[j - 1] != 0) append_scaled_hat(M, static_cast<double>(j - 1), w_in, b_in, w_out);
  }
  if (w_in.empty()) {
    // Zero function; keep one inert unit so the architecture stays one-hidden-layer.
    return assemble_one_hidden({0.0}, {0.0}, {0.0}, 0.0);
  }
  return assemble_one_hidden(w_in, b_in, w_out, 0.0);
}

NetworkParams make_spike(int d) {
  if (d < 2) throw ConfigError("make_spike: d must be at least 2");
  const int m = d - 1;
  LayerD first{Matrix::Zero(2 * m, m), Vector::Zero(2 * m)};
  for (int i = 0; i < m; ++i) {
    first.weights(2 * i, i) = 1.0;
    first.weights(2 * i + 1, i) = -1.0;
  }
  LayerD second{Matrix::Constant(1, 2 * m, -1.0), Vector::Ones(1)};
  LayerD out{Matrix::Ones(1, 1), Vector::Zero(1)};
  return NetworkParams({first, second, out});
}

NetworkParams make_sawtooth(int depth) {
  if (depth < 1) throw ConfigError("make_sawtooth: depth must be at least 1");
  // Tent T(y) = 2 relu(y) - 4 relu(y - 1/2); hidden layer l feeds T of layer l-1.
  std::vector<LayerD> layers;
  Vector bias(2);
  bias << 0.0, -0.5;
  layers.push_back({Matrix::Ones(2, 1), bias});
  Matrix fold(2, 2);
  fold << 2.0, -4.0, 2.0, -4.0;
  for (int l = 1; l < depth; ++l) layers.push_back({fold, bias});
  Matrix out(1, 2);
  out << 2.0, -4.0;
  layers.push_back({out, Vector::Zero(1)});
  return NetworkParams(std::move(layers));
}

WeightDistribution parse_weight_distribution(const std::string& name) {
  if (name == "normal" || name == "gaussian") return WeightDistribution::Normal;
  if (name == "uniform") return WeightDistribution::Uniform;
  throw ConfigError("unknown weight distribution '" + name + "' (expected normal or uniform)");
}

std::string to_string(WeightDistribution dist) {
  return dist == WeightDistribution::Normal ? "normal" : "uniform";
}

NetworkParams make_random_teacher(const std::vector<int>& widths, std::uint64_t seed, WeightDistribution dist) {
  if (widths.empty()) throw ConfigError("teacher widths must contain the input dimension");
  for (int w : widths) {
    if (w < 1) throw ConfigError("teacher widths must be positive");
  }
  Rng rng(seed);
  auto draw = [&]() { return dist == WeightDistribution::Normal ? rng.normal() : rng.uniform(-1.0, 1.0); };
  std::vector<LayerD> layers;
  std::vector<int> dims = widths;
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerD layer{Matrix(dims[l + 1], dims[l]), Vector(dims[l + 1])};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = draw();
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = draw();
    layers.push_back(std::move(layer));
  }
  return NetworkParams(std::move(layers));
}

}  // namespace tsnet
