#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsnet/errors.hpp"

namespace tsnet {

/// One affine map x -> W x + b. Hidden layers are followed by a ReLU.
template <typename Scalar>
struct Layer {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

template <typename Scalar>
inline Scalar relu(Scalar v) {
  return v > Scalar(0) ? v : Scalar(0);
}

/// Depth, widest hidden layer, nonzero parameter count and largest |parameter|.
struct SizeMetrics {
  int depth = 0;
  int max_width = 0;
  std::int64_t nonzero_count = 0;
  double max_abs_param = 0.0;
};

/// Fully connected ReLU network with scalar output.
///
/// All layers except the last are followed by a ReLU; the last layer is affine
/// with a single output. Immutable after construction.
template <typename Scalar = double>
class Network {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using LayerType = Layer<Scalar>;

  Network() = default;

  explicit Network(std::vector<LayerType> layers) : layers_(std::move(layers)) { validate(); }

  const std::vector<LayerType>& layers() const { return layers_; }
  const LayerType& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t layer_count() const { return layers_.size(); }
  int hidden_layer_count() const { return static_cast<int>(layers_.size()) - 1; }
  Eigen::Index input_dim() const { return layers_.front().in_dim(); }

  std::vector<int> hidden_widths() const {
    std::vector<int> widths;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) widths.push_back(static_cast<int>(layers_[l].out_dim()));
    return widths;
  }

  int hidden_unit_count() const {
    int total = 0;
    for (int w : hidden_widths()) total += w;
    return total;
  }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != input_dim()) {
      throw DimensionError("network expects input of dimension " + std::to_string(input_dim()) + ", got " +
                           std::to_string(x.size()));
    }
    Vector h = x.template cast<Scalar>();
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      h = (layers_[l].weights * h + layers_[l].bias).unaryExpr([](Scalar v) { return relu(v); });
    }
    return (layers_.back().weights * h + layers_.back().bias)(0);
  }

  /// Evaluates every column of `points` (d x n). Returns n outputs.
  Vector evaluate_batch(const Matrix& points) const {
    if (points.rows() != input_dim()) {
      throw DimensionError("batch rows must equal network input dimension");
    }
    Matrix h = points;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      h = ((layers_[l].weights * h).colwise() + layers_[l].bias).cwiseMax(Scalar(0));
    }
    Matrix out = (layers_.back().weights * h).colwise() + layers_.back().bias;
    return out.row(0).transpose();
  }

  SizeMetrics size_metrics() const {
    SizeMetrics m;
    m.depth = hidden_layer_count();
    for (int w : hidden_widths()) m.max_width = std::max(m.max_width, w);
    for (const auto& layer : layers_) {
      m.nonzero_count += (layer.weights.array() != Scalar(0)).count();
      m.nonzero_count += (layer.bias.array() != Scalar(0)).count();
      if (layer.weights.size() > 0)
        m.max_abs_param = std::max(m.max_abs_param, static_cast<double>(layer.weights.cwiseAbs().maxCoeff()));
      if (layer.bias.size() > 0)
        m.max_abs_param = std::max(m.max_abs_param, static_cast<double>(layer.bias.cwiseAbs().maxCoeff()));
    }
    return m;
  }

  bool operator==(const Network& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& a = layers_[l];
      const auto& b = other.layers_[l];
      if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols()) return false;
      if (a.weights != b.weights || a.bias != b.bias) return false;
    }
    return true;
  }

 private:
  void validate() const {
    if (layers_.empty()) throw DimensionError("network needs at least one layer");
    if (layers_.front().in_dim() < 1) throw DimensionError("input dimension must be positive");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (layer.bias.size() != layer.out_dim()) {
        throw DimensionError("layer " + std::to_string(l) + ": bias length does not match weight rows");
      }
      if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
        throw DimensionError("layer " + std::to_string(l) + ": input dimension does not chain with previous layer");
      }
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
        throw NumericalError("layer " + std::to_string(l) + ": non-finite parameter");
      }
    }
    if (layers_.back().out_dim() != 1) throw DimensionError("final layer must have scalar output");
  }

  std::vector<LayerType> layers_;
};

using NetworkParams = Network<double>;

/// Bounds (L, N, S, B, F) defining a class of networks.
struct NetworkClassSpec {
  int max_depth = 1;
  int max_width = 1;
  std::int64_t max_nonzero = 1;
  double max_abs_weight = 1.0;
  double max_sup_norm = 1.0;
};

/// Checks depth, width, sparsity and weight magnitude. The sup-norm bound needs a
/// domain and is checked by `geometry::is_member`.
bool satisfies_size_limits(const NetworkClassSpec& spec, const NetworkParams& net);

// ---------------------------------------------------------------------------
// Constructions

/// Hat function supported on [-1, 1] with peak 1 at 0: relu(t+1) - 2 relu(t) + relu(t-1).
NetworkParams make_bump_phi();

/// exp(-M) * phi(M t - (j - 1)), a hat of height exp(-M) centred at (j-1)/M.
NetworkParams make_psi_j(int M, int j);

/// Sum of the hats psi_j selected by `omega` (one hidden layer, width 3M).
NetworkParams make_b_omega(int M, const std::vector<int>& omega);

/// L1 pyramid relu(1 - sum_i |x_i|) on R^(d-1): one at the origin, zero outside [-1,1]^(d-1).
NetworkParams make_spike(int d);

/// Depth-fold composition of the tent map on [0,1]; width 2, 2^depth linear pieces.
NetworkParams make_sawtooth(int depth);

enum class WeightDistribution { Normal, Uniform };

WeightDistribution parse_weight_distribution(const std::string& name);
std::string to_string(WeightDistribution dist);

/// Network with architecture widths = {d, n_1, ..., n_L} plus a scalar output layer;
/// every weight and bias drawn i.i.d. from `dist`.
NetworkParams make_random_teacher(const std::vector<int>& widths, std::uint64_t seed,
                                  WeightDistribution dist = WeightDistribution::Normal);

// ---------------------------------------------------------------------------
// Network documents: {"layers": [{"w": [[...]], "b": [...]}, ...]}

std::string serialize(const NetworkParams& net);
NetworkParams deserialize(const std::string& document);
NetworkParams load_network(const std::string& path);
void save_network(const NetworkParams& net, const std::string& path);

}  // namespace tsnet
