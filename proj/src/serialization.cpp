#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tsnet/network.hpp"

namespace tsnet {

using ordered_json = nlohmann::ordered_json;

std::string serialize(const NetworkParams& net) {
  ordered_json layers = ordered_json::array();
  for (const auto& layer : net.layers()) {
    ordered_json w = ordered_json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) row.push_back(layer.weights(r, c));
      w.push_back(std::move(row));
    }
    ordered_json b = ordered_json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) b.push_back(layer.bias(r));
    ordered_json entry;
    entry["w"] = std::move(w);
    entry["b"] = std::move(b);
    layers.push_back(std::move(entry));
  }
  ordered_json doc;
  doc["layers"] = std::move(layers);
  return doc.dump();
}

namespace {

double as_finite(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(where + ": non-finite value");
  return x;
}

}  // namespace

NetworkParams deserialize(const std::string& document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw ParseError("network document: missing non-empty \"layers\" array");
  }
  std::vector<Layer<double>> layers;
  std::size_t index = 0;
  for (const auto& entry : doc["layers"]) {
    const std::string where = "layer " + std::to_string(index++);
    if (!entry.is_object() || !entry.contains("w") || !entry.contains("b")) {
      throw ParseError(where + ": expected object with \"w\" and \"b\"");
    }
    const auto& w = entry["w"];
    const auto& b = entry["b"];
    if (!w.is_array() || w.empty() || !b.is_array()) throw ParseError(where + ": malformed \"w\" or \"b\"");
    const auto rows = static_cast<Eigen::Index>(w.size());
    if (!w[0].is_array() || w[0].empty()) throw ParseError(where + ": weight rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(w[0].size());
    Layer<double> layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(static_cast<Eigen::Index>(b.size()))};
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!w[r].is_array() || static_cast<Eigen::Index>(w[r].size()) != cols) {
        throw ParseError(where + ": ragged weight matrix");
      }
      for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = as_finite(w[r][c], where + " w");
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = as_finite(b[r], where + " b");
    layers.push_back(std::move(layer));
  }
  return NetworkParams(std::move(layers));
}

NetworkParams load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

void save_network(const NetworkParams& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write network file " + path);
  out << serialize(net) << '\n';
}

}  // namespace tsnet
