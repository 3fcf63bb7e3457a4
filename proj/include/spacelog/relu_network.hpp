#pragma once

// Feed-forward ReLU networks stored in physical units: hidden layers use ReLU,
// the output layer is affine, and an optional clamp applies one more ReLU to
// the output.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spacelog/common.hpp"
#include "spacelog/error.hpp"

namespace spacelog {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

struct ReluNetwork {
  std::vector<DenseLayer> layers;  // last layer is the affine output layer
  std::vector<Interval> input_box;
  bool clamp_output = false;
  std::uint64_t seed = 0;
  double train_r2 = kNaN;
  double test_r2 = kNaN;

  std::size_t input_size() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols()); }
  std::size_t output_size() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows()); }
  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> s;
    if (layers.empty()) return s;
    s.push_back(input_size());
    for (const auto& l : layers) s.push_back(static_cast<std::size_t>(l.weights.rows()));
    return s;
  }

  // Throws DomainError unless dimensions chain and every parameter is finite.
  void validate() const {
    if (layers.empty()) throw DomainError("relu network has no layers");
    for (std::size_t s = 0; s < layers.size(); ++s) {
      const auto& l = layers[s];
      if (l.bias.size() != l.weights.rows())
        throw DomainError("layer " + std::to_string(s) + ": bias size does not match weight rows");
      if (s > 0 && l.weights.cols() != layers[s - 1].weights.rows())
        throw DomainError("layer " + std::to_string(s) + ": weight columns do not match previous layer");
      if (!l.weights.allFinite() || !l.bias.allFinite())
        throw DomainError("layer " + std::to_string(s) + ": non-finite parameter");
    }
    if (!input_box.empty() && input_box.size() != input_size())
      throw DomainError("input box dimension does not match the network input");
    for (const auto& b : input_box)
      if (!(b.lo <= b.hi)) throw DomainError("input box has lo > hi");
  }
};

// Output before the optional clamp.
inline Eigen::VectorXd forward_affine(const ReluNetwork& net, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_size())
    throw DomainError("forward: input has dimension " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(net.input_size()));
  Eigen::VectorXd a = x;
  for (std::size_t s = 0; s < net.layers.size(); ++s) {
    a = net.layers[s].weights * a + net.layers[s].bias;
    if (s + 1 < net.layers.size()) a = a.cwiseMax(0.0);
  }
  return a;
}

inline Eigen::VectorXd forward(const ReluNetwork& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = forward_affine(net, x);
  if (net.clamp_output) y = y.cwiseMax(0.0);
  return y;
}

inline double forward(const ReluNetwork& net, double x) {
  if (net.input_size() != 1 || net.output_size() != 1) throw DomainError("scalar forward needs a 1-in 1-out network");
  return forward(net, Eigen::VectorXd::Constant(1, x))(0);
}

// Pre-activation intervals for every hidden neuron plus the output interval
// before the clamp, for inputs in `box`.
struct NeuronBounds {
  std::vector<Interval> input_box;
  std::vector<std::vector<Interval>> hidden;  // [layer][neuron]
  std::vector<Interval> output;
};

inline NeuronBounds propagate_bounds(const ReluNetwork& net, const std::vector<Interval>& box) {
  if (box.size() != net.input_size()) throw DomainError("propagate_bounds: box dimension mismatch");
  Eigen::VectorXd lo(box.size()), hi(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!std::isfinite(box[i].lo) || !std::isfinite(box[i].hi))
      throw DomainError("propagate_bounds: input box must be finite");
    lo(static_cast<Eigen::Index>(i)) = box[i].lo;
    hi(static_cast<Eigen::Index>(i)) = box[i].hi;
  }
  NeuronBounds nb;
  nb.input_box = box;
  for (std::size_t s = 0; s < net.layers.size(); ++s) {
    const auto& W = net.layers[s].weights;
    const Eigen::MatrixXd Wp = W.cwiseMax(0.0), Wn = W.cwiseMin(0.0);
    const Eigen::VectorXd plo = Wp * lo + Wn * hi + net.layers[s].bias;
    const Eigen::VectorXd phi = Wp * hi + Wn * lo + net.layers[s].bias;
    std::vector<Interval> iv(static_cast<std::size_t>(plo.size()));
    for (Eigen::Index j = 0; j < plo.size(); ++j) iv[static_cast<std::size_t>(j)] = {plo(j), phi(j)};
    if (s + 1 < net.layers.size()) {
      nb.hidden.push_back(std::move(iv));
      lo = plo.cwiseMax(0.0);
      hi = phi.cwiseMax(0.0);
    } else {
      nb.output = std::move(iv);
    }
  }
  return nb;
}

inline NeuronBounds propagate_bounds(const ReluNetwork& net) { return propagate_bounds(net, net.input_box); }

// JSON form: layer_sizes, row-major weights per layer, biases per layer,
// input_box as [lo, hi] pairs, clamp_output, seed, train_r2, test_r2 (null
// when undefined).
inline nlohmann::json to_json(const ReluNetwork& net) {
  using nlohmann::json;
  json j;
  j["layer_sizes"] = net.layer_sizes();
  j["weights"] = json::array();
  j["biases"] = json::array();
  for (const auto& l : net.layers) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    j["weights"].push_back(std::move(w));
    j["biases"].push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  j["input_box"] = json::array();
  for (const auto& b : net.input_box) j["input_box"].push_back({b.lo, b.hi});
  j["clamp_output"] = net.clamp_output;
  j["seed"] = net.seed;
  j["train_r2"] = std::isfinite(net.train_r2) ? json(net.train_r2) : json(nullptr);
  j["test_r2"] = std::isfinite(net.test_r2) ? json(net.test_r2) : json(nullptr);
  return j;
}

inline ReluNetwork relu_network_from_json(const nlohmann::json& j) {
  ReluNetwork net;
  try {
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (sizes.size() < 2) throw ParseError("layer_sizes", "need at least input and output sizes");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
      throw ParseError("weights", "expected " + std::to_string(sizes.size() - 1) + " layers");
    for (std::size_t s = 1; s < sizes.size(); ++s) {
      const auto w = weights[s - 1].get<std::vector<double>>();
      const auto b = biases[s - 1].get<std::vector<double>>();
      const auto rows = static_cast<Eigen::Index>(sizes[s]), cols = static_cast<Eigen::Index>(sizes[s - 1]);
      if (w.size() != sizes[s] * sizes[s - 1])
        throw ParseError("weights[" + std::to_string(s - 1) + "]", "wrong element count");
      if (b.size() != sizes[s]) throw ParseError("biases[" + std::to_string(s - 1) + "]", "wrong element count");
      DenseLayer l;
      l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), rows, cols);
      l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      net.layers.push_back(std::move(l));
    }
    if (j.contains("input_box"))
      for (const auto& b : j.at("input_box")) net.input_box.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    net.clamp_output = j.value("clamp_output", false);
    net.seed = j.value("seed", std::uint64_t{0});
    auto opt = [&](const char* key) {
      return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : kNaN;
    };
    net.train_r2 = opt("train_r2");
    net.test_r2 = opt("test_r2");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("network", e.what());
  }
  net.validate();
  return net;
}

inline void save_relu_network(const ReluNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(net).dump(2) << '\n';
}

inline ReluNetwork load_relu_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("model not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return relu_network_from_json(j);
}

}  // namespace spacelog
