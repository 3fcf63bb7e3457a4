#pragma once

// Small hand-built and random networks shared by the surrogate tests.

#include <random>
#include <vector>

#include "spacelog/relu_network.hpp"

namespace testing_nets {

inline spacelog::ReluNetwork constant_net(const std::vector<int>& sizes, double value) {
  spacelog::ReluNetwork net;
  for (std::size_t s = 1; s < sizes.size(); ++s)
    net.layers.push_back({Eigen::MatrixXd::Constant(sizes[s], sizes[s - 1], value),
                          Eigen::VectorXd::Constant(sizes[s], value)});
  return net;
}

// One hidden neuron relu(w x + b) passed through an identity output layer.
inline spacelog::ReluNetwork single_neuron(double w, double b) {
  spacelog::ReluNetwork net;
  net.layers.push_back({Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Constant(1, b)});
  net.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1)});
  return net;
}

inline spacelog::ReluNetwork random_net(const std::vector<int>& sizes, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  spacelog::ReluNetwork net;
  for (std::size_t s = 1; s < sizes.size(); ++s) {
    spacelog::DenseLayer l{Eigen::MatrixXd(sizes[s], sizes[s - 1]), Eigen::VectorXd(sizes[s])};
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace testing_nets
