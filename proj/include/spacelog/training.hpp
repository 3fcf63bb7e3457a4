#pragma once

// Full-batch Adam training of a ReLU regression network. Inputs and targets
// are standardized internally; the affine scaling is folded back into the
// first and last layers so the returned network works in raw units.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/relu_network.hpp"
#include "spacelog/spacecraft.hpp"

namespace spacelog {

struct TrainConfig {
  std::size_t hidden_layers = 1;
  std::size_t neurons = 10;
  std::size_t max_iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool clamp_output = true;
};

// 1 - SS_res / SS_tot; NaN when the targets are constant.
inline double r_squared(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.empty()) throw DomainError("r_squared: size mismatch");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) return kNaN;
  return 1.0 - ss_res / ss_tot;
}

inline std::size_t parameter_count(const ReluNetwork& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

// Parameters in layer order; within a layer, weights row-major then biases.
inline std::vector<double> get_parameters(const ReluNetwork& net) {
  std::vector<double> p;
  p.reserve(parameter_count(net));
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) p.push_back(l.weights(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) p.push_back(l.bias(r));
  }
  return p;
}

inline void set_parameters(ReluNetwork& net, std::span<const double> p) {
  if (p.size() != parameter_count(net)) throw DomainError("set_parameters: wrong parameter count");
  std::size_t k = 0;
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = p[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = p[k++];
  }
}

// L = 1/(2N) sum ||f(x) - y||^2 over the columns of X, Y, using the affine
// output (no clamp). Fills `grad` in get_parameters order when non-null.
inline double loss_and_gradient(const ReluNetwork& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                std::vector<double>* grad = nullptr) {
  const auto N = X.cols();
  if (N == 0 || Y.cols() != N) throw DomainError("loss_and_gradient: sample count mismatch");
  const std::size_t S = net.layers.size();
  std::vector<Eigen::MatrixXd> act(S + 1);  // act[0] = X, act[s] = output of layer s
  act[0] = X;
  for (std::size_t s = 0; s < S; ++s) {
    act[s + 1] = (net.layers[s].weights * act[s]).colwise() + net.layers[s].bias;
    if (s + 1 < S) act[s + 1] = act[s + 1].cwiseMax(0.0);
  }
  const Eigen::MatrixXd err = act[S] - Y;
  const double loss = 0.5 * err.squaredNorm() / static_cast<double>(N);
  if (!grad) return loss;

  std::vector<Eigen::MatrixXd> gW(S);
  std::vector<Eigen::VectorXd> gb(S);
  Eigen::MatrixXd delta = err / static_cast<double>(N);
  for (std::size_t s = S; s-- > 0;) {
    gW[s] = delta * act[s].transpose();
    gb[s] = delta.rowwise().sum();
    if (s > 0) {
      delta = net.layers[s].weights.transpose() * delta;
      delta = delta.cwiseProduct((act[s].array() > 0.0).cast<double>().matrix());
    }
  }
  grad->clear();
  grad->reserve(parameter_count(net));
  for (std::size_t s = 0; s < S; ++s) {
    for (Eigen::Index r = 0; r < gW[s].rows(); ++r)
      for (Eigen::Index c = 0; c < gW[s].cols(); ++c) grad->push_back(gW[s](r, c));
    for (Eigen::Index r = 0; r < gb[s].size(); ++r) grad->push_back(gb[s](r));
  }
  return loss;
}

// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)) for weights and biases.
inline ReluNetwork init_network(std::span<const std::size_t> sizes, std::mt19937_64& rng) {
  ReluNetwork net;
  for (std::size_t s = 1; s < sizes.size(); ++s) {
    const auto out = static_cast<Eigen::Index>(sizes[s]), in = static_cast<Eigen::Index>(sizes[s - 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[s] + sizes[s - 1]));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l;
    l.weights.resize(out, in);
    l.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = u(rng);
    for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = u(rng);
    net.layers.push_back(std::move(l));
  }
  return net;
}

inline ReluNetwork train_relu_network(std::span<const DataPoint> data, const TrainConfig& cfg) {
  if (cfg.hidden_layers == 0 || cfg.neurons == 0 || cfg.max_iterations == 0)
    throw DomainError("train_relu_network: sizes and iteration count must be positive");
  if (data.size() < 2) throw DomainError("train_relu_network: need at least two samples");
  const auto N = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd X(1, N), Y(1, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& d = data[static_cast<std::size_t>(i)];
    if (!std::isfinite(d.input) || !std::isfinite(d.target)) throw DomainError("train_relu_network: non-finite sample");
    X(0, i) = d.input;
    Y(0, i) = d.target;
  }
  const double x_lo = X.minCoeff(), x_hi = X.maxCoeff();
  if (x_lo == x_hi) throw DomainError("train_relu_network: degenerate data, all inputs identical");

  auto standardize = [](const Eigen::MatrixXd& M, double& mu, double& sigma) {
    mu = M.mean();
    sigma = std::sqrt((M.array() - mu).square().mean());
    if (sigma == 0.0) sigma = 1.0;
    return Eigen::MatrixXd((M.array() - mu) / sigma);
  };
  double mx, sx, my, sy;
  const Eigen::MatrixXd Xs = standardize(X, mx, sx);
  const Eigen::MatrixXd Ys = standardize(Y, my, sy);
  const bool constant_target = Y.minCoeff() == Y.maxCoeff();

  std::vector<std::size_t> sizes{1};
  for (std::size_t h = 0; h < cfg.hidden_layers; ++h) sizes.push_back(cfg.neurons);
  sizes.push_back(1);
  std::mt19937_64 rng(cfg.seed);
  ReluNetwork net = init_network(sizes, rng);

  if (constant_target) {
    // Bias-only fit: the output layer ignores the hidden units.
    net.layers.back().weights.setZero();
    net.layers.back().bias.setZero();
  }

  std::vector<double> p = get_parameters(net), g;
  std::vector<double> m(p.size(), 0.0), v(p.size(), 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t it = 0; it < (constant_target ? 0 : cfg.max_iterations); ++it) {
    const double loss = loss_and_gradient(net, Xs, Ys, &g);
    if (!std::isfinite(loss)) throw NumericalError("train_relu_network: loss diverged");
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    const double step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= step * m[k] / (std::sqrt(v[k]) + cfg.epsilon);
    }
    set_parameters(net, p);
  }
  if (!std::isfinite(loss_and_gradient(net, Xs, Ys))) throw NumericalError("train_relu_network: loss diverged");

  // Fold x = mx + sx * u into the first layer and y = my + sy * f into the last.
  auto& first = net.layers.front();
  first.bias -= first.weights.col(0) * (mx / sx);
  first.weights /= sx;
  auto& last = net.layers.back();
  last.weights *= sy;
  last.bias = last.bias * sy + Eigen::VectorXd::Constant(last.bias.size(), my);

  net.input_box = {{x_lo, x_hi}};
  net.clamp_output = cfg.clamp_output;
  net.seed = cfg.seed;
  std::vector<double> pred, actual;
  for (const auto& d : data) {
    pred.push_back(forward(net, d.input));
    actual.push_back(d.target);
  }
  net.train_r2 = r_squared(pred, actual);
  return net;
}

// R^2 of `predict` against `target` on `count` uniform random points in [lo, hi].
template <class P, class F>
  requires std::is_invocable_r_v<double, P, double>
double held_out_r2(P&& predict, F&& target, double lo, double hi, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> pred, actual;
  pred.reserve(count);
  actual.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = u(rng);
    pred.push_back(predict(x));
    actual.push_back(target(x));
  }
  return r_squared(pred, actual);
}

template <class F>
double held_out_r2(const ReluNetwork& net, F&& target, double lo, double hi, std::size_t count, std::uint64_t seed) {
  return held_out_r2([&net](double x) { return forward(net, x); }, std::forward<F>(target), lo, hi, count, seed);
}

}  // namespace spacelog
