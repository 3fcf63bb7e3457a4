#pragma once

// Exact mixed-integer encoding of a trained ReLU network. Each unstable
// hidden neuron gets a continuous output Y and a binary Z with
//   Y >= w,  Y <= w - lo (1 - Z),  Y <= hi Z,  Y >= 0
// where [lo, hi] bounds the pre-activation w. Stable neurons need no binary.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spacelog/error.hpp"
#include "spacelog/milp_model.hpp"
#include "spacelog/relu_network.hpp"

namespace spacelog {

struct EmbeddingInfo {
  std::vector<VarId> binaries;
  std::vector<VarId> pre_activations;
  std::size_t fixed_active = 0;
  std::size_t fixed_inactive = 0;
};

namespace detail {

// Adds out = relu(in) for in in [lo, hi]; returns the binary if one is needed.
inline std::optional<VarId> encode_relu(MilpModel& model, VarId in, VarId out, Interval b, const std::string& tag,
                                        EmbeddingInfo& info) {
  if (b.hi <= 0.0) {
    ++info.fixed_inactive;
    model.add_constraint({{out, 1.0}}, Sense::Equal, 0.0, tag + ":off");
    return std::nullopt;
  }
  if (b.lo >= 0.0) {
    ++info.fixed_active;
    model.add_constraint({{out, 1.0}, {in, -1.0}}, Sense::Equal, 0.0, tag + ":on");
    return std::nullopt;
  }
  const VarId z = model.add_binary(tag.substr(tag.find(':') + 1) + ":z");
  model.add_constraint({{out, 1.0}, {in, -1.0}}, Sense::GreaterEqual, 0.0, tag + ":ge");
  model.add_constraint({{out, 1.0}, {in, -1.0}, {z, -b.lo}}, Sense::LessEqual, -b.lo, tag + ":act");
  model.add_constraint({{out, 1.0}, {z, -b.hi}}, Sense::LessEqual, 0.0, tag + ":inact");
  if (model.variable(out).lower < 0.0) model.add_constraint({{out, 1.0}}, Sense::GreaterEqual, 0.0, tag + ":nonneg");
  return z;
}

}  // namespace detail

// Encodes outputs = net(inputs) into `model`. Input variables must have finite
// bounds inside the box `bounds` was computed for. Row tags start with
// "relu:<prefix>:".
inline EmbeddingInfo embed_network(MilpModel& model, const ReluNetwork& net, const NeuronBounds& bounds,
                                   std::span<const VarId> inputs, std::span<const VarId> outputs,
                                   const std::string& prefix) {
  net.validate();
  if (inputs.size() != net.input_size() || outputs.size() != net.output_size())
    throw DomainError("embed_network: variable counts do not match the network");
  if (bounds.input_box.size() != inputs.size() || bounds.hidden.size() != net.hidden_layers())
    throw DomainError("embed_network: bounds were computed for a different network");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& v = model.variable(inputs[i]);
    if (!std::isfinite(v.lower) || !std::isfinite(v.upper))
      throw DomainError("embed_network: input '" + v.name + "' needs finite bounds");
    const auto& box = bounds.input_box[i];
    const double slack = 1e-9 * std::max(1.0, std::abs(box.hi - box.lo));
    if (v.lower < box.lo - slack || v.upper > box.hi + slack)
      throw DomainError("embed_network: input '" + v.name + "' bounds exceed the box the neuron bounds cover");
  }

  EmbeddingInfo info;
  const std::string base = "relu:" + prefix;
  // Previous layer values; nullopt stands for a neuron fixed at zero.
  std::vector<std::optional<VarId>> prev(inputs.begin(), inputs.end());

  auto affine_row = [&](std::size_t s, Eigen::Index j, VarId target, const std::string& tag) {
    const auto& l = net.layers[s];
    std::vector<Term> terms{{target, 1.0}};
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
      if (prev[static_cast<std::size_t>(c)]) terms.push_back({*prev[static_cast<std::size_t>(c)], -l.weights(j, c)});
    model.add_constraint(std::move(terms), Sense::Equal, l.bias(j), tag);
  };

  for (std::size_t s = 0; s + 1 < net.layers.size(); ++s) {
    const auto& l = net.layers[s];
    std::vector<std::optional<VarId>> next(static_cast<std::size_t>(l.weights.rows()));
    for (Eigen::Index j = 0; j < l.weights.rows(); ++j) {
      const Interval b = bounds.hidden[s][static_cast<std::size_t>(j)];
      const std::string name = prefix + ":L" + std::to_string(s + 1) + ":N" + std::to_string(j);
      const std::string tag = base + ":L" + std::to_string(s + 1) + ":N" + std::to_string(j);
      if (b.hi <= 0.0) {
        ++info.fixed_inactive;
        continue;
      }
      const VarId w = model.add_continuous(name + ":w", b.lo, b.hi);
      info.pre_activations.push_back(w);
      affine_row(s, j, w, tag + ":pre");
      if (b.lo >= 0.0) {
        ++info.fixed_active;
        next[static_cast<std::size_t>(j)] = w;
        continue;
      }
      const VarId y = model.add_continuous(name + ":y", 0.0, b.hi);
      if (auto z = detail::encode_relu(model, w, y, b, tag, info)) info.binaries.push_back(*z);
      next[static_cast<std::size_t>(j)] = y;
    }
    prev = std::move(next);
  }

  const std::size_t S = net.layers.size() - 1;
  for (Eigen::Index j = 0; j < net.layers[S].weights.rows(); ++j) {
    const std::string tag = base + ":out" + std::to_string(j);
    const VarId out = outputs[static_cast<std::size_t>(j)];
    if (!net.clamp_output) {
      affine_row(S, j, out, tag);
      continue;
    }
    const Interval b = bounds.output[static_cast<std::size_t>(j)];
    const VarId raw = model.add_continuous(prefix + ":out" + std::to_string(j) + ":raw", b.lo, b.hi);
    info.pre_activations.push_back(raw);
    affine_row(S, j, raw, tag + ":pre");
    if (auto z = detail::encode_relu(model, raw, out, b, tag + ":clamp", info)) info.binaries.push_back(*z);
  }
  return info;
}

inline EmbeddingInfo embed_network(MilpModel& model, const ReluNetwork& net, const NeuronBounds& bounds, VarId input,
                                   VarId output, const std::string& prefix) {
  return embed_network(model, net, bounds, std::span<const VarId>(&input, 1), std::span<const VarId>(&output, 1),
                       prefix);
}

}  // namespace spacelog
