#pragma once

// Fully connected feed-forward network
//   NN(z) = W_n g(... g(W_1 z + b_1) ...) + b_n
// with a smooth activation g, flat parameter storage, and scalar-generic
// evaluation so the same code runs on double, taped Var, Dual and Jet2.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpme/errors.hpp"
#include "qpme/jet.hpp"
#include "qpme/rng.hpp"
#include "qpme/spacetime.hpp"

namespace qpme {

enum class Activation : std::uint32_t { Softplus = 0, Tanh = 1 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_widths{200, 200};
  Activation activation = Activation::Softplus;

  void validate() const;
  std::size_t num_layers() const { return hidden_widths.size() + 1; }
  std::size_t num_params() const;
  bool operator==(const MlpSpec&) const = default;
};

/// Offsets of one affine layer inside the flat parameter array. Weights are
/// stored row-major as fan_out x fan_in, followed by the fan_out biases.
struct LayerLayout {
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t weight_offset;
  std::size_t bias_offset;
};

std::vector<LayerLayout> layer_layout(const MlpSpec& spec);

struct ParamVector {
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
  std::span<const double> view() const { return data; }
  std::span<double> view() { return data; }
  bool operator==(const ParamVector&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;
};

std::vector<DenseLayer> unflatten(const MlpSpec& spec, const ParamVector& params);
ParamVector flatten(const MlpSpec& spec, const std::vector<DenseLayer>& layers);

/// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpSpec& spec, Rng& rng);

inline void check_params(const MlpSpec& spec, std::size_t n) {
  if (n != spec.num_params())
    throw ContractError("parameter vector has " + std::to_string(n) + " entries, spec needs " +
                        std::to_string(spec.num_params()));
}

template <class S>
S activate(Activation act, const S& z) {
  if (act == Activation::Tanh) return tanh(z);
  return softplus(z);
}

template <class S>
Jet2<S> activate(Activation act, const Jet2<S>& z) {
  if (act == Activation::Tanh) return tanh(z);
  return softplus(z);
}

/// Forward pass for parameter scalar P and activation scalar S (P must
/// convert to S).
template <class P, class S>
S mlp_forward_generic(const MlpSpec& spec, std::span<const P> params, std::span<const S> input) {
  if (input.size() != spec.input_dim)
    throw ContractError("mlp input has length " + std::to_string(input.size()) + ", expected " +
                        std::to_string(spec.input_dim));
  check_params(spec, params.size());
  const auto layout = layer_layout(spec);
  std::vector<S> a(input.begin(), input.end());
  std::vector<S> z;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout& L = layout[l];
    z.assign(L.fan_out, S{});
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      S acc = S(params[L.bias_offset + o]);
      const std::size_t row = L.weight_offset + o * L.fan_in;
      for (std::size_t i = 0; i < L.fan_in; ++i) acc += S(params[row + i]) * a[i];
      z[o] = acc;
    }
    const bool hidden = l + 1 < layout.size();
    a.resize(L.fan_out);
    for (std::size_t o = 0; o < L.fan_out; ++o) a[o] = hidden ? activate(spec.activation, z[o]) : z[o];
  }
  return a[0];
}

/// (f, df/dz_k, d2f/dz_k^2) at `input` along input coordinate `axis`.
template <class P, class S>
Jet2<S> mlp_jet_generic(const MlpSpec& spec, std::span<const P> params, std::span<const S> input,
                        std::size_t axis) {
  if (input.size() != spec.input_dim)
    throw ContractError("mlp input has length " + std::to_string(input.size()) + ", expected " +
                        std::to_string(spec.input_dim));
  if (axis >= spec.input_dim)
    throw ContractError("jet axis " + std::to_string(axis) + " out of range for input_dim " +
                        std::to_string(spec.input_dim));
  check_params(spec, params.size());
  const auto layout = layer_layout(spec);
  std::vector<Jet2<S>> a(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    a[i] = Jet2<S>(input[i], S(i == axis ? 1.0 : 0.0), S(0.0));
  std::vector<Jet2<S>> z;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout& L = layout[l];
    z.assign(L.fan_out, Jet2<S>{});
    for (std::size_t o = 0; o < L.fan_out; ++o) {
      Jet2<S> acc(S(params[L.bias_offset + o]), S(0.0), S(0.0));
      const std::size_t row = L.weight_offset + o * L.fan_in;
      for (std::size_t i = 0; i < L.fan_in; ++i) acc += a[i] * S(params[row + i]);
      z[o] = acc;
    }
    const bool hidden = l + 1 < layout.size();
    a.resize(L.fan_out);
    for (std::size_t o = 0; o < L.fan_out; ++o) a[o] = hidden ? activate(spec.activation, z[o]) : z[o];
  }
  return a[0];
}

double mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input);
Jet2<double> mlp_jet(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                     std::size_t axis);


/// Network input layout is (t, x_1, ..., x_d); one jet pass per axis.
SpaceTimeDerivs spacetime_derivs(const MlpSpec& spec, const ParamVector& params, double t,
                                 std::span<const double> x);

}  // namespace qpme
