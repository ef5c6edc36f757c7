#include "qpme/mlp.hpp"

#include <cmath>

namespace qpme {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "softplus"; }

Activation activation_from_string(const std::string& name) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  throw ContractError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (input_dim == 0) throw ContractError("MlpSpec: input_dim must be >= 1");
  if (hidden_widths.empty()) throw ContractError("MlpSpec: at least one hidden layer is required");
  for (std::size_t w : hidden_widths)
    if (w == 0) throw ContractError("MlpSpec: hidden widths must be >= 1");
  if (activation != Activation::Softplus && activation != Activation::Tanh)
    throw ContractError("MlpSpec: activation must be twice differentiable (softplus or tanh)");
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t w : hidden_widths) {
    n += fan_in * w + w;
    fan_in = w;
  }
  return n + fan_in + 1;
}

std::vector<LayerLayout> layer_layout(const MlpSpec& spec) {
  std::vector<LayerLayout> out;
  out.reserve(spec.num_layers());
  std::size_t offset = 0;
  std::size_t fan_in = spec.input_dim;
  auto add = [&](std::size_t fan_out) {
    out.push_back({fan_in, fan_out, offset, offset + fan_in * fan_out});
    offset += fan_in * fan_out + fan_out;
    fan_in = fan_out;
  };
  for (std::size_t w : spec.hidden_widths) add(w);
  add(1);
  return out;
}

std::vector<DenseLayer> unflatten(const MlpSpec& spec, const ParamVector& params) {
  check_params(spec, params.size());
  std::vector<DenseLayer> layers;
  for (const LayerLayout& L : layer_layout(spec)) {
    DenseLayer layer;
    layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        params.data.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out),
        static_cast<Eigen::Index>(L.fan_in));
    layer.bias = Eigen::Map<const Eigen::VectorXd>(params.data.data() + L.bias_offset,
                                                   static_cast<Eigen::Index>(L.fan_out));
    layers.push_back(std::move(layer));
  }
  return layers;
}

ParamVector flatten(const MlpSpec& spec, const std::vector<DenseLayer>& layers) {
  const auto layout = layer_layout(spec);
  if (layers.size() != layout.size()) throw ContractError("flatten: layer count does not match spec");
  ParamVector out;
  out.data.resize(spec.num_params());
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const LayerLayout& L = layout[l];
    if (static_cast<std::size_t>(layers[l].weight.rows()) != L.fan_out ||
        static_cast<std::size_t>(layers[l].weight.cols()) != L.fan_in ||
        static_cast<std::size_t>(layers[l].bias.size()) != L.fan_out)
      throw ContractError("flatten: layer " + std::to_string(l) + " has the wrong shape");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.data.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out),
        static_cast<Eigen::Index>(L.fan_in)) = layers[l].weight;
    Eigen::Map<Eigen::VectorXd>(out.data.data() + L.bias_offset, static_cast<Eigen::Index>(L.fan_out)) =
        layers[l].bias;
  }
  return out;
}

ParamVector init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector p;
  p.data.assign(spec.num_params(), 0.0);
  for (const LayerLayout& L : layer_layout(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(L.fan_in + L.fan_out));
    for (std::size_t k = 0; k < L.fan_in * L.fan_out; ++k) p.data[L.weight_offset + k] = rng.uniform(-limit, limit);
  }
  return p;
}

double mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input) {
  return mlp_forward_generic<double, double>(spec, params.view(), input);
}

Jet2<double> mlp_jet(const MlpSpec& spec, const ParamVector& params, std::span<const double> input,
                     std::size_t axis) {
  return mlp_jet_generic<double, double>(spec, params.view(), input, axis);
}

SpaceTimeDerivs spacetime_derivs(const MlpSpec& spec, const ParamVector& params, double t,
                                 std::span<const double> x) {
  if (x.size() + 1 != spec.input_dim)
    throw ContractError("spacetime_derivs: x has length " + std::to_string(x.size()) + ", network expects " +
                        std::to_string(spec.input_dim - 1));
  std::vector<double> z(spec.input_dim);
  z[0] = t;
  std::copy(x.begin(), x.end(), z.begin() + 1);
  SpaceTimeDerivs out;
  const Jet2<double> jt = mlp_jet(spec, params, z, 0);
  out.u = jt.v;
  out.ut = jt.d1;
  out.grad.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Jet2<double> jk = mlp_jet(spec, params, z, k + 1);
    out.grad[k] = jk.d1;
    out.lap += jk.d2;
  }
  return out;
}

}  // namespace qpme
