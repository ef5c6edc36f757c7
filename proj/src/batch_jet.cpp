#include "qpme/batch_jet.hpp"

#include <cmath>

namespace qpme {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> weights(const ParamVector& p, const LayerLayout& L) {
  return {p.data.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out),
          static_cast<Eigen::Index>(L.fan_in)};
}

Eigen::Map<const Eigen::VectorXd> biases(const ParamVector& p, const LayerLayout& L) {
  return {p.data.data() + L.bias_offset, static_cast<Eigen::Index>(L.fan_out)};
}

// g and its first three derivatives at z, elementwise.
void activation_table(Activation act, const Eigen::MatrixXd& z, Eigen::MatrixXd& g0, Eigen::ArrayXXd& g1,
                      Eigen::ArrayXXd& g2, Eigen::ArrayXXd& g3) {
  g0.resize(z.rows(), z.cols());
  g1.resize(z.rows(), z.cols());
  g2.resize(z.rows(), z.cols());
  g3.resize(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const double v = z(r, c);
      if (act == Activation::Tanh) {
        const double th = std::tanh(v);
        const double s = 1.0 - th * th;
        g0(r, c) = th;
        g1(r, c) = s;
        g2(r, c) = -2.0 * th * s;
        g3(r, c) = (6.0 * th * th - 2.0) * s;
      } else {
        const double s = sigmoid(v);
        const double ds = s * (1.0 - s);
        g0(r, c) = softplus(v);
        g1(r, c) = s;
        g2(r, c) = ds;
        g3(r, c) = ds * (1.0 - 2.0 * s);
      }
    }
  }
}

}  // namespace

void BatchJets::resize(JetMode mode, Eigen::Index input_dim, Eigen::Index batch) {
  value.resize(batch);
  if (mode == JetMode::Full) {
    first.resize(input_dim, batch);
    second.resize(input_dim - 1, batch);
  } else {
    first.resize(0, batch);
    second.resize(0, batch);
  }
}

void BatchJets::set_zero() {
  value.setZero();
  first.setZero();
  second.setZero();
}

BatchJetKernel::BatchJetKernel(MlpSpec spec, JetMode mode)
    : spec_(std::move(spec)), mode_(mode), input_dim_(static_cast<Eigen::Index>(spec_.input_dim)) {
  spec_.validate();
  layout_ = layer_layout(spec_);
  const std::size_t hidden = layout_.size() - 1;
  pre_.resize(hidden);
  post_.resize(hidden);
  g1_.resize(hidden);
  g2_.resize(hidden);
  g3_.resize(hidden);
}

const BatchJets& BatchJetKernel::forward(const ParamVector& params, const Eigen::MatrixXd& inputs) {
  check_params(spec_, params.size());
  if (inputs.rows() != input_dim_)
    throw ContractError("BatchJetKernel: inputs have " + std::to_string(inputs.rows()) + " rows, expected " +
                        std::to_string(input_dim_));
  const Eigen::Index B = inputs.cols();
  const Eigen::Index C = channels();
  const Eigen::Index D = input_dim_;
  batch_ = B;
  inputs_ = inputs;

  for (std::size_t l = 0; l + 1 < layout_.size(); ++l) {
    const LayerLayout& L = layout_[l];
    const auto W = weights(params, L);
    const auto b = biases(params, L);
    const Eigen::Index out = static_cast<Eigen::Index>(L.fan_out);
    Eigen::MatrixXd& Z = pre_[l];
    Z.resize(out, C * B);
    if (l == 0) {
      Z.leftCols(B).noalias() = W * inputs;
      if (mode_ == JetMode::Full) {
        for (Eigen::Index k = 0; k < D; ++k) Z.middleCols((1 + k) * B, B).colwise() = W.col(k);
        Z.rightCols((D - 1) * B).setZero();
      }
    } else {
      Z.noalias() = W * post_[l - 1];
    }
    Z.leftCols(B).colwise() += b;

    Eigen::MatrixXd g0;
    const Eigen::MatrixXd zv = Z.leftCols(B);
    activation_table(spec_.activation, zv, g0, g1_[l], g2_[l], g3_[l]);
    Eigen::MatrixXd& A = post_[l];
    A.resize(out, C * B);
    A.leftCols(B) = g0;
    if (mode_ == JetMode::Full) {
      for (Eigen::Index k = 0; k < D; ++k)
        A.middleCols((1 + k) * B, B) = (g1_[l] * Z.middleCols((1 + k) * B, B).array()).matrix();
      for (Eigen::Index j = 0; j + 1 < D; ++j) {
        const auto zf = Z.middleCols((2 + j) * B, B).array();  // first derivative along axis j + 1
        const auto zs = Z.middleCols((1 + D + j) * B, B).array();
        A.middleCols((1 + D + j) * B, B) = (g2_[l] * zf.square() + g1_[l] * zs).matrix();
      }
    }
  }

  const LayerLayout& L = layout_.back();
  const auto w = weights(params, L);
  const double b = params.data[L.bias_offset];
  const Eigen::RowVectorXd y = w * post_.back();
  out_.resize(mode_, D, B);
  out_.value = y.leftCols(B).array() + b;
  if (mode_ == JetMode::Full) {
    for (Eigen::Index k = 0; k < D; ++k) out_.first.row(k) = y.segment((1 + k) * B, B);
    for (Eigen::Index j = 0; j + 1 < D; ++j) out_.second.row(j) = y.segment((1 + D + j) * B, B);
  }
  return out_;
}

void BatchJetKernel::backward(const ParamVector& params, const BatchJets& adjoint, std::span<double> grad) {
  check_params(spec_, grad.size());
  const Eigen::Index B = batch_;
  const Eigen::Index C = channels();
  const Eigen::Index D = input_dim_;
  if (adjoint.value.size() != B) throw ContractError("BatchJetKernel::backward: adjoint batch size mismatch");

  // Output layer.
  Eigen::RowVectorXd ybar(C * B);
  ybar.leftCols(B) = adjoint.value;
  if (mode_ == JetMode::Full) {
    for (Eigen::Index k = 0; k < D; ++k) ybar.segment((1 + k) * B, B) = adjoint.first.row(k);
    for (Eigen::Index j = 0; j + 1 < D; ++j) ybar.segment((1 + D + j) * B, B) = adjoint.second.row(j);
  }
  {
    const LayerLayout& L = layout_.back();
    Eigen::Map<Eigen::RowVectorXd> gw(grad.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_in));
    gw.noalias() += ybar * post_.back().transpose();
    grad[L.bias_offset] += adjoint.value.sum();
    const auto w = weights(params, L);
    adj_.noalias() = w.transpose() * ybar;
  }

  for (std::size_t li = layout_.size() - 1; li-- > 0;) {
    const LayerLayout& L = layout_[li];
    const Eigen::MatrixXd& Z = pre_[li];
    const Eigen::Index out = static_cast<Eigen::Index>(L.fan_out);
    adj_pre_.resize(out, C * B);

    // Value channel collects contributions from every channel through g', g'', g'''.
    Eigen::ArrayXXd zbar_v = adj_.leftCols(B).array() * g1_[li];
    if (mode_ == JetMode::Full) {
      for (Eigen::Index k = 0; k < D; ++k) {
        const auto zf = Z.middleCols((1 + k) * B, B).array();
        const auto af = adj_.middleCols((1 + k) * B, B).array();
        zbar_v += af * g2_[li] * zf;
        Eigen::ArrayXXd zbar_f = af * g1_[li];
        if (k >= 1) {
          const auto as = adj_.middleCols((D + k) * B, B).array();  // second derivative along axis k
          zbar_f += 2.0 * as * g2_[li] * zf;
        }
        adj_pre_.middleCols((1 + k) * B, B) = zbar_f.matrix();
      }
      for (Eigen::Index j = 0; j + 1 < D; ++j) {
        const auto zf = Z.middleCols((2 + j) * B, B).array();
        const auto zs = Z.middleCols((1 + D + j) * B, B).array();
        const auto as = adj_.middleCols((1 + D + j) * B, B).array();
        zbar_v += as * (g3_[li] * zf.square() + g2_[li] * zs);
        adj_pre_.middleCols((1 + D + j) * B, B) = (as * g1_[li]).matrix();
      }
    }
    adj_pre_.leftCols(B) = zbar_v.matrix();

    Eigen::Map<RowMajor> gW(grad.data() + L.weight_offset, out, static_cast<Eigen::Index>(L.fan_in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + L.bias_offset, out);
    gb += adj_pre_.leftCols(B).rowwise().sum();
    if (li == 0) {
      gW.noalias() += adj_pre_.leftCols(B) * inputs_.transpose();
      if (mode_ == JetMode::Full) {
        // First-derivative channels see the constant unit input e_k; second-order inputs are zero.
        for (Eigen::Index k = 0; k < D; ++k) gW.col(k) += adj_pre_.middleCols((1 + k) * B, B).rowwise().sum();
      }
    } else {
      gW.noalias() += adj_pre_ * post_[li - 1].transpose();
      const auto W = weights(params, L);
      adj_.noalias() = W.transpose() * adj_pre_;
    }
  }
}

}  // namespace qpme
