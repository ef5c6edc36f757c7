#pragma once

// Batched network evaluation with input-space jets and a matching reverse
// pass. All channels of a block of samples are stacked as columns so every
// layer is one matrix product:
//
//   channel 0             value
//   channels 1 .. D       first derivative along input axis k = c - 1
//   channels D+1 .. 2D-1  second derivative along spatial axis (input axis c - D)
//
// Second derivatives along the time axis (input 0) are never needed by any
// formulation and are not propagated. The scalar path in mlp.hpp is the
// reference this kernel is tested against.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qpme/mlp.hpp"

namespace qpme {

enum class JetMode { Value, Full };

struct BatchJets {
  Eigen::RowVectorXd value;  // 1 x B
  Eigen::MatrixXd first;     // D x B, empty in Value mode
  Eigen::MatrixXd second;    // (D-1) x B, empty in Value mode

  void resize(JetMode mode, Eigen::Index input_dim, Eigen::Index batch);
  void set_zero();
};

class BatchJetKernel {
 public:
  BatchJetKernel(MlpSpec spec, JetMode mode);

  const MlpSpec& spec() const { return spec_; }
  JetMode mode() const { return mode_; }

  /// inputs: D x B with columns (t, x_1, ..., x_d).
  const BatchJets& forward(const ParamVector& params, const Eigen::MatrixXd& inputs);

  /// Accumulates d(sum_b <adjoint_b, out_b>)/d(params) into grad for the
  /// batch of the most recent forward call.
  void backward(const ParamVector& params, const BatchJets& adjoint, std::span<double> grad);

 private:
  Eigen::Index channels() const { return mode_ == JetMode::Full ? 2 * input_dim_ : 1; }

  MlpSpec spec_;
  JetMode mode_;
  Eigen::Index input_dim_;
  Eigen::Index batch_ = 0;
  std::vector<LayerLayout> layout_;

  Eigen::MatrixXd inputs_;
  // Per hidden layer: pre-activations (all channels), activations (all
  // channels) and g', g'', g''' evaluated at the value channel.
  std::vector<Eigen::MatrixXd> pre_;
  std::vector<Eigen::MatrixXd> post_;
  std::vector<Eigen::ArrayXXd> g1_, g2_, g3_;
  BatchJets out_;
  Eigen::MatrixXd adj_, adj_pre_;
};

}  // namespace qpme
