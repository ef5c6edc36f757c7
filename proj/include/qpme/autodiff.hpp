#pragma once

// Parameter gradients of scalars built from network values and input jets.
// The loss is evaluated once with every parameter as a tape leaf; jets over
// Var record their own arithmetic, so derivatives of input derivatives come
// out of the same reverse sweep.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qpme/errors.hpp"
#include "qpme/jet.hpp"
#include "qpme/mlp.hpp"
#include "qpme/tape.hpp"

namespace qpme {

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> grad;
};

/// loss_eval: callable taking std::span<const Var> and returning Var.
template <class F>
ValueAndGradient param_gradient(F&& loss_eval, const ParamVector& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (double p : params.data) leaves.push_back(Var::leaf(tape, p));
  const Var loss = loss_eval(std::span<const Var>(leaves));
  if (!std::isfinite(loss.val)) throw NonFiniteError("param_gradient: loss is " + std::to_string(loss.val));
  ValueAndGradient out{loss.val, std::vector<double>(params.size(), 0.0)};
  if (loss.is_constant()) return out;
  tape.backward(loss.idx);
  for (std::size_t i = 0; i < leaves.size(); ++i) out.grad[i] = tape.adjoint(leaves[i].idx);
  return out;
}

}  // namespace qpme
