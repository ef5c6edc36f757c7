#pragma once

#include <vector>

namespace qpme {

/// Value, time derivative, spatial gradient and spatial Laplacian at (t, x).
template <class S>
struct SpaceTimeDerivsT {
  S u{};
  S ut{};
  std::vector<S> grad;
  S lap{};
};
using SpaceTimeDerivs = SpaceTimeDerivsT<double>;

/// du/dt - 1/2 lap(u^2) = du/dt - |grad u|^2 - u lap(u).
template <class S>
S qpme_residual(const SpaceTimeDerivsT<S>& d) {
  S grad_sq{};
  for (const S& g : d.grad) grad_sq += g * g;
  return d.ut - grad_sq - d.u * d.lap;
}

}  // namespace qpme
