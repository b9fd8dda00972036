#pragma once

#include <span>
#include <string>
#include <vector>

#include "cascadeseg/tensor.hpp"

namespace cseg {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered parameter collection; iteration order is stable across runs.
using NetworkParams = std::vector<NamedTensor>;

/// One SGD-with-momentum update: v <- momentum*v + g, w <- w - lr*v.
/// All three spans must have equal length.
void sgd_momentum_step(std::span<double> weights, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum);

/// Momentum optimizer over a parameter collection; reads gradients off the
/// tensors themselves. Velocity is keyed by position, so the parameter list
/// must not be reordered between steps.
class SgdMomentum {
 public:
  SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  void step(NetworkParams& params, double lr);
  void reset();

  double momentum() const { return momentum_; }

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace cseg
