#include "cascadeseg/optim.hpp"

#include <stdexcept>

namespace cseg {

void sgd_momentum_step(std::span<double> weights, std::span<const double> grads,
                       std::span<double> velocity, double lr, double momentum) {
  if (weights.size() != grads.size() || weights.size() != velocity.size())
    throw std::invalid_argument(
        "sgd_momentum_step: mismatched lengths (weights " +
        std::to_string(weights.size()) + ", grads " + std::to_string(grads.size()) +
        ", velocity " + std::to_string(velocity.size()) + ")");
  if (lr < 0.0)
    throw std::invalid_argument("sgd_momentum_step: lr must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("sgd_momentum_step: momentum must be in [0,1)");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    weights[i] -= lr * velocity[i];
  }
}

void SgdMomentum::step(NetworkParams& params, double lr) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& p : params)
      velocity_.emplace_back(p.tensor.values().size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    sgd_momentum_step(t.values(), t.grad(), velocity_[i], lr, momentum_);
  }
}

void SgdMomentum::reset() { velocity_.clear(); }

}  // namespace cseg
