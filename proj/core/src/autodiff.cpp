#include "cascadeseg/autodiff.hpp"

#include <stdexcept>

namespace cseg {

namespace {
thread_local Tape t_tape;
thread_local bool t_grad_enabled = true;
}  // namespace

Tape& Tape::current() { return t_tape; }

void Tape::backward_from(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_str(loss.shape()));
  // Recorded outputs get fresh gradients each pass; leaf gradients accumulate.
  for (auto& n : nodes_) {
    n.output->grad.assign(n.output->value.size(), 0.0);
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Tensor& loss) { Tape::current().backward_from(loss); }

}  // namespace cseg
