#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cascadeseg/tensor.hpp"

namespace cseg {

/// Thread-local record of executed differentiable operations. Ops append in
/// execution order, which is a topological order by construction; a backward
/// pass walks the record once in reverse.
class Tape {
 public:
  struct Node {
    std::shared_ptr<TensorNode> output;
    std::function<void()> backward;
  };

  static Tape& current();

  void record(std::shared_ptr<TensorNode> output, std::function<void()> fn) {
    nodes_.push_back(Node{std::move(output), std::move(fn)});
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates through every recorded node in
  /// reverse order. Gradients of recorded outputs are recomputed from scratch;
  /// gradients of leaves (parameters, inputs) accumulate across calls.
  void backward_from(const Tensor& loss);

 private:
  std::vector<Node> nodes_;
};

/// Whether ops currently record backward rules onto the tape.
bool grad_enabled();

/// RAII scope that disables tape recording (inference, metric evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Backpropagates from a scalar loss through the thread-local tape.
/// Rejects non-scalar tensors.
void backward(const Tensor& loss);

}  // namespace cseg
