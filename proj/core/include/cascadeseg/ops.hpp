#pragma once

#include "cascadeseg/autodiff.hpp"
#include "cascadeseg/rng.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

enum class Padding { same, valid };

/// Cross-correlation (no kernel flip) of an [N,C,H,W] input with an
/// [F,C,kH,kW] kernel plus per-filter bias. Kernel spatial extents must be
/// odd. "same" pads with zeros so the spatial size is preserved; "valid"
/// shrinks it by kH-1 x kW-1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              Padding padding);

/// Disjoint 2x2 window maximum; H and W must be even. The gradient flows to
/// the window argmax, first element in row-major order on ties.
Tensor max_pool_2x2(const Tensor& input);

/// Replicates each pixel into a 2x2 block. The gradient of a source pixel is
/// the sum over its 4 replicas.
Tensor upsample_nearest_2x(const Tensor& input);

/// Concatenates along the channel axis; a occupies the first channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Per-pixel softmax across the channel axis of an [N,C,H,W] tensor,
/// computed with max subtraction.
Tensor softmax_channels(const Tensor& x);

/// Inverted dropout: in training mode every element is zeroed independently
/// with probability `rate` and survivors are scaled by 1/(1-rate); the mask
/// consumes one rng draw per element in row-major order. Evaluation mode and
/// rate 0 are the identity (no rng draws).
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// Elementwise arithmetic on same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor sum(const Tensor& x);
Tensor mean_all(const Tensor& x);

}  // namespace cseg
