#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cascadeseg/masks.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

/// Probabilities are clamped to [kLossEps, 1-kLossEps] before any log.
inline constexpr double kLossEps = 1e-7;

struct ClassWeights {
  double tumor = 1.0;
  double liver = 1.0;
  double other = 1.0;
};

/// How the per-sample balanced weight enters the binary loss. The background
/// term of the loss is weighted by alpha:
///   inverse_frequency  — alpha = foreground fraction (background weighted low)
///   literal_background — alpha = background fraction
enum class BalancedWeighting { inverse_frequency, literal_background };

/// Unweighted binary cross-entropy, mean over all elements.
Tensor binary_cross_entropy(const Tensor& pred, const Tensor& target);

/// Weighted binary cross-entropy:
///   -(1/M) * sum[ alpha * (1-t) * log(1-p) + (1-alpha) * t * log(p) ]
/// alpha weights the background term, (1-alpha) the foreground term.
Tensor weighted_bce(const Tensor& pred, const Tensor& target, double alpha);

/// Batched variant with one alpha per sample of an [N,1,H,W] pair.
Tensor weighted_bce(const Tensor& pred, const Tensor& target,
                    std::span<const double> per_sample_alpha);

/// Balanced weight of a binary target: 1 - |foreground| / |pixels|.
double balanced_alpha(const BinaryMask& target);

/// The alpha actually fed to weighted_bce in balanced mode, clamped to
/// [kLossEps, 1-kLossEps] so degenerate all-0/all-1 targets keep a gradient.
double training_alpha(const BinaryMask& target, BalancedWeighting mode);

/// Per-class balanced weights w_c = 1 - |class c| / |pixels| for the
/// (tumor, liver, other) partition. The three weights sum to 2.
ClassWeights balanced_class_weights(const BinaryMask& tumor,
                                    const BinaryMask& liver,
                                    const BinaryMask& other);

/// Categorical cross-entropy of [N,3,H,W] probabilities against a one-hot
/// [N,3,H,W] target (channel order tumor, liver, other):
///   -(1/M) * sum_pixels sum_c w_c * onehot_c * log(p_c)
/// The target must partition the image: exactly one 1 per pixel.
Tensor categorical_cross_entropy(const Tensor& pred, const Tensor& onehot,
                                 const std::optional<ClassWeights>& weights = {});

/// Batched variant with one weight triple per sample.
Tensor categorical_cross_entropy(const Tensor& pred, const Tensor& onehot,
                                 std::span<const ClassWeights> per_sample);

/// Joint two-network objective over N samples:
///   c/N * sum BCE(liver_out_k, A_k) + (1-c)/N * sum BCE(tumor_out_k, M_k*B_k)
/// Evaluation only; tumor_out is expected to come from the masked inputs.
double joint_loss(const Tensor& liver_out, const Tensor& tumor_out,
                  std::span<const BinaryMask> liver_truth,
                  std::span<const BinaryMask> tumor_truth,
                  std::span<const BinaryMask> liver_mask, double c);

}  // namespace cseg
