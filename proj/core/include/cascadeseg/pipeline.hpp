#pragma once

#include "cascadeseg/masks.hpp"
#include "cascadeseg/tensor.hpp"
#include "cascadeseg/unet.hpp"

namespace cseg {

struct WindowSpec {
  double lo = 0.0;
  double hi = 1.0;
  void validate() const;
};

struct CascadeThresholds {
  double liver = 0.5;  // t_a
  double tumor = 0.5;  // t_b
  void validate() const;
};

/// Binary masks derived from a label map. tumor/liver_only/background
/// partition the image; liver_or_tumor = liver_only OR tumor.
struct MaskSet {
  BinaryMask liver_or_tumor;  // label >= 1
  BinaryMask tumor;           // label == 2
  BinaryMask liver_only;      // label == 1
  BinaryMask background;      // label == 0
};

MaskSet derive_masks(const LabelMap& labels);

/// Clamps to [lo, hi] and rescales affinely to [0,1].
Tensor window(const Tensor& image, const WindowSpec& spec);

/// pixel = 1 iff probability > t (strict). t must be strictly inside (0,1).
/// Accepts an [H,W] map or an [1,1,H,W] network output.
BinaryMask threshold(const Tensor& prob, double t);

/// Elementwise mask product followed by windowing; pixels outside the mask
/// become window(0).
Tensor masked_input(const Tensor& image, const BinaryMask& liver_mask,
                    const WindowSpec& spec);

/// Label 2 where liver and tumor masks are both set, 1 where only the liver
/// mask is set, 0 otherwise (including tumor outside the liver mask).
LabelMap final_classify(const BinaryMask& liver_mask, const BinaryMask& tumor_mask);

/// Label map rendered as an image with tumor 1.0, liver 0.5, background 0.0.
Tensor label_display_image(const LabelMap& labels);

struct SequentialPrediction {
  LabelMap labels;
  Tensor liver_prob;  // [H,W]
  Tensor tumor_prob;  // [H,W]
};

/// Full cascade on one [H,W] image: liver net -> threshold -> masked, windowed
/// input -> tumor net -> threshold, intersected with the liver mask.
SequentialPrediction sequential_predict(const UNet& liver_net,
                                        const UNet& tumor_net,
                                        const Tensor& image,
                                        const CascadeThresholds& thresholds,
                                        const WindowSpec& spec);

struct OneStepPrediction {
  LabelMap labels;
  Tensor probs;  // [3,H,W], channel order (tumor, liver, other)
};

/// Per-pixel argmax of a [3,H,W] (or [1,3,H,W]) probability stack, channels
/// (tumor, liver, other) mapping to labels (2, 1, 0); exact ties go to the
/// lower label.
LabelMap argmax_labels(const Tensor& probs3);

/// One-step classification through the 3-way softmax head.
OneStepPrediction one_step_predict(const UNet& net, const Tensor& image);

}  // namespace cseg
