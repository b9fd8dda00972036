#include "cascadeseg/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cseg {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Spatial extents of an [H,W] map or a [1,1,H,W] network output.
std::pair<int, int> plane_dims(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  if (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1)
    return {t.dim(2), t.dim(3)};
  throw std::invalid_argument(std::string(what) +
                              ": expected [H,W] or [1,1,H,W], got " +
                              shape_str(t.shape()));
}

Tensor lift_to_batch(const Tensor& image) {
  auto [h, w] = plane_dims(image, "lift_to_batch");
  std::vector<double> data(image.values().begin(), image.values().end());
  return Tensor::from_data({1, 1, h, w}, std::move(data));
}

Tensor to_plane(const Tensor& t, int h, int w) {
  std::vector<double> data(t.values().begin(), t.values().end());
  return Tensor::from_data({h, w}, std::move(data));
}

}  // namespace

void WindowSpec::validate() const {
  if (!(hi > lo))
    throw std::invalid_argument("WindowSpec: hi (" + std::to_string(hi) +
                                ") must exceed lo (" + std::to_string(lo) + ")");
}

void CascadeThresholds::validate() const {
  if (!(liver > 0.0 && liver < 1.0 && tumor > 0.0 && tumor < 1.0))
    throw std::invalid_argument(
        "CascadeThresholds: thresholds must lie strictly inside (0,1)");
}

MaskSet derive_masks(const LabelMap& labels) {
  MaskSet m{BinaryMask(labels.height, labels.width),
            BinaryMask(labels.height, labels.width),
            BinaryMask(labels.height, labels.width),
            BinaryMask(labels.height, labels.width)};
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
    const std::uint8_t v = labels.labels[i];
    if (v > 2)
      throw std::invalid_argument("derive_masks: label value " +
                                  std::to_string(v) + " outside {0,1,2}");
    m.liver_or_tumor.pixels[i] = v >= 1;
    m.tumor.pixels[i] = v == 2;
    m.liver_only.pixels[i] = v == 1;
    m.background.pixels[i] = v == 0;
  }
  return m;
}

Tensor window(const Tensor& image, const WindowSpec& spec) {
  spec.validate();
  std::vector<double> out(image.values().size());
  const double* in = image.values().data();
  const double inv = 1.0 / (spec.hi - spec.lo);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (std::clamp(in[i], spec.lo, spec.hi) - spec.lo) * inv;
  return Tensor::from_data(image.shape(), std::move(out));
}

BinaryMask threshold(const Tensor& prob, double t) {
  require(t > 0.0 && t < 1.0,
          "threshold: t must lie strictly inside (0,1), got " + std::to_string(t));
  auto [h, w] = plane_dims(prob, "threshold");
  BinaryMask mask(h, w);
  const double* p = prob.values().data();
  for (std::size_t i = 0; i < mask.pixel_count(); ++i)
    mask.pixels[i] = p[i] > t;
  return mask;
}

Tensor masked_input(const Tensor& image, const BinaryMask& liver_mask,
                    const WindowSpec& spec) {
  auto [h, w] = plane_dims(image, "masked_input");
  require(h == liver_mask.height && w == liver_mask.width,
          "masked_input: image " + shape_str(image.shape()) + " vs mask [" +
              std::to_string(liver_mask.height) + "x" +
              std::to_string(liver_mask.width) + "]");
  std::vector<double> data(image.values().size());
  const double* in = image.values().data();
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = liver_mask.pixels[i] ? in[i] : 0.0;
  return window(Tensor::from_data(image.shape(), std::move(data)), spec);
}

LabelMap final_classify(const BinaryMask& liver_mask, const BinaryMask& tumor_mask) {
  require(liver_mask.height == tumor_mask.height &&
              liver_mask.width == tumor_mask.width,
          "final_classify: mask sizes differ");
  LabelMap labels(liver_mask.height, liver_mask.width);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
    if (liver_mask.pixels[i])
      labels.labels[i] = tumor_mask.pixels[i] ? 2 : 1;
    else
      labels.labels[i] = 0;
  }
  return labels;
}

Tensor label_display_image(const LabelMap& labels) {
  std::vector<double> data(labels.pixel_count());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = labels.labels[i] == 2 ? 1.0 : labels.labels[i] == 1 ? 0.5 : 0.0;
  return Tensor::from_data({labels.height, labels.width}, std::move(data));
}

SequentialPrediction sequential_predict(const UNet& liver_net,
                                        const UNet& tumor_net,
                                        const Tensor& image,
                                        const CascadeThresholds& thresholds,
                                        const WindowSpec& spec) {
  require(liver_net.config().head == Head::binary_sigmoid &&
              tumor_net.config().head == Head::binary_sigmoid,
          "sequential_predict: both networks must have binary heads");
  thresholds.validate();
  auto [h, w] = plane_dims(image, "sequential_predict");

  Tensor liver_out = liver_net.forward_eval(lift_to_batch(image));
  BinaryMask liver_mask = threshold(liver_out, thresholds.liver);
  Tensor tumor_out =
      tumor_net.forward_eval(lift_to_batch(masked_input(image, liver_mask, spec)));
  BinaryMask tumor_mask = threshold(tumor_out, thresholds.tumor);
  // Intersect so tumor never escapes the liver mask, regardless of what the
  // tumor net produces on blanked pixels.
  for (std::size_t i = 0; i < tumor_mask.pixel_count(); ++i)
    tumor_mask.pixels[i] &= liver_mask.pixels[i];

  return SequentialPrediction{final_classify(liver_mask, tumor_mask),
                              to_plane(liver_out, h, w), to_plane(tumor_out, h, w)};
}

LabelMap argmax_labels(const Tensor& probs3) {
  int h = 0, w = 0;
  if (probs3.rank() == 3 && probs3.dim(0) == 3) {
    h = probs3.dim(1);
    w = probs3.dim(2);
  } else if (probs3.rank() == 4 && probs3.dim(0) == 1 && probs3.dim(1) == 3) {
    h = probs3.dim(2);
    w = probs3.dim(3);
  } else {
    throw std::invalid_argument("argmax_labels: expected [3,H,W], got " +
                                shape_str(probs3.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double* p = probs3.values().data();
  LabelMap labels(h, w);
  for (std::size_t i = 0; i < plane; ++i) {
    // Scan labels 0,1,2 (channels other=2, liver=1, tumor=0); strict >
    // keeps the lowest label on exact ties.
    int best_label = 0;
    double best = p[2 * plane + i];
    if (p[plane + i] > best) {
      best = p[plane + i];
      best_label = 1;
    }
    if (p[i] > best) best_label = 2;
    labels.labels[i] = static_cast<std::uint8_t>(best_label);
  }
  return labels;
}

OneStepPrediction one_step_predict(const UNet& net, const Tensor& image) {
  require(net.config().head == Head::softmax3,
          "one_step_predict: network must have a softmax3 head");
  auto [h, w] = plane_dims(image, "one_step_predict");
  Tensor out = net.forward_eval(lift_to_batch(image));  // [1,3,H,W]
  std::vector<double> probs(out.values().begin(), out.values().end());
  return OneStepPrediction{argmax_labels(out),
                           Tensor::from_data({3, h, w}, std::move(probs))};
}

}  // namespace cseg
