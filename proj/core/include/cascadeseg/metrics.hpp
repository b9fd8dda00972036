#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cascadeseg/masks.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

/// Per-pixel counts with class 1 as positive.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

double pixel_accuracy(const ConfusionCounts& counts);

/// tp / (fp + tp + fn); 1 when both masks are empty, 0 when exactly one is.
double iou(const ConfusionCounts& counts);

/// Fraction of unordered pixel pairs on which the two segmentations agree
/// about same-class vs different-class membership, via the contingency-table
/// closed form. Requires at least 2 pixels.
double rand_index(const LabelMap& s1, const LabelMap& s2);
double rand_index(const BinaryMask& s1, const BinaryMask& s2);

/// Closed form over a pooled binary contingency table of n pixels.
double rand_index(const ConfusionCounts& counts);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// Points ordered by strictly decreasing threshold, from (0,0) to (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

struct Band {
  double lo = 0.01;
  double hi = 0.99;
};

/// ROC over the pixels whose score lies strictly inside the band, pooled
/// across all samples; a pixel is predicted positive when its score exceeds
/// the threshold (strict). Thresholds are the band edges plus every distinct
/// observed score. Absent when the restricted set is empty or single-class.
std::optional<RocCurve> restricted_roc(std::span<const Tensor> probs,
                                       std::span<const BinaryMask> truths,
                                       const Band& band = {});

/// Trapezoidal area under the curve over fpr in [0,1].
double auc(const RocCurve& curve);

/// Threshold maximizing Youden's J = tpr - fpr; ties go to the larger
/// threshold.
double best_threshold(const RocCurve& curve);

struct HistogramBin {
  double lo;
  double hi;
  std::uint64_t count;
};

/// Equal-width bins over the open band; counts only in-band pixels.
std::vector<HistogramBin> probability_histogram(std::span<const Tensor> probs,
                                                const Band& band, int bins);

struct ClassMetrics {
  ConfusionCounts counts;
  double pixel_accuracy = 0.0;
  double iou = 0.0;
  double rand_index = 0.0;
};

struct MetricsReport {
  ClassMetrics liver;  // predicted label >= 1 vs truth label >= 1
  ClassMetrics tumor;  // predicted label == 2 vs truth label == 2
  std::optional<double> restricted_auc;
  std::optional<double> chosen_threshold;
};

/// How per-class metrics aggregate across a sample set: one pooled confusion
/// table over all pixels, or the mean of per-image metric values.
enum class Aggregation { pooled, per_image };

/// Table-style evaluation over aligned prediction/truth sets. Tumor
/// probability maps, when provided, must align with the predictions and feed
/// the restricted ROC (always pooled across the set). In per_image mode the
/// reported counts remain the pooled totals.
MetricsReport evaluate_model(std::span<const LabelMap> predictions,
                             std::span<const LabelMap> truths,
                             std::span<const Tensor> tumor_probs = {},
                             const Band& band = {},
                             Aggregation aggregation = Aggregation::pooled);

}  // namespace cseg
