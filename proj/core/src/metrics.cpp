#include "cascadeseg/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "cascadeseg/pipeline.hpp"

namespace cseg {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double pairs2(double n) { return n * (n - 1.0) / 2.0; }

// Agreeing pairs = C(n,2) + 2*sum C(n_ij,2) - sum C(a_i,2) - sum C(b_j,2).
double rand_from_contingency(const double* cells, const double* row_sums,
                             const double* col_sums, int rows, int cols,
                             double n) {
  if (n < 2.0)
    throw std::invalid_argument("rand_index: needs at least 2 pixels");
  double together_both = 0.0;
  for (int i = 0; i < rows * cols; ++i) together_both += pairs2(cells[i]);
  double together_a = 0.0, together_b = 0.0;
  for (int i = 0; i < rows; ++i) together_a += pairs2(row_sums[i]);
  for (int j = 0; j < cols; ++j) together_b += pairs2(col_sums[j]);
  const double all = pairs2(n);
  return (all + 2.0 * together_both - together_a - together_b) / all;
}

}  // namespace

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  require(pred.height == truth.height && pred.width == truth.width,
          "confusion: mask sizes differ ([" + std::to_string(pred.height) + "x" +
              std::to_string(pred.width) + "] vs [" +
              std::to_string(truth.height) + "x" + std::to_string(truth.width) +
              "])");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (truth.pixels[i])
      pred.pixels[i] ? ++c.tp : ++c.fn;
    else
      pred.pixels[i] ? ++c.fp : ++c.tn;
  }
  return c;
}

double pixel_accuracy(const ConfusionCounts& counts) {
  const std::uint64_t total = counts.total();
  if (total == 0) return 1.0;
  return static_cast<double>(counts.tp + counts.tn) / static_cast<double>(total);
}

double iou(const ConfusionCounts& counts) {
  const std::uint64_t denom = counts.tp + counts.fp + counts.fn;
  if (denom == 0) return 1.0;  // both masks empty
  return static_cast<double>(counts.tp) / static_cast<double>(denom);
}

double rand_index(const LabelMap& s1, const LabelMap& s2) {
  require(s1.height == s2.height && s1.width == s2.width,
          "rand_index: map sizes differ");
  double cells[9] = {0};
  double rows[3] = {0}, cols[3] = {0};
  for (std::size_t i = 0; i < s1.pixel_count(); ++i) {
    const int a = s1.labels[i], b = s2.labels[i];
    require(a <= 2 && b <= 2, "rand_index: label outside {0,1,2}");
    cells[a * 3 + b] += 1.0;
    rows[a] += 1.0;
    cols[b] += 1.0;
  }
  return rand_from_contingency(cells, rows, cols, 3, 3,
                               static_cast<double>(s1.pixel_count()));
}

double rand_index(const BinaryMask& s1, const BinaryMask& s2) {
  return rand_index(confusion(s2, s1));
}

double rand_index(const ConfusionCounts& counts) {
  const double cells[4] = {
      static_cast<double>(counts.tn), static_cast<double>(counts.fp),
      static_cast<double>(counts.fn), static_cast<double>(counts.tp)};
  const double rows[2] = {cells[0] + cells[1], cells[2] + cells[3]};
  const double cols[2] = {cells[0] + cells[2], cells[1] + cells[3]};
  return rand_from_contingency(cells, rows, cols, 2, 2,
                               static_cast<double>(counts.total()));
}

std::optional<RocCurve> restricted_roc(std::span<const Tensor> probs,
                                       std::span<const BinaryMask> truths,
                                       const Band& band) {
  require(probs.size() == truths.size(),
          "restricted_roc: " + std::to_string(probs.size()) + " score maps vs " +
              std::to_string(truths.size()) + " truth masks");
  require(band.lo < band.hi, "restricted_roc: band lo must be below hi");

  // (score, is_positive) for every strictly in-band pixel, pooled.
  std::vector<std::pair<double, bool>> scored;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const std::size_t n = truths[k].pixel_count();
    require(static_cast<std::size_t>(probs[k].numel()) == n,
            "restricted_roc: sample " + std::to_string(k) + " size mismatch");
    const double* p = probs[k].values().data();
    for (std::size_t i = 0; i < n; ++i)
      if (p[i] > band.lo && p[i] < band.hi)
        scored.emplace_back(p[i], truths[k].pixels[i] != 0);
  }
  if (scored.empty()) return std::nullopt;

  std::uint64_t positives = 0;
  for (const auto& [s, pos] : scored) positives += pos;
  const std::uint64_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({band.hi, 0.0, 0.0});
  const double p_total = static_cast<double>(positives);
  const double n_total = static_cast<double>(negatives);
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < scored.size()) {
    const double t = scored[i].first;
    // Positives at threshold t are the scores strictly above it, i.e. the
    // runs consumed so far; the run at t itself is consumed afterwards.
    curve.points.push_back({t, static_cast<double>(fp) / n_total,
                            static_cast<double>(tp) / p_total});
    while (i < scored.size() && scored[i].first == t) {
      scored[i].second ? ++tp : ++fp;
      ++i;
    }
  }
  curve.points.push_back({band.lo, 1.0, 1.0});
  return curve;
}

double auc(const RocCurve& curve) {
  require(!curve.points.empty(), "auc: empty curve");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double best_threshold(const RocCurve& curve) {
  require(!curve.points.empty(), "best_threshold: empty curve");
  double best_j = curve.points[0].tpr - curve.points[0].fpr;
  double best_t = curve.points[0].threshold;
  for (const RocPoint& p : curve.points) {
    const double j = p.tpr - p.fpr;
    if (j > best_j) {  // strict: ties keep the earlier, larger threshold
      best_j = j;
      best_t = p.threshold;
    }
  }
  return best_t;
}

std::vector<HistogramBin> probability_histogram(std::span<const Tensor> probs,
                                                const Band& band, int bins) {
  require(bins >= 1, "probability_histogram: bins must be >= 1");
  require(band.lo < band.hi, "probability_histogram: band lo must be below hi");
  const double width = (band.hi - band.lo) / bins;
  std::vector<HistogramBin> hist;
  hist.reserve(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b)
    hist.push_back({band.lo + b * width, band.lo + (b + 1) * width, 0});
  for (const Tensor& t : probs) {
    for (double p : t.values()) {
      if (p <= band.lo || p >= band.hi) continue;
      const int b = std::min(bins - 1, static_cast<int>((p - band.lo) / width));
      ++hist[static_cast<std::size_t>(b)].count;
    }
  }
  return hist;
}

MetricsReport evaluate_model(std::span<const LabelMap> predictions,
                             std::span<const LabelMap> truths,
                             std::span<const Tensor> tumor_probs,
                             const Band& band, Aggregation aggregation) {
  require(predictions.size() == truths.size(),
          "evaluate_model: " + std::to_string(predictions.size()) +
              " predictions vs " + std::to_string(truths.size()) + " truths");
  require(!predictions.empty(), "evaluate_model: empty set");
  require(tumor_probs.empty() || tumor_probs.size() == predictions.size(),
          "evaluate_model: tumor probability count mismatch");

  ConfusionCounts liver_counts, tumor_counts;
  struct Sums {
    double acc = 0, iou_v = 0, ri = 0;
  } liver_sums, tumor_sums;
  std::vector<BinaryMask> tumor_truth_masks;
  tumor_truth_masks.reserve(truths.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    require(predictions[k].height == truths[k].height &&
                predictions[k].width == truths[k].width,
            "evaluate_model: sample " + std::to_string(k) + " size mismatch");
    const MaskSet pred = derive_masks(predictions[k]);
    const MaskSet truth = derive_masks(truths[k]);
    const ConfusionCounts lc = confusion(pred.liver_or_tumor, truth.liver_or_tumor);
    const ConfusionCounts tc = confusion(pred.tumor, truth.tumor);
    liver_counts += lc;
    tumor_counts += tc;
    if (aggregation == Aggregation::per_image) {
      liver_sums.acc += pixel_accuracy(lc);
      liver_sums.iou_v += iou(lc);
      liver_sums.ri += rand_index(lc);
      tumor_sums.acc += pixel_accuracy(tc);
      tumor_sums.iou_v += iou(tc);
      tumor_sums.ri += rand_index(tc);
    }
    tumor_truth_masks.push_back(truth.tumor);
  }

  MetricsReport report;
  if (aggregation == Aggregation::pooled) {
    report.liver = ClassMetrics{liver_counts, pixel_accuracy(liver_counts),
                                iou(liver_counts), rand_index(liver_counts)};
    report.tumor = ClassMetrics{tumor_counts, pixel_accuracy(tumor_counts),
                                iou(tumor_counts), rand_index(tumor_counts)};
  } else {
    const double n = static_cast<double>(predictions.size());
    report.liver = ClassMetrics{liver_counts, liver_sums.acc / n,
                                liver_sums.iou_v / n, liver_sums.ri / n};
    report.tumor = ClassMetrics{tumor_counts, tumor_sums.acc / n,
                                tumor_sums.iou_v / n, tumor_sums.ri / n};
  }
  if (!tumor_probs.empty()) {
    auto curve = restricted_roc(tumor_probs, tumor_truth_masks, band);
    if (curve) {
      report.restricted_auc = auc(*curve);
      report.chosen_threshold = best_threshold(*curve);
    }
  }
  return report;
}

}  // namespace cseg
