#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cascadeseg/metrics.hpp"
#include "cascadeseg/pipeline.hpp"
#include "test_util.hpp"

using namespace cseg;
using namespace cseg::test;

namespace {

// O(n^2) pair enumeration, the defining form of the Rand index.
double rand_index_pairs(const std::vector<int>& s1, const std::vector<int>& s2) {
  const std::size_t n = s1.size();
  std::uint64_t agree = 0, total = 0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      const bool same1 = s1[j] == s1[k];
      const bool same2 = s2[j] == s2[k];
      agree += same1 == same2;
      ++total;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// Exhaustive threshold sweep over the restricted pixel set.
std::optional<RocCurve> roc_sweep_oracle(std::span<const Tensor> probs,
                                         std::span<const BinaryMask> truths,
                                         const Band& band) {
  std::vector<std::pair<double, bool>> scored;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double* p = probs[k].values().data();
    for (std::size_t i = 0; i < truths[k].pixel_count(); ++i)
      if (p[i] > band.lo && p[i] < band.hi)
        scored.emplace_back(p[i], truths[k].pixels[i] != 0);
  }
  if (scored.empty()) return std::nullopt;
  std::uint64_t pos = 0;
  for (const auto& [s, y] : scored) pos += y;
  if (pos == 0 || pos == scored.size()) return std::nullopt;
  const std::uint64_t neg = scored.size() - pos;

  std::set<double, std::greater<>> thresholds{band.hi, band.lo};
  for (const auto& [s, y] : scored) thresholds.insert(s);

  RocCurve curve;
  for (double t : thresholds) {
    std::uint64_t tp = 0, fp = 0;
    for (const auto& [s, y] : scored)
      if (s > t) y ? ++tp : ++fp;
    curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return curve;
}

BinaryMask mask_of(int h, int w, std::initializer_list<int> ones) {
  BinaryMask m(h, w);
  for (int i : ones) m.pixels[static_cast<std::size_t>(i)] = 1;
  return m;
}

}  // namespace

TEST_CASE("confusion counts") {
  BinaryMask ones(2, 3);
  for (auto& p : ones.pixels) p = 1;
  const ConfusionCounts all = confusion(ones, ones);
  CHECK(all.tp == 6);
  CHECK(all.fp + all.fn + all.tn == 0);

  BinaryMask inverted(2, 3);
  const ConfusionCounts flipped = confusion(inverted, ones);
  CHECK(flipped.tp == 0);
  CHECK(flipped.tn == 0);
  CHECK(flipped.fn == 6);

  Rng rng(3);
  BinaryMask pred(8, 8), truth(8, 8);
  for (auto& p : pred.pixels) p = rng.uniform() < 0.5;
  for (auto& p : truth.pixels) p = rng.uniform() < 0.5;
  const ConfusionCounts c = confusion(pred, truth);
  ConfusionCounts want;
  for (std::size_t i = 0; i < 64; ++i) {
    if (truth.pixels[i] && pred.pixels[i]) ++want.tp;
    if (!truth.pixels[i] && pred.pixels[i]) ++want.fp;
    if (truth.pixels[i] && !pred.pixels[i]) ++want.fn;
    if (!truth.pixels[i] && !pred.pixels[i]) ++want.tn;
  }
  CHECK(c.tp == want.tp);
  CHECK(c.fp == want.fp);
  CHECK(c.fn == want.fn);
  CHECK(c.tn == want.tn);
  CHECK(c.total() == 64);

  CHECK_THROWS_AS(confusion(pred, BinaryMask(4, 4)), std::invalid_argument);
}

TEST_CASE("pixel accuracy and IoU") {
  BinaryMask a = mask_of(2, 4, {0, 1, 2, 3});
  CHECK(pixel_accuracy(confusion(a, a)) == 1.0);
  CHECK(iou(confusion(a, a)) == 1.0);

  BinaryMask b = mask_of(2, 4, {4, 5});
  CHECK(iou(confusion(a, b)) == 0.0);

  // pred 4 px, truth 2 px, overlap 2 -> tp=2, fp=2, fn=0 -> IoU 0.5.
  BinaryMask truth = mask_of(2, 4, {0, 1});
  const ConfusionCounts c = confusion(a, truth);
  CHECK(c.tp == 2);
  CHECK(c.fp == 2);
  CHECK(c.fn == 0);
  CHECK(iou(c) == 0.5);

  // Empty-mask conventions.
  BinaryMask empty(2, 4);
  CHECK(iou(confusion(empty, empty)) == 1.0);
  CHECK(iou(confusion(a, empty)) == 0.0);
  CHECK(iou(confusion(empty, a)) == 0.0);
}

TEST_CASE("IoU range and identity property") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask p(6, 6), t(6, 6);
    for (auto& v : p.pixels) v = rng.uniform() < 0.4;
    for (auto& v : t.pixels) v = rng.uniform() < 0.4;
    const double v = iou(confusion(p, t));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (t.count_ones() > 0)
      CHECK((v == 1.0) == (p == t));
  }
}

TEST_CASE("rand index closed form and examples") {
  LabelMap same(3, 3);
  Rng rng(7);
  for (auto& v : same.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
  CHECK(rand_index(same, same) == 1.0);

  // 4 pixels: s1 one class, s2 split 2+2 -> 2 of 6 pairs agree.
  LabelMap s1(2, 2), s2(2, 2);
  s2.labels = {1, 1, 0, 0};
  CHECK(rand_index(s1, s2) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  // Relabeling leaves the value unchanged.
  LabelMap a(3, 4), b(3, 4), b_swapped(3, 4);
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    a.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    b.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    b_swapped.labels[i] = b.labels[i] == 1 ? 2 : b.labels[i] == 2 ? 1 : 0;
  }
  CHECK(rand_index(a, b) == doctest::Approx(rand_index(a, b_swapped)).epsilon(1e-15));

  LabelMap tiny(1, 1);
  CHECK_THROWS_AS(rand_index(tiny, tiny), std::invalid_argument);
}

TEST_CASE("rand index equals pair enumeration on 200 random maps") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = rng.uniform_int(2, 12), w = rng.uniform_int(1, 12);
    if (h * w < 2) continue;
    LabelMap s1(h, w), s2(h, w);
    std::vector<int> v1, v2;
    for (std::size_t i = 0; i < s1.pixel_count(); ++i) {
      s1.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
      s2.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
      v1.push_back(s1.labels[i]);
      v2.push_back(s2.labels[i]);
    }
    CHECK(rand_index(s1, s2) == rand_index_pairs(v1, v2));

    // Binary overload against the same oracle.
    BinaryMask m1(h, w), m2(h, w);
    std::vector<int> b1, b2;
    for (std::size_t i = 0; i < m1.pixel_count(); ++i) {
      m1.pixels[i] = rng.uniform() < 0.5;
      m2.pixels[i] = rng.uniform() < 0.5;
      b1.push_back(m1.pixels[i]);
      b2.push_back(m2.pixels[i]);
    }
    CHECK(rand_index(m1, m2) == rand_index_pairs(b1, b2));
  }
}

TEST_CASE("restricted roc: restriction rule and degenerate sets") {
  // Every probability outside the band: no curve.
  Tensor probs = Tensor::from_data({2, 2}, {0.001, 0.999, 1.0, 0.0});
  BinaryMask truth = mask_of(2, 2, {0, 1});
  CHECK(!restricted_roc({&probs, 1}, {&truth, 1}).has_value());

  // Single-class restricted set: undefined.
  Tensor mid = Tensor::from_data({2, 2}, {0.5, 0.6, 0.999, 0.999});
  BinaryMask all_pos(2, 2);
  all_pos.pixels = {1, 1, 1, 1};
  CHECK(!restricted_roc({&mid, 1}, {&all_pos, 1}).has_value());
}

TEST_CASE("restricted roc: perfect separation and constant scores") {
  Tensor probs = Tensor::from_data({2, 3}, {0.8, 0.85, 0.9, 0.2, 0.1, 0.3});
  BinaryMask truth = mask_of(2, 3, {0, 1, 2});
  const auto curve = restricted_roc({&probs, 1}, {&truth, 1});
  REQUIRE(curve.has_value());
  bool passes_corner = false;
  for (const RocPoint& p : curve->points)
    passes_corner |= p.fpr == 0.0 && p.tpr == 1.0;
  CHECK(passes_corner);
  CHECK(auc(*curve) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor constant = Tensor::full({2, 3}, 0.4);
  const auto flat = restricted_roc({&constant, 1}, {&truth, 1});
  REQUIRE(flat.has_value());
  CHECK(auc(*flat) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("restricted roc matches the exhaustive sweep oracle") {
  Rng rng(11);
  // The [DERIVED] 10-pixel case first.
  {
    Tensor probs = Tensor::from_data(
        {2, 5}, {0.02, 0.15, 0.33, 0.41, 0.55, 0.55, 0.62, 0.74, 0.88, 0.97});
    BinaryMask truth = mask_of(2, 5, {3, 5, 7, 8, 9});
    const auto got = restricted_roc({&probs, 1}, {&truth, 1});
    const auto want = roc_sweep_oracle({&probs, 1}, {&truth, 1}, Band{});
    REQUIRE(got.has_value());
    REQUIRE(want.has_value());
    REQUIRE(got->points.size() == want->points.size());
    for (std::size_t i = 0; i < got->points.size(); ++i) {
      CHECK(got->points[i].threshold == want->points[i].threshold);
      CHECK(got->points[i].fpr == want->points[i].fpr);
      CHECK(got->points[i].tpr == want->points[i].tpr);
    }
  }
  // Random multi-sample sets, including ties from quantized scores.
  for (int trial = 0; trial < 50; ++trial) {
    const int h = rng.uniform_int(2, 8), w = rng.uniform_int(2, 8);
    std::vector<Tensor> probs;
    std::vector<BinaryMask> truths;
    for (int k = 0; k < 3; ++k) {
      Tensor p = Tensor::zeros({h, w});
      BinaryMask t(h, w);
      for (std::size_t i = 0; i < t.pixel_count(); ++i) {
        p.values()[i] = rng.uniform_int(0, 20) / 20.0;  // exact tie groups
        t.pixels[i] = rng.uniform() < 0.4;
      }
      probs.push_back(p);
      truths.push_back(t);
    }
    const auto got = restricted_roc(probs, truths);
    const auto want = roc_sweep_oracle(probs, truths, Band{});
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    REQUIRE(got->points.size() == want->points.size());
    for (std::size_t i = 0; i < got->points.size(); ++i) {
      CHECK(got->points[i].threshold == want->points[i].threshold);
      CHECK(std::abs(got->points[i].fpr - want->points[i].fpr) <= 1e-15);
      CHECK(std::abs(got->points[i].tpr - want->points[i].tpr) <= 1e-15);
    }
    CHECK(std::abs(auc(*got) - auc(*want)) <= 1e-12);

    // Structural invariants: strictly decreasing thresholds, monotone rates,
    // endpoints present.
    for (std::size_t i = 1; i < got->points.size(); ++i) {
      CHECK(got->points[i].threshold < got->points[i - 1].threshold);
      CHECK(got->points[i].fpr >= got->points[i - 1].fpr);
      CHECK(got->points[i].tpr >= got->points[i - 1].tpr);
    }
    CHECK(got->points.front().fpr == 0.0);
    CHECK(got->points.front().tpr == 0.0);
    CHECK(got->points.back().fpr == 1.0);
    CHECK(got->points.back().tpr == 1.0);
  }
}

TEST_CASE("auc: hand-built trapezoid and argsort invariance") {
  RocCurve curve;
  curve.points = {{0.99, 0.0, 0.0},
                  {0.8, 0.0, 0.4},
                  {0.6, 0.2, 0.7},
                  {0.3, 0.5, 0.9},
                  {0.01, 1.0, 1.0}};
  // Trapezoids: 0 + 0.2*(0.4+0.7)/2 + 0.3*(0.7+0.9)/2 + 0.5*(0.9+1.0)/2.
  const double want = 0.2 * 0.55 + 0.3 * 0.8 + 0.5 * 0.95;
  CHECK(auc(curve) == doctest::Approx(want).epsilon(1e-15));

  // AUC is invariant under strictly monotone score transforms (p -> p^2 with
  // the band transformed accordingly).
  Rng rng(13);
  Tensor probs = Tensor::zeros({4, 4});
  BinaryMask truth(4, 4);
  for (std::size_t i = 0; i < 16; ++i) {
    probs.values()[i] = rng.uniform(0.02, 0.98);
    truth.pixels[i] = rng.uniform() < 0.5;
  }
  Tensor squared = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 16; ++i)
    squared.values()[i] = probs.values()[i] * probs.values()[i];
  const auto base = restricted_roc({&probs, 1}, {&truth, 1}, Band{0.01, 0.99});
  const auto xfrm = restricted_roc({&squared, 1}, {&truth, 1},
                                   Band{0.01 * 0.01, 0.99 * 0.99});
  REQUIRE(base.has_value());
  REQUIRE(xfrm.has_value());
  CHECK(std::abs(auc(*base) - auc(*xfrm)) <= 1e-12);
}

TEST_CASE("best threshold maximizes Youden's J, larger threshold on ties") {
  RocCurve curve;
  curve.points = {{0.9, 0.0, 0.0},
                  {0.7, 0.1, 0.6},   // J = 0.5
                  {0.5, 0.3, 0.8},   // J = 0.5 (tie, earlier/larger wins)
                  {0.2, 0.6, 0.9},   // J = 0.3
                  {0.1, 1.0, 1.0}};
  CHECK(best_threshold(curve) == 0.7);
}

TEST_CASE("probability histogram") {
  const Band band{0.01, 0.99};

  Tensor out_of_band = Tensor::from_data({1, 2}, {0.001, 0.999});
  auto empty_hist = probability_histogram({&out_of_band, 1}, band, 4);
  for (const HistogramBin& b : empty_hist) CHECK(b.count == 0);

  // 20 synthetic values over 4 bins, binned by hand.
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(0.02 + 0.048 * i);
  Tensor t = Tensor::from_data({4, 5}, values);
  auto hist = probability_histogram({&t, 1}, band, 4);
  REQUIRE(hist.size() == 4);
  const double width = (band.hi - band.lo) / 4;
  std::uint64_t manual[4] = {0, 0, 0, 0};
  for (double v : values) {
    const int b = std::min(3, static_cast<int>((v - band.lo) / width));
    ++manual[b];
  }
  std::uint64_t total = 0;
  for (int b = 0; b < 4; ++b) {
    CHECK(hist[static_cast<std::size_t>(b)].count == manual[b]);
    total += hist[static_cast<std::size_t>(b)].count;
  }
  CHECK(total == 20);  // conservation of in-band pixels
}

TEST_CASE("evaluate_model pools confusions across the set") {
  Rng rng(17);
  std::vector<LabelMap> truths;
  for (int k = 0; k < 3; ++k) {
    LabelMap t(6, 6);
    for (auto& v : t.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    truths.push_back(t);
  }

  // Perfect predictions: every defined metric is 1, no probabilities given.
  const MetricsReport perfect = evaluate_model(truths, truths);
  CHECK(perfect.liver.pixel_accuracy == 1.0);
  CHECK(perfect.liver.iou == 1.0);
  CHECK(perfect.liver.rand_index == 1.0);
  CHECK(perfect.tumor.iou == 1.0);
  CHECK(!perfect.restricted_auc.has_value());

  // All-background predictions against truths with tumors: tumor IoU 0.
  std::vector<LabelMap> blank(3, LabelMap(6, 6));
  const MetricsReport zeroed = evaluate_model(blank, truths);
  CHECK(zeroed.tumor.iou == 0.0);

  // Pooled counts equal the sum of per-image confusions.
  std::vector<LabelMap> preds;
  for (int k = 0; k < 3; ++k) {
    LabelMap p(6, 6);
    for (auto& v : p.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    preds.push_back(p);
  }
  const MetricsReport report = evaluate_model(preds, truths);
  ConfusionCounts liver_pool, tumor_pool;
  for (int k = 0; k < 3; ++k) {
    const MaskSet pm = derive_masks(preds[static_cast<std::size_t>(k)]);
    const MaskSet tm = derive_masks(truths[static_cast<std::size_t>(k)]);
    liver_pool += confusion(pm.liver_or_tumor, tm.liver_or_tumor);
    tumor_pool += confusion(pm.tumor, tm.tumor);
  }
  CHECK(report.liver.iou == iou(liver_pool));
  CHECK(report.liver.pixel_accuracy == pixel_accuracy(liver_pool));
  CHECK(report.liver.rand_index == rand_index(liver_pool));
  CHECK(report.tumor.iou == iou(tumor_pool));

  CHECK_THROWS_AS(evaluate_model(preds, std::span<const LabelMap>(truths).subspan(0, 2)),
                  std::invalid_argument);
}

TEST_CASE("per-image aggregation averages per-image metric values") {
  // Image 1 perfect, image 2 fully wrong on the liver class.
  LabelMap truth1(2, 2), truth2(2, 2);
  truth1.labels = {1, 1, 0, 0};
  truth2.labels = {1, 1, 1, 1};
  LabelMap pred2(2, 2);  // all background
  std::vector<LabelMap> preds{truth1, pred2};
  std::vector<LabelMap> truths{truth1, truth2};

  const MetricsReport pooled = evaluate_model(preds, truths);
  const MetricsReport averaged = evaluate_model(preds, truths, {}, Band{},
                                                Aggregation::per_image);
  // Pooled: 2 of 6 liver pixels found -> IoU 1/3. Per-image: (1 + 0)/2.
  CHECK(pooled.liver.iou == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(averaged.liver.iou == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(averaged.liver.pixel_accuracy == doctest::Approx(0.5).epsilon(1e-12));
  // Tumor class is empty everywhere: both-empty convention gives 1 per image.
  CHECK(averaged.tumor.iou == 1.0);
  // Pooled confusion counts are reported either way.
  CHECK(averaged.liver.counts.tp == pooled.liver.counts.tp);
}

TEST_CASE("evaluate_model feeds tumor probabilities into the restricted roc") {
  LabelMap truth(4, 4);
  truth.labels = {0, 0, 0, 0, 0, 2, 2, 0, 0, 2, 2, 0, 0, 0, 0, 0};
  Tensor probs = Tensor::zeros({4, 4});
  for (std::size_t i = 0; i < 16; ++i)
    probs.values()[i] = truth.labels[i] == 2 ? 0.9 : 0.1;
  const MetricsReport report =
      evaluate_model({&truth, 1}, {&truth, 1}, {&probs, 1});
  REQUIRE(report.restricted_auc.has_value());
  CHECK(*report.restricted_auc == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(report.chosen_threshold.has_value());
  CHECK(*report.chosen_threshold >= 0.1);
  CHECK(*report.chosen_threshold <= 0.9);
}

TEST_CASE("band (0,1) degenerates to the standard roc") {
  Rng rng(19);
  Tensor probs = Tensor::zeros({6, 6});
  BinaryMask truth(6, 6);
  for (std::size_t i = 0; i < 36; ++i) {
    probs.values()[i] = rng.uniform(0.05, 0.95);
    truth.pixels[i] = rng.uniform() < 0.4;
  }
  const Band open{0.0, 1.0};
  const auto got = restricted_roc({&probs, 1}, {&truth, 1}, open);
  const auto want = roc_sweep_oracle({&probs, 1}, {&truth, 1}, open);
  REQUIRE(got.has_value());
  REQUIRE(want.has_value());
  CHECK(std::abs(auc(*got) - auc(*want)) <= 1e-12);
}
