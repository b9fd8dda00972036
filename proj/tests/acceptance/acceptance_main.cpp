// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Run with no arguments for all criteria or pass the
// criterion numbers to run, e.g. `acceptance 1 2 3`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cascadeseg/autodiff.hpp"
#include "cascadeseg/checkpoint.hpp"
#include "cascadeseg/csv.hpp"
#include "cascadeseg/losses.hpp"
#include "cascadeseg/metrics.hpp"
#include "cascadeseg/ops.hpp"
#include "cascadeseg/pgm.hpp"
#include "cascadeseg/phantom.hpp"
#include "cascadeseg/pipeline.hpp"
#include "cascadeseg/run_config.hpp"
#include "cascadeseg/train.hpp"
#include "cascadeseg/unet.hpp"
#include "commands.hpp"

using namespace cseg;
namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Tensor rand_tensor(Shape shape, Rng& rng, double lo, double hi,
                   bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradients of every differentiable op and both losses match
// central finite differences within 1e-4 relative error, >= 20 instances each.

struct GradStats {
  int checked = 0;
  int failed = 0;
  double worst = 0.0;
};

bool fd_check(std::vector<Tensor> leaves, const std::function<Tensor()>& fn,
              GradStats& stats) {
  Tape::current().clear();
  for (Tensor& leaf : leaves) leaf.zero_grad();
  Tensor loss = fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (Tensor& leaf : leaves)
    analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  Tape::current().clear();

  bool ok = true;
  NoGradGuard no_grad;
  const double h = 1e-4;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double f_plus = fn().item();
      values[i] = saved - h;
      const double f_minus = fn().item();
      values[i] = saved;
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[l][i];
      const double err = std::abs(a - fd);
      const double rel = err / std::max({std::abs(a), std::abs(fd), 1e-10});
      if (err > 1e-7) stats.worst = std::max(stats.worst, rel);
      if (err > 1e-4 * std::max(std::abs(a), std::abs(fd)) && err > 1e-7) {
        ok = false;
        ++stats.failed;
      }
    }
  }
  ++stats.checked;
  return ok;
}

bool criterion_gradients(std::string& detail) {
  const double started = now_s();
  Rng rng(1001);
  GradStats stats;
  bool ok = true;

  for (int trial = 0; trial < 20; ++trial) {
    const int c = rng.uniform_int(1, 3), f = rng.uniform_int(1, 3);
    const int hw = 2 * rng.uniform_int(2, 4);
    Tensor input = rand_tensor({1, c, hw, hw}, rng, -1, 1, true);
    Tensor kernel = rand_tensor({f, c, 3, 3}, rng, -1, 1, true);
    Tensor bias = rand_tensor({f}, rng, -1, 1, true);
    Tensor wsum = rand_tensor({1, f, hw, hw}, rng, -1, 1);
    ok &= fd_check({input, kernel, bias},
                   [&] { return sum(mul(conv2d(input, kernel, bias, Padding::same), wsum)); },
                   stats);

    Tensor pool_in = Tensor::zeros({1, 1, hw, hw}, true);
    for (std::size_t i = 0; i < pool_in.values().size(); ++i)
      pool_in.values()[i] = 0.05 * static_cast<double>((i * 37) % pool_in.values().size()) +
                            rng.uniform(0.0, 0.01);
    Tensor wpool = rand_tensor({1, 1, hw / 2, hw / 2}, rng, -1, 1);
    ok &= fd_check({pool_in},
                   [&] { return sum(mul(max_pool_2x2(pool_in), wpool)); }, stats);

    Tensor up_in = rand_tensor({1, 2, 3, 3}, rng, -1, 1, true);
    Tensor wup = rand_tensor({1, 2, 6, 6}, rng, -1, 1);
    ok &= fd_check({up_in},
                   [&] { return sum(mul(upsample_nearest_2x(up_in), wup)); }, stats);

    Tensor ca = rand_tensor({1, 2, 3, 3}, rng, -1, 1, true);
    Tensor cb = rand_tensor({1, 1, 3, 3}, rng, -1, 1, true);
    Tensor wcat = rand_tensor({1, 3, 3, 3}, rng, -1, 1);
    ok &= fd_check({ca, cb},
                   [&] { return sum(mul(concat_channels(ca, cb), wcat)); }, stats);

    // Kink-free inputs for relu; any values for sigmoid/softmax.
    Tensor act = Tensor::zeros({1, 3, 2, 2}, true);
    for (double& v : act.values()) {
      const double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
      v = s * rng.uniform(0.1, 1.2);
    }
    Tensor wact = rand_tensor({1, 3, 2, 2}, rng, -1, 1);
    ok &= fd_check({act}, [&] { return sum(mul(relu(act), wact)); }, stats);
    ok &= fd_check({act}, [&] { return sum(mul(sigmoid(act), wact)); }, stats);
    ok &= fd_check({act}, [&] { return sum(mul(softmax_channels(act), wact)); }, stats);

    // Dropout re-seeds per evaluation so the mask is a constant of the check.
    Tensor drop_in = rand_tensor({1, 2, 4, 4}, rng, -1, 1, true);
    Tensor wdrop = rand_tensor({1, 2, 4, 4}, rng, -1, 1);
    const std::uint64_t drop_seed = rng.next_u64();
    ok &= fd_check({drop_in},
                   [&] {
                     Rng r(drop_seed);
                     return sum(mul(dropout(drop_in, 0.4, true, r), wdrop));
                   },
                   stats);

    Tensor ea = rand_tensor({2, 3}, rng, -1, 1, true);
    Tensor eb = rand_tensor({2, 3}, rng, 0.3, 1.3, true);
    ok &= fd_check({ea, eb}, [&] { return sum(mul(add(ea, eb), eb)); }, stats);
    ok &= fd_check({ea, eb}, [&] { return sum(mul(sub(ea, eb), eb)); }, stats);
    ok &= fd_check({ea}, [&] { return mean_all(scale(ea, 2.5)); }, stats);

    // Both loss functions, gradients w.r.t. predictions.
    Tensor pred = rand_tensor({1, 1, 4, 4}, rng, 0.05, 0.95, true);
    Tensor target = Tensor::zeros({1, 1, 4, 4});
    for (double& v : target.values()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    ok &= fd_check({pred}, [&] { return weighted_bce(pred, target, 0.3); }, stats);
    ok &= fd_check({pred}, [&] { return binary_cross_entropy(pred, target); }, stats);

    Tensor pred3 = rand_tensor({1, 3, 2, 2}, rng, 0.05, 0.95, true);
    Tensor onehot = Tensor::zeros({1, 3, 2, 2});
    for (std::size_t i = 0; i < 4; ++i)
      onehot.values()[static_cast<std::size_t>(rng.uniform_int(0, 2)) * 4 + i] = 1.0;
    ok &= fd_check({pred3},
                   [&] {
                     return categorical_cross_entropy(pred3, onehot,
                                                      ClassWeights{0.9, 0.6, 0.5});
                   },
                   stats);
  }

  const double elapsed = now_s() - started;
  std::ostringstream os;
  os << stats.checked << " instances, " << stats.failed
     << " gradient mismatches, worst relative error " << stats.worst << ", "
     << elapsed << "s (budget 120s)";
  detail = os.str();
  return ok && stats.failed == 0 && elapsed < 120.0;
}

// ---------------------------------------------------------------------------
// Criterion 2: metric implementations against independent oracles.

double rand_index_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  std::uint64_t agree = 0, total = 0;
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t k = j + 1; k < a.size(); ++k) {
      agree += (a[j] == a[k]) == (b[j] == b[k]);
      ++total;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

std::optional<double> auc_sweep_oracle(const Tensor& probs,
                                       const BinaryMask& truth, Band band) {
  std::vector<std::pair<double, bool>> scored;
  for (std::size_t i = 0; i < truth.pixel_count(); ++i)
    if (probs.values()[i] > band.lo && probs.values()[i] < band.hi)
      scored.emplace_back(probs.values()[i], truth.pixels[i] != 0);
  if (scored.empty()) return std::nullopt;
  std::uint64_t pos = 0;
  for (auto& [s, y] : scored) pos += y;
  if (pos == 0 || pos == scored.size()) return std::nullopt;
  const std::uint64_t neg = scored.size() - pos;

  std::set<double, std::greater<>> thresholds{band.hi, band.lo};
  for (auto& [s, y] : scored) thresholds.insert(s);
  std::vector<std::pair<double, double>> points;
  for (double t : thresholds) {
    std::uint64_t tp = 0, fp = 0;
    for (auto& [s, y] : scored)
      if (s > t) y ? ++tp : ++fp;
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].first - points[i - 1].first) *
            (points[i].second + points[i - 1].second) * 0.5;
  return area;
}

bool criterion_metric_oracles(std::string& detail) {
  const double started = now_s();
  Rng rng(2002);
  int mismatches = 0;
  int auc_defined = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = rng.uniform_int(2, 12), w = rng.uniform_int(1, 12);
    if (h * w < 2) continue;

    BinaryMask pred(h, w), truth(h, w);
    std::vector<int> pv, tv;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
      pred.pixels[i] = rng.uniform() < 0.4;
      truth.pixels[i] = rng.uniform() < 0.4;
      pv.push_back(pred.pixels[i]);
      tv.push_back(truth.pixels[i]);
    }

    // Confusion-based accuracy and IoU against direct pixel counting.
    const ConfusionCounts c = confusion(pred, truth);
    std::uint64_t tp = 0, f_pos = 0, f_neg = 0, tn = 0;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
      tp += pred.pixels[i] && truth.pixels[i];
      f_pos += pred.pixels[i] && !truth.pixels[i];
      f_neg += !pred.pixels[i] && truth.pixels[i];
      tn += !pred.pixels[i] && !truth.pixels[i];
    }
    const double acc_oracle =
        static_cast<double>(tp + tn) / static_cast<double>(pred.pixel_count());
    const double iou_oracle =
        (tp + f_pos + f_neg) == 0
            ? 1.0
            : static_cast<double>(tp) / static_cast<double>(tp + f_pos + f_neg);
    if (pixel_accuracy(c) != acc_oracle) ++mismatches;
    if (iou(c) != iou_oracle) ++mismatches;

    // Rand index closed form vs pair enumeration (exact).
    if (rand_index(pred, truth) != rand_index_pairs(pv, tv)) ++mismatches;
    LabelMap l1(h, w), l2(h, w);
    std::vector<int> lv1, lv2;
    for (std::size_t i = 0; i < l1.pixel_count(); ++i) {
      l1.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
      l2.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
      lv1.push_back(l1.labels[i]);
      lv2.push_back(l2.labels[i]);
    }
    if (rand_index(l1, l2) != rand_index_pairs(lv1, lv2)) ++mismatches;

    // Restricted ROC / AUC vs the exhaustive sweep.
    Tensor probs = Tensor::zeros({h, w});
    for (double& v : probs.values()) v = rng.uniform_int(0, 25) / 25.0;
    const auto curve = restricted_roc({&probs, 1}, {&truth, 1});
    const auto oracle = auc_sweep_oracle(probs, truth, Band{});
    if (curve.has_value() != oracle.has_value()) {
      ++mismatches;
    } else if (curve) {
      ++auc_defined;
      if (std::abs(auc(*curve) - *oracle) > 1e-12) ++mismatches;
    }
  }
  const double elapsed = now_s() - started;
  std::ostringstream os;
  os << "200 random instances, " << auc_defined << " with defined rAUC, "
     << mismatches << " oracle mismatches, " << elapsed << "s (budget 60s)";
  detail = os.str();
  return mismatches == 0 && elapsed < 60.0;
}

// ---------------------------------------------------------------------------
// Criterion 3: balanced weights against direct pixel counting.

bool criterion_balanced_weights(std::string& detail) {
  Rng rng(3003);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 16, w = 16;  // power-of-two pixel count: divisions are exact
    BinaryMask b(h, w);
    std::size_t ones = 0;
    for (auto& p : b.pixels) {
      p = rng.uniform() < 0.3;
      ones += p;
    }
    const double total = static_cast<double>(b.pixel_count());
    if (balanced_alpha(b) != 1.0 - static_cast<double>(ones) / total) ++mismatches;

    BinaryMask t(h, w), l(h, w), o(h, w);
    std::size_t nt = 0, nl = 0, no = 0;
    for (std::size_t i = 0; i < t.pixel_count(); ++i) {
      const int c = rng.uniform_int(0, 2);
      if (c == 0) { t.pixels[i] = 1; ++nt; }
      else if (c == 1) { l.pixels[i] = 1; ++nl; }
      else { o.pixels[i] = 1; ++no; }
    }
    const ClassWeights cw = balanced_class_weights(t, l, o);
    if (cw.tumor != 1.0 - static_cast<double>(nt) / total) ++mismatches;
    if (cw.liver != 1.0 - static_cast<double>(nl) / total) ++mismatches;
    if (cw.other != 1.0 - static_cast<double>(no) / total) ++mismatches;
    if (cw.tumor + cw.liver + cw.other != 2.0) ++mismatches;
  }
  detail = "100 random masks, " + std::to_string(mismatches) + " mismatches";
  return mismatches == 0;
}

// ---------------------------------------------------------------------------
// Criterion 4: the final classification rule over random mask pairs.

bool criterion_cascade_algebra(std::string& detail) {
  Rng rng(4004);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = rng.uniform_int(1, 8), w = rng.uniform_int(1, 8);
    BinaryMask m(h, w), t(h, w);
    for (auto& p : m.pixels) p = rng.uniform() < 0.5;
    for (auto& p : t.pixels) p = rng.uniform() < 0.5;
    const LabelMap labels = final_classify(m, t);
    for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
      const std::uint8_t want =
          m.pixels[i] ? (t.pixels[i] ? 2 : 1) : 0;
      violations += labels.labels[i] != want;
      if (labels.labels[i] == 2 && !m.pixels[i]) ++violations;
    }
  }
  detail = "1000 random (M, T) pairs, " + std::to_string(violations) +
           " rule violations";
  return violations == 0;
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6: end-to-end learning and the loss-weighting trend,
// sharing one training run per seed.

UNet clone_net(const UNet& net) {
  Rng dummy(0);
  UNet copy(net.config(), dummy);
  copy.set_parameters(net.parameters());
  return copy;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double liver_iou = 0, tumor_iou = 0, pixel_acc = 0;
  std::optional<double> rauc_balanced, rauc_plain;
  double seconds = 0;
};

struct TestEval {
  double liver_iou, tumor_iou, pixel_acc;
  std::optional<double> rauc;
};

TestEval evaluate_on_split(const UNet& liver_net, const UNet& tumor_net,
                           std::span<const Sample> test,
                           const CascadeThresholds& thr, const WindowSpec& win) {
  std::vector<LabelMap> preds, truths;
  std::vector<Tensor> probs;
  std::uint64_t exact = 0, total = 0;
  for (const Sample& s : test) {
    SequentialPrediction p = sequential_predict(liver_net, tumor_net, s.image, thr, win);
    for (std::size_t i = 0; i < s.labels.pixel_count(); ++i)
      exact += p.labels.labels[i] == s.labels.labels[i];
    total += s.labels.pixel_count();
    preds.push_back(std::move(p.labels));
    probs.push_back(std::move(p.tumor_prob));
    truths.push_back(s.labels);
  }
  const MetricsReport report = evaluate_model(preds, truths, probs);
  return TestEval{report.liver.iou, report.tumor.iou,
                  static_cast<double>(exact) / static_cast<double>(total),
                  report.restricted_auc};
}

SeedOutcome run_seed(std::uint64_t seed, bool verbose) {
  const double started = now_s();
  RunConfig cfg;
  cfg.seed = seed;
  const PhantomSpec spec = cfg.resolved_phantom();
  const Dataset ds = make_dataset(spec, cfg.n_train, cfg.n_val, cfg.n_test);
  const TrainConfig tc = cfg.resolved_train(Model::sequential);
  const CascadeThresholds thr = cfg.thresholds;
  const WindowSpec win = cfg.window;

  UNetConfig net_cfg = cfg.net;
  net_cfg.head = Head::binary_sigmoid;
  Rng init_a = Rng::for_stream(seed, 1);
  Rng init_b = Rng::for_stream(seed, 2);
  UNet liver_net(net_cfg, init_a);
  UNet tumor_net(net_cfg, init_b);

  // Identical to train_sequential, but the fine-tune is forked so the
  // balanced and plain variants share the whole main phase.
  Rng rng(tc.seed);
  std::vector<BinarySample> stage1;
  for (const Sample& s : ds.train)
    stage1.push_back({s.image, derive_masks(s.labels).liver_or_tumor});
  const Phase liver_phase{"liver", tc.lr_initial, tc.epochs_main,
                          LossMode::plain, tc.fixed_alpha, tc.balanced_weighting};
  run_binary_phases(liver_net, stage1, {&liver_phase, 1}, tc.batch_size,
                    tc.momentum, rng);

  const std::vector<BinarySample> stage2 = materialize_stage2(
      liver_net, ds.train, thr.liver, win, tc.stage2_ground_truth_mask);
  const Phase tumor_main{"tumor", tc.lr_initial, tc.epochs_main,
                         LossMode::plain, tc.fixed_alpha, tc.balanced_weighting};
  run_binary_phases(tumor_net, stage2, {&tumor_main, 1}, tc.batch_size,
                    tc.momentum, rng);

  UNet tumor_plain = clone_net(tumor_net);
  Rng rng_fork = rng;  // same stream position for both fine-tunes

  const Phase finetune_balanced{"tumor-finetune", tc.lr_finetune,
                                tc.epochs_finetune, LossMode::balanced,
                                tc.fixed_alpha, tc.balanced_weighting};
  run_binary_phases(tumor_net, stage2, {&finetune_balanced, 1}, tc.batch_size,
                    tc.momentum, rng);

  const Phase finetune_plain{"tumor-finetune", tc.lr_finetune,
                             tc.epochs_finetune, LossMode::plain,
                             tc.fixed_alpha, tc.balanced_weighting};
  run_binary_phases(tumor_plain, stage2, {&finetune_plain, 1}, tc.batch_size,
                    tc.momentum, rng_fork);

  SeedOutcome out;
  out.seed = seed;
  const TestEval balanced = evaluate_on_split(liver_net, tumor_net, ds.test, thr, win);
  const TestEval plain = evaluate_on_split(liver_net, tumor_plain, ds.test, thr, win);
  out.liver_iou = balanced.liver_iou;
  out.tumor_iou = balanced.tumor_iou;
  out.pixel_acc = balanced.pixel_acc;
  out.rauc_balanced = balanced.rauc;
  out.rauc_plain = plain.rauc;
  out.seconds = now_s() - started;
  if (verbose) {
    std::printf(
        "    seed %llu: liver IoU %.4f, tumor IoU %.4f, pixel acc %.4f, "
        "rAUC balanced %s vs plain %s, %.0fs\n",
        static_cast<unsigned long long>(seed), out.liver_iou, out.tumor_iou,
        out.pixel_acc,
        out.rauc_balanced ? fmt_double(*out.rauc_balanced).c_str() : "NA",
        out.rauc_plain ? fmt_double(*out.rauc_plain).c_str() : "NA",
        out.seconds);
    std::fflush(stdout);
  }
  return out;
}

std::vector<SeedOutcome>& seed_outcomes() {
  static std::vector<SeedOutcome> outcomes;
  return outcomes;
}

void ensure_seed_runs(bool verbose) {
  if (!seed_outcomes().empty()) return;
  for (std::uint64_t seed : {42ull, 43ull, 44ull})
    seed_outcomes().push_back(run_seed(seed, verbose));
}

bool criterion_end_to_end(std::string& detail) {
  ensure_seed_runs(true);
  int passing = 0;
  std::ostringstream os;
  for (const SeedOutcome& s : seed_outcomes()) {
    const bool metrics_ok =
        s.liver_iou >= 0.85 && s.tumor_iou >= 0.50 && s.pixel_acc >= 0.98;
    const bool time_ok = s.seconds <= 30 * 60;
    passing += metrics_ok && time_ok;
    os << "seed " << s.seed << (metrics_ok && time_ok ? " ok" : " MISS") << " (iou "
       << fmt_double(s.liver_iou) << "/" << fmt_double(s.tumor_iou) << ", acc "
       << fmt_double(s.pixel_acc) << ", " << static_cast<int>(s.seconds) << "s); ";
  }
  os << passing << "/3 seeds pass (need 2)";
  detail = os.str();
  return passing >= 2;
}

bool criterion_weighting_trend(std::string& detail) {
  ensure_seed_runs(true);
  int passing = 0;
  std::ostringstream os;
  for (const SeedOutcome& s : seed_outcomes()) {
    const bool ok = s.rauc_balanced.has_value() && s.rauc_plain.has_value() &&
                    *s.rauc_balanced > *s.rauc_plain;
    passing += ok;
    os << "seed " << s.seed << " balanced "
       << (s.rauc_balanced ? fmt_double(*s.rauc_balanced) : "NA") << " vs plain "
       << (s.rauc_plain ? fmt_double(*s.rauc_plain) : "NA") << (ok ? " >" : " !>")
       << "; ";
  }
  os << passing << "/3 seeds show the trend (need 2)";
  detail = os.str();
  return passing >= 2;
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical datasets and checkpoints across reruns.

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::map<std::string, std::string> ma, mb;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file())
      ma[fs::relative(e.path(), a).string()] = file_bytes(e.path());
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file())
      mb[fs::relative(e.path(), b).string()] = file_bytes(e.path());
  return ma == mb;
}

bool criterion_determinism(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / "cascadeseg_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);

  cli::ConfigOpts opts;
  opts.set_overrides = {"net.input_size=16",  "net.depth=2",
                        "net.base_channels=2", "data.n_train=6",
                        "data.n_val=2",        "data.n_test=2",
                        "train.epochs_main=2", "train.epochs_finetune=1"};
  bool ok = true;
  ok &= cli::cmd_gen_data(opts, (root / "d1").string()) == 0;
  ok &= cli::cmd_gen_data(opts, (root / "d2").string()) == 0;
  ok &= same_tree(root / "d1", root / "d2");

  ok &= cli::cmd_train(opts, Model::sequential, (root / "d1").string(),
                       (root / "m1").string()) == 0;
  ok &= cli::cmd_train(opts, Model::sequential, (root / "d1").string(),
                       (root / "m2").string()) == 0;
  ok &= file_bytes(root / "m1/modelA.segc") == file_bytes(root / "m2/modelA.segc");
  ok &= file_bytes(root / "m1/modelB.segc") == file_bytes(root / "m2/modelB.segc");
  ok &= file_bytes(root / "m1/epochs.csv") == file_bytes(root / "m2/epochs.csv");

  ok &= cli::cmd_train(opts, Model::one_step, (root / "d1").string(),
                       (root / "c1").string()) == 0;
  ok &= cli::cmd_train(opts, Model::one_step, (root / "d1").string(),
                       (root / "c2").string()) == 0;
  ok &= file_bytes(root / "c1/modelC.segc") == file_bytes(root / "c2/modelC.segc");

  fs::remove_all(root);
  detail = "gen-data and both train modes byte-identical across reruns";
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 8: corrupted and truncated files are rejected, never crash;
// valid files roundtrip bit-exactly.

bool criterion_format_robustness(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / "cascadeseg_acceptance_fmt";
  fs::remove_all(root);
  fs::create_directories(root);
  Rng rng(8008);

  // Reference files.
  UNetConfig net_cfg{16, 2, 2, 0.4, Head::binary_sigmoid};
  Rng init(8);
  UNet net(net_cfg, init);
  const std::string ckpt_path = (root / "m.segc").string();
  save_checkpoint(net.parameters(), net_cfg, ckpt_path);

  PhantomSpec spec;
  spec.size = 16;
  const Sample sample = generate_phantom(spec, 3);
  const std::string img_path = (root / "i.pgm").string();
  const std::string lbl_path = (root / "l.pgm").string();
  save_image_pgm(sample.image, img_path);
  save_label_pgm(sample.labels, lbl_path);

  // Valid files roundtrip bit-exactly.
  bool ok = true;
  {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    save_checkpoint(ckpt.params, ckpt.config, (root / "m2.segc").string());
    ok &= file_bytes(root / "m.segc") == file_bytes(root / "m2.segc");
    save_label_pgm(load_label_pgm(lbl_path), (root / "l2.pgm").string());
    ok &= file_bytes(root / "l.pgm") == file_bytes(root / "l2.pgm");
    save_image_pgm(load_image_pgm(img_path), (root / "i2.pgm").string());
    ok &= file_bytes(root / "i.pgm") == file_bytes(root / "i2.pgm");
  }
  if (!ok) {
    detail = "valid-file roundtrip is not bit-exact";
    return false;
  }

  const std::string ckpt_bytes = file_bytes(ckpt_path);
  const std::string img_bytes = file_bytes(img_path);
  const std::string lbl_bytes = file_bytes(lbl_path);
  const std::string fuzz_path = (root / "fuzz.bin").string();

  int rejected = 0, survived = 0, crashes = 0, no_diag = 0;
  auto attempt = [&](int kind, const std::string& bytes) {
    {
      std::ofstream out(fuzz_path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
      if (kind == 0) (void)load_checkpoint(fuzz_path);
      else if (kind == 1) (void)load_image_pgm(fuzz_path);
      else (void)load_label_pgm(fuzz_path);
      ++survived;
    } catch (const std::exception& err) {
      ++rejected;
      if (std::strlen(err.what()) == 0) ++no_diag;
    } catch (...) {
      ++crashes;
    }
  };

  // 1000 corruptions: truncations anywhere (always structurally detectable),
  // header-field corruptions, appended garbage, and for label PGMs payload
  // corruption to out-of-alphabet bytes.
  for (int trial = 0; trial < 1000; ++trial) {
    const int kind = trial % 3;
    const std::string& src = kind == 0 ? ckpt_bytes : kind == 1 ? img_bytes : lbl_bytes;
    const int mode = trial % 4;
    std::string mutated = src;
    if (mode == 0) {
      mutated = src.substr(
          0, static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(src.size()) - 1)));
    } else if (mode == 1) {
      // Structural header bytes: any of the first 12 of a checkpoint; for a
      // PGM only magic/digit bytes, since whitespace bytes are
      // interchangeable and flipping one can still be a well-formed file.
      std::vector<int> positions;
      if (kind == 0) {
        for (int i = 0; i < 12; ++i) positions.push_back(i);
      } else {
        for (int i = 0; i < 10 && i < static_cast<int>(src.size()); ++i) {
          const char ch = src[static_cast<std::size_t>(i)];
          if (!(ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r'))
            positions.push_back(i);
        }
      }
      const int at = positions[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(positions.size()) - 1))];
      char& c = mutated[static_cast<std::size_t>(at)];
      char flipped = static_cast<char>(c ^ (1 << rng.uniform_int(0, 7)));
      if (flipped == c) flipped = static_cast<char>(c + 1);
      // Keep the byte structural: never turn a digit into whitespace that a
      // parser may legally absorb.
      if (kind != 0 && (flipped == ' ' || flipped == '\t' || flipped == '\n' ||
                        flipped == '\r' || flipped == '\v' || flipped == '\f'))
        flipped = 'Q';
      c = flipped;
    } else if (mode == 2) {
      mutated += std::string(static_cast<std::size_t>(rng.uniform_int(1, 16)), 'x');
    } else {
      if (kind == 2) {
        // Label payloads admit only {0,127,255}; anything else must reject.
        const std::size_t payload_at = mutated.size() - sample.labels.pixel_count() +
                                       static_cast<std::size_t>(rng.uniform_int(
                                           0, static_cast<int>(sample.labels.pixel_count()) - 1));
        mutated[payload_at] = static_cast<char>(rng.uniform_int(1, 126));
      } else {
        mutated = src.substr(0, src.size() / 2);
      }
    }
    if (mutated == src) continue;
    attempt(kind, mutated);
  }

  std::ostringstream os;
  os << rejected << " rejected, " << survived << " survived, " << crashes
     << " crashes, " << no_diag << " empty diagnostics";
  detail = os.str();
  fs::remove_all(root);
  return crashes == 0 && survived == 0 && no_diag == 0 && rejected > 0;
}

// ---------------------------------------------------------------------------
// Criterion 9: the joint objective is the affine combination of its parts.

bool criterion_joint_objective(std::string& detail) {
  PhantomSpec spec;
  spec.size = 16;
  spec.seed = 909;
  const Dataset ds = make_dataset(spec, 4, 1, 1);
  UNetConfig net_cfg{16, 2, 4, 0.2, Head::binary_sigmoid};
  Rng ia(90), ib(91);
  UNet liver_net(net_cfg, ia);
  UNet tumor_net(net_cfg, ib);
  const CascadeThresholds thr;
  const WindowSpec win;

  // Component losses composed by hand from the library ops.
  double liver_term = 0.0, tumor_term = 0.0;
  for (const Sample& s : ds.train) {
    const MaskSet truth = derive_masks(s.labels);
    std::vector<double> data(s.image.values().begin(), s.image.values().end());
    Tensor batch = Tensor::from_data({1, 1, 16, 16}, std::move(data));
    Tensor liver_out = liver_net.forward_eval(batch);
    liver_term +=
        binary_cross_entropy(liver_out, mask_to_tensor(truth.liver_or_tumor)).item();
    const BinaryMask mask = threshold(liver_out, thr.liver);
    Tensor masked = masked_input(s.image, mask, win);
    std::vector<double> md(masked.values().begin(), masked.values().end());
    Tensor tumor_out =
        tumor_net.forward_eval(Tensor::from_data({1, 1, 16, 16}, std::move(md)));
    BinaryMask gated(16, 16);
    for (std::size_t i = 0; i < gated.pixel_count(); ++i)
      gated.pixels[i] =
          static_cast<std::uint8_t>(truth.tumor.pixels[i] & mask.pixels[i]);
    tumor_term += binary_cross_entropy(tumor_out, mask_to_tensor(gated)).item();
  }
  liver_term /= static_cast<double>(ds.train.size());
  tumor_term /= static_cast<double>(ds.train.size());

  double worst = 0.0;
  for (double c : {0.0, 0.5, 1.0}) {
    const double got =
        evaluate_joint_objective(liver_net, tumor_net, ds.train, c, thr, win);
    const double want = c * liver_term + (1.0 - c) * tumor_term;
    worst = std::max(worst, std::abs(got - want));
  }
  detail = "worst |joint - affine combination| = " + fmt_double(worst);
  return worst <= 1e-12;
}

struct Criterion {
  int id;
  const char* name;
  bool (*run)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "gradient correctness vs central finite differences", criterion_gradients},
    {2, "metric implementations vs independent oracles", criterion_metric_oracles},
    {3, "balanced weights vs direct pixel counting", criterion_balanced_weights},
    {4, "final classification rule on random mask pairs", criterion_cascade_algebra},
    {5, "end-to-end sequential learning on phantom data", criterion_end_to_end},
    {6, "balanced fine-tune improves tumor restricted AUC", criterion_weighting_trend},
    {7, "byte-identical datasets and checkpoints across reruns", criterion_determinism},
    {8, "corrupt/truncated files rejected, valid files bit-exact", criterion_format_robustness},
    {9, "joint objective equals its affine composition", criterion_joint_objective},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& err) {
      detail = std::string("exception: ") + err.what();
    }
    std::printf("%s  criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", c.id,
                c.name, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}
