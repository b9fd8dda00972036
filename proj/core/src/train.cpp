#include "cascadeseg/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "cascadeseg/autodiff.hpp"
#include "cascadeseg/metrics.hpp"
#include "cascadeseg/optim.hpp"

namespace cseg {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(rng.uniform_int(0, i))]);
}

// Stacks [H,W] images into an [B,1,H,W] batch.
Tensor stack_images(std::span<const Tensor* const> images) {
  const int h = images[0]->dim(0), w = images[0]->dim(1);
  std::vector<double> data;
  data.reserve(images.size() * static_cast<std::size_t>(h) * w);
  for (const Tensor* img : images)
    data.insert(data.end(), img->values().begin(), img->values().end());
  return Tensor::from_data({static_cast<int>(images.size()), 1, h, w},
                           std::move(data));
}

Tensor stack_masks(std::span<const BinaryMask* const> masks) {
  const int h = masks[0]->height, w = masks[0]->width;
  std::vector<double> data;
  data.reserve(masks.size() * static_cast<std::size_t>(h) * w);
  for (const BinaryMask* m : masks)
    for (std::uint8_t p : m->pixels) data.push_back(static_cast<double>(p));
  return Tensor::from_data({static_cast<int>(masks.size()), 1, h, w},
                           std::move(data));
}

struct PixelCounters {
  std::uint64_t exact = 0, total = 0;
  ConfusionCounts liver, tumor;

  void add(const LabelMap& pred, const LabelMap& truth) {
    const MaskSet p = derive_masks(pred);
    const MaskSet t = derive_masks(truth);
    liver += confusion(p.liver_or_tumor, t.liver_or_tumor);
    tumor += confusion(p.tumor, t.tumor);
    for (std::size_t i = 0; i < pred.pixel_count(); ++i)
      exact += pred.labels[i] == truth.labels[i];
    total += pred.pixel_count();
  }

  ValidationMetrics metrics() const {
    return ValidationMetrics{
        total ? static_cast<double>(exact) / static_cast<double>(total) : 1.0,
        iou(liver), iou(tumor)};
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (lr_initial < 0.0 || lr_finetune < 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must be non-negative");
  if (lr_finetune > lr_initial)
    throw std::invalid_argument(
        "TrainConfig: lr_finetune must not exceed lr_initial");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
  if (epochs_main < 1 || epochs_finetune < 1 || batch_size < 1)
    throw std::invalid_argument("TrainConfig: counts must be >= 1");
  if (loss_mode == LossMode::fixed_alpha &&
      (fixed_alpha <= 0.0 || fixed_alpha >= 1.0))
    throw std::invalid_argument("TrainConfig: fixed_alpha must be in (0,1)");
  if (joint_c < 0.0 || joint_c > 1.0)
    throw std::invalid_argument("TrainConfig: joint_c must be in [0,1]");
}

TrainReport run_binary_phases(UNet& net, std::span<const BinarySample> data,
                              std::span<const Phase> phases, int batch_size,
                              double momentum, Rng& rng,
                              const ValidationFn& validate) {
  if (data.empty())
    throw std::invalid_argument("run_binary_phases: empty dataset");
  const double started = now_seconds();

  TrainReport report;
  SgdMomentum optimizer(momentum);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  int epoch_index = 0;
  for (const Phase& phase : phases) {
    optimizer.reset();  // each phase is a fresh optimization episode
    for (int e = 0; e < phase.epochs; ++e) {
      shuffle_indices(order, rng);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const Tensor*> images;
        std::vector<const BinaryMask*> masks;
        for (std::size_t i = start; i < stop; ++i) {
          images.push_back(&data[static_cast<std::size_t>(order[i])].image);
          masks.push_back(&data[static_cast<std::size_t>(order[i])].target);
        }
        Tape::current().clear();
        net.zero_grad();
        Tensor input = stack_images(images);
        Tensor target = stack_masks(masks);
        Tensor out = net.forward(input, /*training=*/true, &rng);
        Tensor loss;
        switch (phase.mode) {
          case LossMode::plain:
            loss = binary_cross_entropy(out, target);
            break;
          case LossMode::fixed_alpha:
            loss = weighted_bce(out, target, phase.fixed_alpha);
            break;
          case LossMode::balanced: {
            std::vector<double> alphas;
            alphas.reserve(masks.size());
            for (const BinaryMask* m : masks)
              alphas.push_back(training_alpha(*m, phase.weighting));
            loss = weighted_bce(out, target, alphas);
            break;
          }
        }
        backward(loss);
        optimizer.step(net.parameters(), phase.lr);
        loss_sum += loss.item() * static_cast<double>(stop - start);
      }
      Tape::current().clear();

      EpochRecord rec;
      rec.epoch = ++epoch_index;
      rec.phase = phase.name;
      rec.mean_loss = loss_sum / static_cast<double>(data.size());
      if (validate) validate(rec);
      report.epochs.push_back(std::move(rec));
    }
  }
  report.wall_seconds = now_seconds() - started;
  return report;
}

TrainReport train_one_step(UNet& net, std::span<const Sample> train,
                           std::span<const Sample> val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_one_step: empty dataset");
  if (net.config().head != Head::softmax3)
    throw std::invalid_argument("train_one_step: network must have a softmax3 head");
  if (cfg.loss_mode == LossMode::fixed_alpha)
    throw std::invalid_argument(
        "train_one_step: fixed_alpha applies to the sequential model only");
  const double started = now_seconds();

  struct Prepared {
    const Tensor* image;
    MaskSet masks;
    ClassWeights weights;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(train.size());
  for (const Sample& s : train) {
    MaskSet m = derive_masks(s.labels);
    ClassWeights w = balanced_class_weights(m.tumor, m.liver_only, m.background);
    prepared.push_back({&s.image, std::move(m), w});
  }

  TrainReport report;
  SgdMomentum optimizer(cfg.momentum);
  Rng rng(cfg.seed);
  std::vector<int> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);

  struct PhasePlan {
    const char* name;
    double lr;
    int epochs;
    bool weighted;
  };
  const PhasePlan plans[2] = {
      {"pretrain", cfg.lr_initial, cfg.epochs_main, false},
      {"finetune", cfg.lr_finetune, cfg.epochs_finetune,
       cfg.loss_mode != LossMode::plain}};

  int epoch_index = 0;
  for (const PhasePlan& plan : plans) {
    optimizer.reset();  // fresh optimizer per phase
    for (int e = 0; e < plan.epochs; ++e) {
      shuffle_indices(order, rng);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(
            order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const int b = static_cast<int>(stop - start);
        const int s = net.config().input_size;
        std::vector<double> in_data, target_data;
        in_data.reserve(static_cast<std::size_t>(b) * s * s);
        target_data.reserve(static_cast<std::size_t>(b) * 3 * s * s);
        std::vector<ClassWeights> weights;
        for (std::size_t i = start; i < stop; ++i) {
          const Prepared& p = prepared[static_cast<std::size_t>(order[i])];
          in_data.insert(in_data.end(), p.image->values().begin(),
                         p.image->values().end());
          Tensor onehot = onehot_to_tensor(p.masks.tumor, p.masks.liver_only,
                                           p.masks.background);
          target_data.insert(target_data.end(), onehot.values().begin(),
                             onehot.values().end());
          weights.push_back(plan.weighted ? p.weights : ClassWeights{});
        }
        Tape::current().clear();
        net.zero_grad();
        Tensor input = Tensor::from_data({b, 1, s, s}, std::move(in_data));
        Tensor target = Tensor::from_data({b, 3, s, s}, std::move(target_data));
        Tensor out = net.forward(input, /*training=*/true, &rng);
        Tensor loss = categorical_cross_entropy(out, target, weights);
        backward(loss);
        optimizer.step(net.parameters(), plan.lr);
        loss_sum += loss.item() * static_cast<double>(b);
      }
      Tape::current().clear();

      EpochRecord rec;
      rec.epoch = ++epoch_index;
      rec.phase = plan.name;
      rec.mean_loss = loss_sum / static_cast<double>(prepared.size());
      if (!val.empty()) {
        const ValidationMetrics vm = validate_one_step(net, val);
        rec.val_pixel_acc = vm.pixel_acc;
        rec.val_iou_liver = vm.iou_liver;
        rec.val_iou_tumor = vm.iou_tumor;
      }
      report.epochs.push_back(std::move(rec));
    }
  }
  report.wall_seconds = now_seconds() - started;
  return report;
}

std::vector<BinarySample> materialize_stage2(const UNet& liver_net,
                                             std::span<const Sample> samples,
                                             double liver_threshold,
                                             const WindowSpec& window_spec,
                                             bool use_ground_truth_mask) {
  std::vector<BinarySample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    const MaskSet truth = derive_masks(s.labels);
    BinaryMask liver_mask;
    if (use_ground_truth_mask) {
      liver_mask = truth.liver_or_tumor;
    } else {
      const int sz = s.labels.height;
      std::vector<double> data(s.image.values().begin(), s.image.values().end());
      Tensor batch = Tensor::from_data({1, 1, sz, sz}, std::move(data));
      liver_mask = threshold(liver_net.forward_eval(batch), liver_threshold);
    }
    BinarySample b;
    b.image = masked_input(s.image, liver_mask, window_spec);
    b.target = BinaryMask(liver_mask.height, liver_mask.width);
    for (std::size_t i = 0; i < b.target.pixel_count(); ++i)
      b.target.pixels[i] =
          static_cast<std::uint8_t>(truth.tumor.pixels[i] & liver_mask.pixels[i]);
    out.push_back(std::move(b));
  }
  return out;
}

SequentialReports train_sequential(UNet& liver_net, UNet& tumor_net,
                                   std::span<const Sample> train,
                                   std::span<const Sample> val,
                                   const TrainConfig& cfg,
                                   const CascadeThresholds& thresholds,
                                   const WindowSpec& window_spec) {
  cfg.validate();
  thresholds.validate();
  if (train.empty())
    throw std::invalid_argument("train_sequential: empty dataset");
  if (liver_net.config().head != Head::binary_sigmoid ||
      tumor_net.config().head != Head::binary_sigmoid)
    throw std::invalid_argument(
        "train_sequential: both networks must have binary heads");

  Rng rng(cfg.seed);
  SequentialReports reports;

  // Stage 1: liver-or-tumor segmentation on the raw images.
  std::vector<BinarySample> stage1;
  stage1.reserve(train.size());
  for (const Sample& s : train)
    stage1.push_back({s.image, derive_masks(s.labels).liver_or_tumor});

  const Phase liver_phase{"liver", cfg.lr_initial, cfg.epochs_main,
                          LossMode::plain, cfg.fixed_alpha,
                          cfg.balanced_weighting};
  reports.liver = run_binary_phases(
      liver_net, stage1, std::span(&liver_phase, 1), cfg.batch_size,
      cfg.momentum, rng, [&](EpochRecord& rec) {
        if (val.empty()) return;
        ConfusionCounts counts;
        for (const Sample& s : val) {
          const int sz = s.labels.height;
          std::vector<double> data(s.image.values().begin(),
                                   s.image.values().end());
          BinaryMask pred = threshold(
              liver_net.forward_eval(
                  Tensor::from_data({1, 1, sz, sz}, std::move(data))),
              thresholds.liver);
          counts += confusion(pred, derive_masks(s.labels).liver_or_tumor);
        }
        rec.val_pixel_acc = pixel_accuracy(counts);
        rec.val_iou_liver = iou(counts);
      });

  // Stage 2: freeze the liver net and train on the masked data.
  const std::vector<BinarySample> stage2 =
      materialize_stage2(liver_net, train, thresholds.liver, window_spec,
                         cfg.stage2_ground_truth_mask);

  std::vector<Phase> tumor_phases;
  tumor_phases.push_back({"tumor", cfg.lr_initial, cfg.epochs_main,
                          LossMode::plain, cfg.fixed_alpha,
                          cfg.balanced_weighting});
  tumor_phases.push_back({"tumor-finetune", cfg.lr_finetune,
                          cfg.epochs_finetune, cfg.loss_mode, cfg.fixed_alpha,
                          cfg.balanced_weighting});
  reports.tumor = run_binary_phases(
      tumor_net, stage2, tumor_phases, cfg.batch_size, cfg.momentum, rng,
      [&](EpochRecord& rec) {
        if (val.empty()) return;
        const ValidationMetrics vm =
            validate_cascade(liver_net, tumor_net, val, thresholds, window_spec);
        rec.val_pixel_acc = vm.pixel_acc;
        rec.val_iou_liver = vm.iou_liver;
        rec.val_iou_tumor = vm.iou_tumor;
      });
  return reports;
}

double evaluate_joint_objective(const UNet& liver_net, const UNet& tumor_net,
                                std::span<const Sample> samples, double c,
                                const CascadeThresholds& thresholds,
                                const WindowSpec& window_spec) {
  if (samples.empty())
    throw std::invalid_argument("evaluate_joint_objective: empty sample set");
  const int sz = samples[0].labels.height;
  const std::size_t plane = static_cast<std::size_t>(sz) * sz;

  std::vector<double> liver_out_data, tumor_out_data;
  liver_out_data.reserve(samples.size() * plane);
  tumor_out_data.reserve(samples.size() * plane);
  std::vector<BinaryMask> liver_truth, tumor_truth, liver_masks;
  for (const Sample& s : samples) {
    const MaskSet truth = derive_masks(s.labels);
    std::vector<double> data(s.image.values().begin(), s.image.values().end());
    Tensor batch = Tensor::from_data({1, 1, sz, sz}, std::move(data));
    Tensor liver_out = liver_net.forward_eval(batch);
    BinaryMask mask = threshold(liver_out, thresholds.liver);
    Tensor tumor_out = tumor_net.forward_eval(
        [&] {
          Tensor masked = masked_input(s.image, mask, window_spec);
          std::vector<double> md(masked.values().begin(), masked.values().end());
          return Tensor::from_data({1, 1, sz, sz}, std::move(md));
        }());
    liver_out_data.insert(liver_out_data.end(), liver_out.values().begin(),
                          liver_out.values().end());
    tumor_out_data.insert(tumor_out_data.end(), tumor_out.values().begin(),
                          tumor_out.values().end());
    liver_truth.push_back(truth.liver_or_tumor);
    tumor_truth.push_back(truth.tumor);
    liver_masks.push_back(std::move(mask));
  }
  const int n = static_cast<int>(samples.size());
  return joint_loss(
      Tensor::from_data({n, 1, sz, sz}, std::move(liver_out_data)),
      Tensor::from_data({n, 1, sz, sz}, std::move(tumor_out_data)), liver_truth,
      tumor_truth, liver_masks, c);
}

ValidationMetrics validate_cascade(const UNet& liver_net, const UNet& tumor_net,
                                   std::span<const Sample> samples,
                                   const CascadeThresholds& thresholds,
                                   const WindowSpec& window_spec) {
  PixelCounters counters;
  for (const Sample& s : samples) {
    const SequentialPrediction pred =
        sequential_predict(liver_net, tumor_net, s.image, thresholds, window_spec);
    counters.add(pred.labels, s.labels);
  }
  return counters.metrics();
}

ValidationMetrics validate_one_step(const UNet& net,
                                    std::span<const Sample> samples) {
  PixelCounters counters;
  for (const Sample& s : samples) {
    const OneStepPrediction pred = one_step_predict(net, s.image);
    counters.add(pred.labels, s.labels);
  }
  return counters.metrics();
}

}  // namespace cseg
