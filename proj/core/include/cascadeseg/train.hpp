#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadeseg/losses.hpp"
#include "cascadeseg/phantom.hpp"
#include "cascadeseg/pipeline.hpp"
#include "cascadeseg/unet.hpp"

namespace cseg {

enum class LossMode { plain, fixed_alpha, balanced };

struct TrainConfig {
  double lr_initial = 0.001;
  double lr_finetune = 0.0001;
  double momentum = 0.9;
  int epochs_main = 50;
  int epochs_finetune = 20;
  int batch_size = 4;
  LossMode loss_mode = LossMode::balanced;
  double fixed_alpha = 0.02;
  BalancedWeighting balanced_weighting = BalancedWeighting::inverse_frequency;
  bool stage2_ground_truth_mask = false;
  double joint_c = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, continuous across the phases of one network
  std::string phase;
  double mean_loss = 0.0;
  std::optional<double> val_pixel_acc;
  std::optional<double> val_iou_liver;
  std::optional<double> val_iou_tumor;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

/// Image/target pair for binary-head training (stage 1 uses the
/// liver-or-tumor mask, stage 2 the masked tumor mask).
struct BinarySample {
  Tensor image;       // [H,W]
  BinaryMask target;
};

/// One fine-grained training phase over binary samples.
struct Phase {
  std::string name;
  double lr = 0.001;
  int epochs = 1;
  LossMode mode = LossMode::plain;
  double fixed_alpha = 0.02;
  BalancedWeighting weighting = BalancedWeighting::inverse_frequency;
};

/// Validation hook, runs after every epoch.
using ValidationFn = std::function<void(EpochRecord&)>;

/// SGD-with-momentum loop over (image, target) pairs: per-epoch reshuffle
/// from the rng. Each phase starts a fresh optimization episode (velocity
/// reset), so running phases through one call or through consecutive calls
/// with the same rng is bit-identical. Mean loss is averaged over all
/// samples of the epoch.
TrainReport run_binary_phases(UNet& net, std::span<const BinarySample> data,
                              std::span<const Phase> phases, int batch_size,
                              double momentum, Rng& rng,
                              const ValidationFn& validate = {});

/// One-step schedule: plain categorical cross-entropy for epochs_main at
/// lr_initial, then class-weighted cross-entropy for epochs_finetune at
/// lr_finetune (per-sample balanced weights; plain mode keeps the loss
/// unweighted instead).
TrainReport train_one_step(UNet& net, std::span<const Sample> train,
                           std::span<const Sample> val, const TrainConfig& cfg);

/// Stage-2 dataset: the liver mask (network output thresholded at t_a, or the
/// ground-truth mask when requested) gates both the windowed input image and
/// the tumor target.
std::vector<BinarySample> materialize_stage2(const UNet& liver_net,
                                             std::span<const Sample> samples,
                                             double liver_threshold,
                                             const WindowSpec& window,
                                             bool use_ground_truth_mask);

struct SequentialReports {
  TrainReport liver;
  TrainReport tumor;
};

/// Sequential schedule: trains the liver net on (X, A) with plain binary
/// cross-entropy, freezes it, materializes the masked stage-2 data, trains
/// the tumor net with plain BCE at lr_initial and refines it with the
/// configured weighted loss at lr_finetune.
SequentialReports train_sequential(UNet& liver_net, UNet& tumor_net,
                                   std::span<const Sample> train,
                                   std::span<const Sample> val,
                                   const TrainConfig& cfg,
                                   const CascadeThresholds& thresholds,
                                   const WindowSpec& window);

/// Joint objective of both networks over a sample set, evaluation only.
double evaluate_joint_objective(const UNet& liver_net, const UNet& tumor_net,
                                std::span<const Sample> samples, double c,
                                const CascadeThresholds& thresholds,
                                const WindowSpec& window);

/// Cascade validation metrics over a sample set: 3-class exact-match pixel
/// accuracy plus pooled per-class IoU.
struct ValidationMetrics {
  double pixel_acc = 0.0;
  double iou_liver = 0.0;
  double iou_tumor = 0.0;
};
ValidationMetrics validate_cascade(const UNet& liver_net, const UNet& tumor_net,
                                   std::span<const Sample> samples,
                                   const CascadeThresholds& thresholds,
                                   const WindowSpec& window);
ValidationMetrics validate_one_step(const UNet& net,
                                    std::span<const Sample> samples);

}  // namespace cseg
