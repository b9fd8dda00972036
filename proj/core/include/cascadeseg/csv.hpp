#pragma once

#include <optional>
#include <span>
#include <string>

#include "cascadeseg/metrics.hpp"
#include "cascadeseg/train.hpp"

namespace cseg {

/// Shortest round-trip decimal rendering of a double (locale-independent).
std::string fmt_double(double v);

/// `threshold,fpr,tpr` rows, header included.
void write_roc_csv(const RocCurve& curve, const std::string& path);

/// `bin_low,bin_high,count` rows.
void write_histogram_csv(std::span<const HistogramBin> bins,
                         const std::string& path);

/// `class,pixel_acc,iou,rand_index,rauc,threshold` with rows liver and tumor;
/// absent values are written as NA.
void write_report_csv(const MetricsReport& report, const std::string& path);

/// `epoch,phase,mean_loss,val_pixel_acc,val_iou_liver,val_iou_tumor`;
/// reports are concatenated in order, absent metrics written as NA.
void write_epochs_csv(std::span<const TrainReport* const> reports,
                      const std::string& path);

}  // namespace cseg
