#include "cascadeseg/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace cseg {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("csv: cannot open " + path + " for writing");
  return out;
}

std::string opt_str(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "NA";
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points)
    out << fmt_double(p.threshold) << ',' << fmt_double(p.fpr) << ','
        << fmt_double(p.tpr) << '\n';
}

void write_histogram_csv(std::span<const HistogramBin> bins,
                         const std::string& path) {
  std::ofstream out = open_out(path);
  out << "bin_low,bin_high,count\n";
  for (const HistogramBin& b : bins)
    out << fmt_double(b.lo) << ',' << fmt_double(b.hi) << ',' << b.count << '\n';
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "class,pixel_acc,iou,rand_index,rauc,threshold\n";
  out << "liver," << fmt_double(report.liver.pixel_accuracy) << ','
      << fmt_double(report.liver.iou) << ','
      << fmt_double(report.liver.rand_index) << ",NA,NA\n";
  out << "tumor," << fmt_double(report.tumor.pixel_accuracy) << ','
      << fmt_double(report.tumor.iou) << ','
      << fmt_double(report.tumor.rand_index) << ','
      << opt_str(report.restricted_auc) << ','
      << opt_str(report.chosen_threshold) << '\n';
}

void write_epochs_csv(std::span<const TrainReport* const> reports,
                      const std::string& path) {
  std::ofstream out = open_out(path);
  out << "epoch,phase,mean_loss,val_pixel_acc,val_iou_liver,val_iou_tumor\n";
  for (const TrainReport* report : reports)
    for (const EpochRecord& r : report->epochs)
      out << r.epoch << ',' << r.phase << ',' << fmt_double(r.mean_loss) << ','
          << opt_str(r.val_pixel_acc) << ',' << opt_str(r.val_iou_liver) << ','
          << opt_str(r.val_iou_tumor) << '\n';
}

}  // namespace cseg
