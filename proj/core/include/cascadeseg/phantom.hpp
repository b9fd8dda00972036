#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cascadeseg/masks.hpp"
#include "cascadeseg/rng.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

/// Synthetic liver/tumor phantom: one liver-like ellipse containing small
/// tumor blobs, plus liver-intensity distractor ellipses in the background.
/// Radii are fractions of the image size.
struct PhantomSpec {
  int size = 64;
  std::pair<double, double> liver_radius_range{0.22, 0.35};
  std::pair<int, int> tumor_count_range{1, 1};
  std::pair<double, double> tumor_radius_range{0.06, 0.12};
  double background_mean = 0.15;
  double liver_mean = 0.55;
  double tumor_mean = 0.85;
  double noise_sigma = 0.05;
  std::pair<int, int> distractor_count_range{0, 3};
  std::pair<double, double> distractor_radius_range{0.05, 0.12};
  std::uint64_t seed = 42;

  void validate() const;
};

struct Sample {
  Tensor image;    // [size,size], values in [0,1]
  LabelMap labels;
};

/// Analytic liver ellipse of one phantom, for containment checks.
struct LiverEllipse {
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;
  double angle = 0;  // radians

  bool contains(double x, double y) const;
};

/// Renders one sample, fully determined by (spec, index). Labels are decided
/// before noise; tumor pixels are always inside the liver ellipse, reported
/// through `liver` when requested.
Sample generate_phantom(const PhantomSpec& spec, std::uint64_t index,
                        LiverEllipse* liver = nullptr);

struct Dataset {
  std::vector<Sample> train, val, test;
};

/// Splits are disjoint index ranges: [0, n_train), [n_train, n_train+n_val),
/// [n_train+n_val, n_train+n_val+n_test).
Dataset make_dataset(const PhantomSpec& spec, int n_train, int n_val, int n_test);

}  // namespace cseg
