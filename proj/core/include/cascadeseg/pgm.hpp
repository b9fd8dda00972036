#pragma once

#include <string>

#include "cascadeseg/masks.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

/// Binary PGM (P5), maxval 65535, 16-bit big-endian samples with
/// value = round(v * 65535). Image values must lie in [0,1].
void save_image_pgm(const Tensor& image, const std::string& path);

/// Inverse of save_image_pgm within 1/65535 per pixel. Rejects malformed
/// headers, wrong maxval, truncated payloads and trailing data, each with a
/// byte-offset diagnostic.
Tensor load_image_pgm(const std::string& path);

/// Binary PGM (P5), maxval 255, labels encoded 0 -> 0, 1 -> 127, 2 -> 255.
void save_label_pgm(const LabelMap& labels, const std::string& path);

/// Exact inverse of save_label_pgm; any sample outside {0,127,255} is
/// rejected.
LabelMap load_label_pgm(const std::string& path);

}  // namespace cseg
