#pragma once

#include <cstdint>
#include <vector>

#include "cascadeseg/tensor.hpp"

namespace cseg {

/// Per-pixel class image: 0 background/other tissue, 1 liver, 2 tumor.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;  // row-major, values in {0,1,2}

  LabelMap() = default;
  LabelMap(int h, int w) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return labels.size(); }

  bool operator==(const LabelMap&) const = default;
};

/// Per-pixel {0,1} image.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, values in {0,1}

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return pixels.size(); }
  std::size_t count_ones() const;

  bool operator==(const BinaryMask&) const = default;
};

/// Mask as a [1,1,H,W] tensor of 0.0/1.0 values (no gradient tracking).
Tensor mask_to_tensor(const BinaryMask& mask);

/// One-hot [1,3,H,W] tensor with channel order (tumor, liver, other).
Tensor onehot_to_tensor(const BinaryMask& tumor, const BinaryMask& liver,
                        const BinaryMask& other);

}  // namespace cseg
