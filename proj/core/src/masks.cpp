#include "cascadeseg/masks.hpp"

#include <stdexcept>

namespace cseg {

std::size_t BinaryMask::count_ones() const {
  std::size_t n = 0;
  for (std::uint8_t p : pixels) n += p;
  return n;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  std::vector<double> data(mask.pixel_count());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<double>(mask.pixels[i]);
  return Tensor::from_data({1, 1, mask.height, mask.width}, std::move(data));
}

Tensor onehot_to_tensor(const BinaryMask& tumor, const BinaryMask& liver,
                        const BinaryMask& other) {
  if (tumor.height != liver.height || tumor.height != other.height ||
      tumor.width != liver.width || tumor.width != other.width)
    throw std::invalid_argument("onehot_to_tensor: mask sizes differ");
  const std::size_t plane = tumor.pixel_count();
  std::vector<double> data(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    data[i] = static_cast<double>(tumor.pixels[i]);
    data[plane + i] = static_cast<double>(liver.pixels[i]);
    data[2 * plane + i] = static_cast<double>(other.pixels[i]);
  }
  return Tensor::from_data({1, 3, tumor.height, tumor.width}, std::move(data));
}

}  // namespace cseg
