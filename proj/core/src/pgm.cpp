#include "cascadeseg/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cseg {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("pgm: " + path + ": " + what);
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(path, "write failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

struct Header {
  int width = 0;
  int height = 0;
  long maxval = 0;
  std::size_t payload_offset = 0;
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// "P5", then three decimal fields separated by whitespace/comments, then a
// single whitespace byte before the payload.
Header parse_header(const std::string& path, const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(path, "bad magic (expected P5) at byte 0");
  std::size_t pos = 2;
  auto next_number = [&](const char* field) -> long {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size())
      fail(path, std::string("truncated header: missing ") + field +
                     " at byte " + std::to_string(pos));
    if (bytes[pos] < '0' || bytes[pos] > '9')
      fail(path, std::string("malformed ") + field + " at byte " +
                     std::to_string(pos));
    long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1 << 26)
        fail(path, std::string(field) + " too large at byte " +
                       std::to_string(pos));
      ++pos;
    }
    return v;
  };
  Header h;
  h.width = static_cast<int>(next_number("width"));
  h.height = static_cast<int>(next_number("height"));
  h.maxval = next_number("maxval");
  if (pos >= bytes.size() || !is_space(bytes[pos]))
    fail(path, "missing whitespace after maxval at byte " + std::to_string(pos));
  h.payload_offset = pos + 1;
  if (h.width < 1 || h.height < 1)
    fail(path, "degenerate image dimensions");
  if (static_cast<long>(h.width) * h.height > (1L << 26))
    fail(path, "image dimensions too large");
  return h;
}

void check_payload(const std::string& path, const std::string& bytes,
                   const Header& h, std::size_t bytes_per_sample) {
  const std::size_t expected =
      static_cast<std::size_t>(h.width) * h.height * bytes_per_sample;
  const std::size_t present = bytes.size() - h.payload_offset;
  if (present < expected)
    fail(path, "truncated payload at byte " + std::to_string(bytes.size()) +
                   " (expected " + std::to_string(expected) + " bytes, found " +
                   std::to_string(present) + ")");
  if (present > expected)
    fail(path, "trailing data after payload at byte " +
                   std::to_string(h.payload_offset + expected));
}

}  // namespace

void save_image_pgm(const Tensor& image, const std::string& path) {
  if (image.rank() != 2)
    fail(path, "image tensor must be [H,W], got " + shape_str(image.shape()));
  const int h = image.dim(0), w = image.dim(1);
  std::string bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                      "\n65535\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(h) * w * 2);
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0))
      fail(path, "image value " + std::to_string(v) + " outside [0,1]");
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  write_file(path, bytes);
}

Tensor load_image_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(path, bytes);
  if (h.maxval != 65535)
    fail(path, "unexpected maxval " + std::to_string(h.maxval) +
                   " for image (expected 65535)");
  check_payload(path, bytes, h, 2);
  std::vector<double> data(static_cast<std::size_t>(h.width) * h.height);
  const auto* p =
      reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const unsigned v = (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    data[i] = static_cast<double>(v) / 65535.0;
  }
  return Tensor::from_data({h.height, h.width}, std::move(data));
}

void save_label_pgm(const LabelMap& labels, const std::string& path) {
  std::string bytes = "P5\n" + std::to_string(labels.width) + " " +
                      std::to_string(labels.height) + "\n255\n";
  bytes.reserve(bytes.size() + labels.pixel_count());
  for (std::uint8_t v : labels.labels) {
    if (v > 2) fail(path, "label value " + std::to_string(v) + " outside {0,1,2}");
    bytes.push_back(static_cast<char>(v == 2 ? 255 : v == 1 ? 127 : 0));
  }
  write_file(path, bytes);
}

LabelMap load_label_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(path, bytes);
  if (h.maxval != 255)
    fail(path, "unexpected maxval " + std::to_string(h.maxval) +
                   " for label map (expected 255)");
  check_payload(path, bytes, h, 1);
  LabelMap labels(h.height, h.width);
  const auto* p =
      reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
    switch (p[i]) {
      case 0: labels.labels[i] = 0; break;
      case 127: labels.labels[i] = 1; break;
      case 255: labels.labels[i] = 2; break;
      default:
        fail(path, "invalid label sample " + std::to_string(p[i]) +
                       " at byte " + std::to_string(h.payload_offset + i) +
                       " (expected 0, 127 or 255)");
    }
  }
  return labels;
}

}  // namespace cseg
