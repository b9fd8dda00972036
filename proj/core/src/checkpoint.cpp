#include "cascadeseg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

namespace cseg {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kMetaName = "meta/config";

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint: " + path + ": " + what);
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void put_record(std::string& out, const std::string& name, const Shape& shape,
                std::span<const double> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (int e : shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : values) put_f32(out, static_cast<float>(v));
}

struct Reader {
  const std::string& path;
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* field) {
    if (bytes.size() - pos < n)
      fail(path, std::string("truncated ") + field + " at byte " +
                     std::to_string(pos) + " (need " + std::to_string(n) +
                     " bytes, have " + std::to_string(bytes.size() - pos) + ")");
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const NetworkParams& params,
                     const std::optional<UNetConfig>& config,
                     const std::string& path) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size() + (config ? 1 : 0)));
  if (config) {
    const double meta[5] = {
        static_cast<double>(config->input_size), static_cast<double>(config->depth),
        static_cast<double>(config->base_channels), config->dropout_rate,
        config->head == Head::softmax3 ? 1.0 : 0.0};
    put_record(out, kMetaName, {5}, meta);
  }
  for (const NamedTensor& p : params)
    put_record(out, p.name, p.tensor.shape(), p.tensor.values());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(path, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());

  Reader r{path, bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail(path, "bad magic");
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion)
    fail(path, "unsupported version " + std::to_string(version) +
                   " (expected " + std::to_string(kVersion) + ")");
  const std::uint32_t count = r.u32("tensor count");
  if (count > 1u << 20) fail(path, "implausible tensor count");

  Checkpoint ckpt;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 4096)
      fail(path, "implausible name length " + std::to_string(name_len) +
                     " at byte " + std::to_string(r.pos - 4));
    const std::string name = r.str(name_len, "name");
    if (!seen.insert(name).second)
      fail(path, "duplicate tensor name '" + name + "'");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8)
      fail(path, "implausible rank " + std::to_string(rank) + " for '" + name + "'");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t e = r.u32("extent");
      if (e > 1u << 24)
        fail(path, "implausible extent " + std::to_string(e) + " for '" + name + "'");
      shape.push_back(static_cast<int>(e));
      numel *= e;
      if (numel > 1u << 28)
        fail(path, "implausible tensor size for '" + name + "'");
    }
    std::vector<double> values(static_cast<std::size_t>(numel));
    r.need(4 * values.size(), "tensor values");
    for (double& v : values) v = static_cast<double>(r.f32("value"));

    if (name == kMetaName) {
      if (shape != Shape{5}) fail(path, "malformed meta/config record");
      UNetConfig cfg;
      cfg.input_size = static_cast<int>(values[0]);
      cfg.depth = static_cast<int>(values[1]);
      cfg.base_channels = static_cast<int>(values[2]);
      cfg.dropout_rate = values[3];
      cfg.head = values[4] == 1.0 ? Head::softmax3 : Head::binary_sigmoid;
      ckpt.config = cfg;
    } else {
      ckpt.params.push_back(
          {name, Tensor::from_data(std::move(shape), std::move(values))});
    }
  }
  if (r.pos != bytes.size())
    fail(path, "trailing data after last tensor at byte " + std::to_string(r.pos));
  return ckpt;
}

UNet network_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.config)
    throw std::runtime_error(
        "network_from_checkpoint: checkpoint carries no meta/config record");
  Rng rng(0);
  UNet net(*ckpt.config, rng);
  net.set_parameters(ckpt.params);
  return net;
}

}  // namespace cseg
