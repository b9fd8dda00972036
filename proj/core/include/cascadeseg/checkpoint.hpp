#pragma once

#include <optional>
#include <string>

#include "cascadeseg/optim.hpp"
#include "cascadeseg/unet.hpp"

namespace cseg {

/// Network checkpoint, single file, little-endian throughout:
///   magic "SEGC" (4 bytes)
///   format version, u32 (currently 1)
///   tensor count, u32
///   per tensor: name length u32, UTF-8 name, rank u32, extents u32 each,
///               values as raw 32-bit IEEE-754
/// When a config is attached it is stored as the first record, named
/// "meta/config" with extent [5]: input_size, depth, base_channels,
/// dropout_rate, head code (0 = binary_sigmoid, 1 = softmax3). Loading
/// rejects unknown versions, truncations, duplicate names and trailing data,
/// each with a distinct diagnostic.
void save_checkpoint(const NetworkParams& params,
                     const std::optional<UNetConfig>& config,
                     const std::string& path);

struct Checkpoint {
  NetworkParams params;
  std::optional<UNetConfig> config;
};

Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a network from a checkpoint that carries its config.
UNet network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cseg
