#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cascadeseg/optim.hpp"
#include "cascadeseg/rng.hpp"
#include "cascadeseg/tensor.hpp"

namespace cseg {

enum class Head { binary_sigmoid, softmax3 };

struct UNetConfig {
  int input_size = 64;     // square, divisible by 2^depth
  int depth = 3;           // down/up levels
  int base_channels = 8;   // channels at the top level, doubling per level
  double dropout_rate = 0.4;
  Head head = Head::binary_sigmoid;

  void validate() const;
  int head_channels() const { return head == Head::softmax3 ? 3 : 1; }
};

/// U-Net with `depth` contracting blocks (2x conv3x3+relu, then 2x2 max
/// pool), a bottleneck block, and a symmetric expanding path (nearest 2x
/// upsample, skip concat with the upsampled features first, 2x conv3x3+relu,
/// dropout), closed by a 1x1 convolution into sigmoid or 3-way softmax.
///
/// Parameter names are a pure function of the config, in construction order:
///   enc{i}.conv{1,2}.{weight,bias}     i = 0..depth-1, top down
///   bottleneck.conv{1,2}.{weight,bias}
///   dec{i}.conv{1,2}.{weight,bias}     i = depth-1..0
///   head.{weight,bias}
/// enc{i} produces base_channels<<i channels; the bottleneck produces
/// base_channels<<depth; dec{i} consumes the upsampled lower level plus the
/// enc{i} skip and produces base_channels<<i.
class UNet {
 public:
  /// Builds and initializes parameters: kernels uniform in [-b, b] with
  /// b = sqrt(6 / fan_in), biases zero, drawn in parameter order and rounded
  /// to float32-representable values so checkpoints roundtrip bit-exactly.
  UNet(const UNetConfig& config, Rng& rng);

  static std::vector<std::string> parameter_names(const UNetConfig& config);
  static std::int64_t parameter_count(const UNetConfig& config);

  const UNetConfig& config() const { return config_; }
  NetworkParams& parameters() { return params_; }
  const NetworkParams& parameters() const { return params_; }

  /// Copies values from a loaded parameter set; names, order and shapes must
  /// match this network exactly.
  void set_parameters(const NetworkParams& loaded);
  void zero_grad();

  /// Runs the network on an [N,1,S,S] batch with S = config.input_size.
  /// Training mode applies dropout (rng required when dropout_rate > 0) and
  /// records the tape when gradients are enabled; evaluation mode is
  /// deterministic.
  Tensor forward(const Tensor& batch, bool training, Rng* rng = nullptr) const;

  /// Evaluation-mode forward with tape recording disabled.
  Tensor forward_eval(const Tensor& batch) const;

 private:
  Tensor block(const Tensor& x, int first_param_index) const;

  UNetConfig config_;
  NetworkParams params_;
};

}  // namespace cseg
