#include "cascadeseg/unet.hpp"

#include <cmath>
#include <stdexcept>

#include "cascadeseg/autodiff.hpp"
#include "cascadeseg/ops.hpp"

namespace cseg {

namespace {

struct LayerSpec {
  std::string name;
  int in_channels;
  int out_channels;
  int kernel;  // spatial extent, square
};

// Convolution layers in construction order; the parameter list interleaves
// weight/bias per layer.
std::vector<LayerSpec> layer_plan(const UNetConfig& cfg) {
  std::vector<LayerSpec> plan;
  auto block = [&plan](const std::string& prefix, int in_ch, int out_ch) {
    plan.push_back({prefix + ".conv1", in_ch, out_ch, 3});
    plan.push_back({prefix + ".conv2", out_ch, out_ch, 3});
  };
  for (int i = 0; i < cfg.depth; ++i)
    block("enc" + std::to_string(i), i == 0 ? 1 : cfg.base_channels << (i - 1),
          cfg.base_channels << i);
  block("bottleneck", cfg.base_channels << (cfg.depth - 1),
        cfg.base_channels << cfg.depth);
  for (int i = cfg.depth - 1; i >= 0; --i)
    block("dec" + std::to_string(i),
          (cfg.base_channels << (i + 1)) + (cfg.base_channels << i),
          cfg.base_channels << i);
  plan.push_back({"head", cfg.base_channels, cfg.head_channels(), 1});
  return plan;
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void UNetConfig::validate() const {
  if (input_size < 2 || input_size % (1 << depth) != 0)
    throw std::invalid_argument(
        "UNetConfig: input_size " + std::to_string(input_size) +
        " must be positive and divisible by 2^depth = " +
        std::to_string(1 << depth));
  if (depth < 1)
    throw std::invalid_argument("UNetConfig: depth must be >= 1");
  if (base_channels < 1)
    throw std::invalid_argument("UNetConfig: base_channels must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("UNetConfig: dropout_rate must be in [0,1)");
}

UNet::UNet(const UNetConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  for (const LayerSpec& layer : layer_plan(config_)) {
    const int fan_in = layer.in_channels * layer.kernel * layer.kernel;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor w = Tensor::zeros(
        {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel},
        /*requires_grad=*/true);
    for (double& v : w.values()) v = round_f32(rng.uniform(-bound, bound));
    params_.push_back({layer.name + ".weight", w});
    params_.push_back(
        {layer.name + ".bias",
         Tensor::zeros({layer.out_channels}, /*requires_grad=*/true)});
  }
}

std::vector<std::string> UNet::parameter_names(const UNetConfig& config) {
  std::vector<std::string> names;
  for (const LayerSpec& layer : layer_plan(config)) {
    names.push_back(layer.name + ".weight");
    names.push_back(layer.name + ".bias");
  }
  return names;
}

std::int64_t UNet::parameter_count(const UNetConfig& config) {
  std::int64_t n = 0;
  for (const LayerSpec& layer : layer_plan(config))
    n += static_cast<std::int64_t>(layer.out_channels) *
             (layer.in_channels * layer.kernel * layer.kernel) +
         layer.out_channels;
  return n;
}

void UNet::set_parameters(const NetworkParams& loaded) {
  if (loaded.size() != params_.size())
    throw std::invalid_argument(
        "set_parameters: expected " + std::to_string(params_.size()) +
        " tensors, got " + std::to_string(loaded.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (loaded[i].name != params_[i].name)
      throw std::invalid_argument("set_parameters: tensor " + std::to_string(i) +
                                  " is named '" + loaded[i].name +
                                  "', expected '" + params_[i].name + "'");
    if (!same_shape(loaded[i].tensor.shape(), params_[i].tensor.shape()))
      throw std::invalid_argument(
          "set_parameters: '" + loaded[i].name + "' has shape " +
          shape_str(loaded[i].tensor.shape()) + ", expected " +
          shape_str(params_[i].tensor.shape()));
    auto src = loaded[i].tensor.values();
    auto dst = params_[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.begin());
    params_[i].tensor.zero_grad();
  }
}

void UNet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor UNet::block(const Tensor& x, int first_param_index) const {
  const Tensor& w1 = params_[static_cast<std::size_t>(first_param_index)].tensor;
  const Tensor& b1 = params_[static_cast<std::size_t>(first_param_index) + 1].tensor;
  const Tensor& w2 = params_[static_cast<std::size_t>(first_param_index) + 2].tensor;
  const Tensor& b2 = params_[static_cast<std::size_t>(first_param_index) + 3].tensor;
  Tensor h = relu(conv2d(x, w1, b1, Padding::same));
  return relu(conv2d(h, w2, b2, Padding::same));
}

Tensor UNet::forward(const Tensor& batch, bool training, Rng* rng) const {
  if (batch.rank() != 4 || batch.dim(1) != 1 ||
      batch.dim(2) != config_.input_size || batch.dim(3) != config_.input_size)
    throw std::invalid_argument(
        "forward: expected [N,1," + std::to_string(config_.input_size) + "," +
        std::to_string(config_.input_size) + "] input, got " +
        shape_str(batch.shape()));
  if (training && config_.dropout_rate > 0.0 && rng == nullptr)
    throw std::invalid_argument("forward: training mode needs an rng for dropout");

  const int block_stride = 4;  // weight+bias per conv, two convs per block
  int idx = 0;
  std::vector<Tensor> skips;
  Tensor cur = batch;
  for (int i = 0; i < config_.depth; ++i, idx += block_stride) {
    cur = block(cur, idx);
    skips.push_back(cur);
    cur = max_pool_2x2(cur);
  }
  cur = block(cur, idx);
  idx += block_stride;
  for (int i = config_.depth - 1; i >= 0; --i, idx += block_stride) {
    cur = concat_channels(upsample_nearest_2x(cur), skips[static_cast<std::size_t>(i)]);
    cur = block(cur, idx);
    if (training && config_.dropout_rate > 0.0)
      cur = dropout(cur, config_.dropout_rate, true, *rng);
  }
  cur = conv2d(cur, params_[static_cast<std::size_t>(idx)].tensor,
               params_[static_cast<std::size_t>(idx) + 1].tensor, Padding::same);
  return config_.head == Head::binary_sigmoid ? sigmoid(cur)
                                              : softmax_channels(cur);
}

Tensor UNet::forward_eval(const Tensor& batch) const {
  NoGradGuard no_grad;
  return forward(batch, /*training=*/false);
}

}  // namespace cseg
