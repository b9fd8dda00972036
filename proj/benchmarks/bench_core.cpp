#include <benchmark/benchmark.h>

#include "cascadeseg/autodiff.hpp"
#include "cascadeseg/losses.hpp"
#include "cascadeseg/metrics.hpp"
#include "cascadeseg/ops.hpp"
#include "cascadeseg/phantom.hpp"
#include "cascadeseg/pipeline.hpp"
#include "cascadeseg/unet.hpp"

using namespace cseg;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void bm_conv2d_forward(benchmark::State& state) {
  Rng rng(1);
  const int c = static_cast<int>(state.range(0));
  Tensor input = rand_tensor({4, c, 64, 64}, rng);
  Tensor kernel = rand_tensor({c, c, 3, 3}, rng);
  Tensor bias = rand_tensor({c}, rng);
  for (auto _ : state) {
    Tensor out = conv2d(input, kernel, bias, Padding::same);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * c * c * 9 * 64 * 64 * 2);
}
BENCHMARK(bm_conv2d_forward)->Arg(8)->Arg(16)->Arg(32);

void bm_conv2d_train_step(benchmark::State& state) {
  Rng rng(2);
  const int c = static_cast<int>(state.range(0));
  Tensor input = rand_tensor({4, c, 64, 64}, rng);
  Tensor kernel = rand_tensor({c, c, 3, 3}, rng, true);
  Tensor bias = rand_tensor({c}, rng, true);
  for (auto _ : state) {
    Tape::current().clear();
    kernel.zero_grad();
    bias.zero_grad();
    Tensor loss = mean_all(conv2d(input, kernel, bias, Padding::same));
    backward(loss);
    benchmark::DoNotOptimize(kernel.grad().data());
  }
  Tape::current().clear();
}
BENCHMARK(bm_conv2d_train_step)->Arg(8)->Arg(16)->Arg(32);

void bm_unet_forward(benchmark::State& state) {
  UNetConfig cfg{64, 3, 8, 0.0, Head::binary_sigmoid};
  Rng rng(3);
  UNet net(cfg, rng);
  Rng data_rng(4);
  Tensor batch = rand_tensor({4, 1, 64, 64}, data_rng);
  for (auto _ : state) {
    Tensor out = net.forward_eval(batch);
    benchmark::DoNotOptimize(out.values().data());
  }
}
BENCHMARK(bm_unet_forward);

void bm_unet_train_step(benchmark::State& state) {
  UNetConfig cfg{64, 3, 8, 0.4, Head::binary_sigmoid};
  Rng rng(5);
  UNet net(cfg, rng);
  Rng data_rng(6);
  Tensor batch = rand_tensor({4, 1, 64, 64}, data_rng);
  Tensor target = Tensor::zeros({4, 1, 64, 64});
  for (double& v : target.values()) v = data_rng.uniform() < 0.3 ? 1.0 : 0.0;
  Rng train_rng(7);
  for (auto _ : state) {
    Tape::current().clear();
    net.zero_grad();
    Tensor loss = binary_cross_entropy(net.forward(batch, true, &train_rng), target);
    backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  Tape::current().clear();
}
BENCHMARK(bm_unet_train_step);

void bm_generate_phantom(benchmark::State& state) {
  PhantomSpec spec;
  std::uint64_t index = 0;
  for (auto _ : state) {
    Sample s = generate_phantom(spec, index++);
    benchmark::DoNotOptimize(s.image.values().data());
  }
}
BENCHMARK(bm_generate_phantom);

void bm_rand_index(benchmark::State& state) {
  Rng rng(8);
  LabelMap a(64, 64), b(64, 64);
  for (auto& v : a.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
  for (auto& v : b.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
  for (auto _ : state) benchmark::DoNotOptimize(rand_index(a, b));
}
BENCHMARK(bm_rand_index);

void bm_restricted_roc(benchmark::State& state) {
  Rng rng(9);
  std::vector<Tensor> probs;
  std::vector<BinaryMask> truths;
  for (int k = 0; k < 32; ++k) {
    Tensor p = Tensor::zeros({64, 64});
    BinaryMask t(64, 64);
    for (std::size_t i = 0; i < t.pixel_count(); ++i) {
      p.values()[i] = rng.uniform();
      t.pixels[i] = rng.uniform() < 0.05;
    }
    probs.push_back(p);
    truths.push_back(t);
  }
  for (auto _ : state) {
    auto curve = restricted_roc(probs, truths);
    benchmark::DoNotOptimize(curve->points.size());
  }
}
BENCHMARK(bm_restricted_roc);

}  // namespace

BENCHMARK_MAIN();
