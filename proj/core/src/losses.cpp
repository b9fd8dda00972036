#include "cascadeseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cascadeseg/autodiff.hpp"

namespace cseg {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double clamp_prob(double p) {
  return std::min(1.0 - kLossEps, std::max(kLossEps, p));
}

bool in_open_band(double p) { return p > kLossEps && p < 1.0 - kLossEps; }

Tensor make_loss_output(double value, bool track) {
  Tensor out = Tensor::scalar(value);
  out.set_requires_grad(track);
  return out;
}

// Shared core of the binary losses: per-element background weight alpha_i and
// foreground weight (1 - alpha_i), mean over all M elements.
Tensor weighted_bce_impl(const Tensor& pred, const Tensor& target,
                         std::vector<double> elem_alpha) {
  require(same_shape(pred.shape(), target.shape()),
          "weighted_bce: prediction " + shape_str(pred.shape()) +
              " and target " + shape_str(target.shape()) + " differ");
  const std::size_t m = pred.values().size();
  require(m > 0, "weighted_bce: empty prediction");

  const double* p = pred.values().data();
  const double* t = target.values().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double pc = clamp_prob(p[i]);
    const double a = elem_alpha[i];
    acc -= a * (1.0 - t[i]) * std::log(1.0 - pc) +
           (1.0 - a) * t[i] * std::log(pc);
  }
  const double inv_m = 1.0 / static_cast<double>(m);

  const bool track = grad_enabled() && pred.requires_grad();
  Tensor out = make_loss_output(acc * inv_m, track);
  if (track) {
    auto p_node = pred.node();
    auto t_node = target.node();
    auto out_node = out.node();
    auto alpha = std::make_shared<std::vector<double>>(std::move(elem_alpha));
    Tape::current().record(out_node, [p_node, t_node, out_node, alpha, inv_m]() {
      p_node->ensure_grad();
      double* dp = p_node->grad.data();
      const double* pv = p_node->value.data();
      const double* tv = t_node->value.data();
      const double g = out_node->grad[0] * inv_m;
      for (std::size_t i = 0; i < p_node->value.size(); ++i) {
        if (!in_open_band(pv[i])) continue;
        const double a = (*alpha)[i];
        dp[i] -= g * ((1.0 - a) * tv[i] / pv[i] -
                      a * (1.0 - tv[i]) / (1.0 - pv[i]));
      }
    });
  }
  return out;
}

std::vector<double> broadcast_alpha(const Tensor& pred,
                                    std::span<const double> per_sample) {
  require(pred.rank() == 4, "weighted_bce: batched form needs [N,1,H,W], got " +
                                shape_str(pred.shape()));
  require(static_cast<std::size_t>(pred.dim(0)) == per_sample.size(),
          "weighted_bce: got " + std::to_string(per_sample.size()) +
              " alphas for batch of " + std::to_string(pred.dim(0)));
  const std::size_t per = static_cast<std::size_t>(pred.numel()) / per_sample.size();
  std::vector<double> elem(static_cast<std::size_t>(pred.numel()));
  for (std::size_t n = 0; n < per_sample.size(); ++n) {
    require(per_sample[n] > 0.0 && per_sample[n] < 1.0,
            "weighted_bce: alpha must be in (0,1), got " +
                std::to_string(per_sample[n]));
    std::fill(elem.begin() + n * per, elem.begin() + (n + 1) * per, per_sample[n]);
  }
  return elem;
}

void validate_partition(const Tensor& onehot) {
  const double* t = onehot.values().data();
  const int n_count = onehot.dim(0);
  const std::size_t plane =
      static_cast<std::size_t>(onehot.dim(2)) * onehot.dim(3);
  for (int n = 0; n < n_count; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const double a = t[base + p], b = t[base + plane + p],
                   c = t[base + 2 * plane + p];
      const bool binary = (a == 0.0 || a == 1.0) && (b == 0.0 || b == 1.0) &&
                          (c == 0.0 || c == 1.0);
      if (!binary || a + b + c != 1.0)
        throw std::invalid_argument(
            "categorical_cross_entropy: target is not a one-hot partition at "
            "pixel " + std::to_string(p) + " of sample " + std::to_string(n));
    }
  }
}

Tensor cce_impl(const Tensor& pred, const Tensor& onehot,
                std::span<const ClassWeights> per_sample) {
  require(pred.rank() == 4 && pred.dim(1) == 3,
          "categorical_cross_entropy: prediction must be [N,3,H,W], got " +
              shape_str(pred.shape()));
  require(same_shape(pred.shape(), onehot.shape()),
          "categorical_cross_entropy: prediction " + shape_str(pred.shape()) +
              " and target " + shape_str(onehot.shape()) + " differ");
  require(static_cast<std::size_t>(pred.dim(0)) == per_sample.size(),
          "categorical_cross_entropy: weight count mismatch");
  validate_partition(onehot);

  const int n_count = pred.dim(0);
  const std::size_t plane = static_cast<std::size_t>(pred.dim(2)) * pred.dim(3);
  const std::size_t m = static_cast<std::size_t>(n_count) * plane;
  const double inv_m = 1.0 / static_cast<double>(m);

  const double* p = pred.values().data();
  const double* t = onehot.values().data();
  double acc = 0.0;
  auto weights = std::make_shared<std::vector<double>>();
  weights->reserve(3 * per_sample.size());
  for (const ClassWeights& w : per_sample) {
    weights->push_back(w.tumor);
    weights->push_back(w.liver);
    weights->push_back(w.other);
  }
  for (int n = 0; n < n_count; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * 3 * plane;
    const double* w = weights->data() + 3 * n;
    for (int c = 0; c < 3; ++c) {
      const double wc = w[c];
      const double* pc = p + base + c * plane;
      const double* tc = t + base + c * plane;
      double ch = 0.0;
      for (std::size_t i = 0; i < plane; ++i)
        if (tc[i] != 0.0) ch += std::log(clamp_prob(pc[i]));
      acc -= wc * ch;
    }
  }

  const bool track = grad_enabled() && pred.requires_grad();
  Tensor out = make_loss_output(acc * inv_m, track);
  if (track) {
    auto p_node = pred.node();
    auto t_node = onehot.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [p_node, t_node, out_node, weights, n_count,
                                      plane, inv_m]() {
      p_node->ensure_grad();
      double* dp = p_node->grad.data();
      const double* pv = p_node->value.data();
      const double* tv = t_node->value.data();
      const double g = out_node->grad[0] * inv_m;
      for (int n = 0; n < n_count; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * 3 * plane;
        const double* w = weights->data() + 3 * n;
        for (int c = 0; c < 3; ++c) {
          const double wc = w[c];
          const std::size_t off = base + c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (tv[off + i] == 0.0 || !in_open_band(pv[off + i])) continue;
            dp[off + i] -= g * wc / pv[off + i];
          }
        }
      }
    });
  }
  return out;
}

double bce_value(const double* pred, const std::uint8_t* target, std::size_t m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = clamp_prob(pred[i]);
    acc -= target[i] ? std::log(p) : std::log(1.0 - p);
  }
  return acc / static_cast<double>(m);
}

}  // namespace

Tensor binary_cross_entropy(const Tensor& pred, const Tensor& target) {
  // Plain BCE weights both terms by 1: alpha and (1-alpha) both 1 is not a
  // valid single alpha, so build the element weights directly.
  require(same_shape(pred.shape(), target.shape()),
          "binary_cross_entropy: prediction " + shape_str(pred.shape()) +
              " and target " + shape_str(target.shape()) + " differ");
  const std::size_t m = pred.values().size();
  require(m > 0, "binary_cross_entropy: empty prediction");
  const double* p = pred.values().data();
  const double* t = target.values().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double pc = clamp_prob(p[i]);
    acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  const double inv_m = 1.0 / static_cast<double>(m);

  const bool track = grad_enabled() && pred.requires_grad();
  Tensor out = make_loss_output(acc * inv_m, track);
  if (track) {
    auto p_node = pred.node();
    auto t_node = target.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [p_node, t_node, out_node, inv_m]() {
      p_node->ensure_grad();
      double* dp = p_node->grad.data();
      const double* pv = p_node->value.data();
      const double* tv = t_node->value.data();
      const double g = out_node->grad[0] * inv_m;
      for (std::size_t i = 0; i < p_node->value.size(); ++i) {
        if (!in_open_band(pv[i])) continue;
        dp[i] -= g * (tv[i] / pv[i] - (1.0 - tv[i]) / (1.0 - pv[i]));
      }
    });
  }
  return out;
}

Tensor weighted_bce(const Tensor& pred, const Tensor& target, double alpha) {
  require(alpha > 0.0 && alpha < 1.0,
          "weighted_bce: alpha must be in (0,1), got " + std::to_string(alpha));
  return weighted_bce_impl(pred, target,
                           std::vector<double>(pred.values().size(), alpha));
}

Tensor weighted_bce(const Tensor& pred, const Tensor& target,
                    std::span<const double> per_sample_alpha) {
  return weighted_bce_impl(pred, target, broadcast_alpha(pred, per_sample_alpha));
}

double balanced_alpha(const BinaryMask& target) {
  if (target.pixel_count() == 0)
    throw std::invalid_argument("balanced_alpha: empty mask");
  return 1.0 - static_cast<double>(target.count_ones()) /
                   static_cast<double>(target.pixel_count());
}

double training_alpha(const BinaryMask& target, BalancedWeighting mode) {
  const double background_fraction = balanced_alpha(target);
  const double a = mode == BalancedWeighting::inverse_frequency
                       ? 1.0 - background_fraction
                       : background_fraction;
  return std::min(1.0 - kLossEps, std::max(kLossEps, a));
}

ClassWeights balanced_class_weights(const BinaryMask& tumor,
                                    const BinaryMask& liver,
                                    const BinaryMask& other) {
  const std::size_t total = tumor.pixel_count();
  if (total == 0 || liver.pixel_count() != total || other.pixel_count() != total)
    throw std::invalid_argument("balanced_class_weights: mask sizes differ");
  const std::size_t nt = tumor.count_ones();
  const std::size_t nl = liver.count_ones();
  const std::size_t no = other.count_ones();
  if (nt + nl + no != total)
    throw std::invalid_argument(
        "balanced_class_weights: masks do not partition the image");
  for (std::size_t i = 0; i < total; ++i)
    if (tumor.pixels[i] + liver.pixels[i] + other.pixels[i] != 1)
      throw std::invalid_argument(
          "balanced_class_weights: masks overlap at pixel " + std::to_string(i));
  const double d = static_cast<double>(total);
  return ClassWeights{1.0 - static_cast<double>(nt) / d,
                      1.0 - static_cast<double>(nl) / d,
                      1.0 - static_cast<double>(no) / d};
}

Tensor categorical_cross_entropy(const Tensor& pred, const Tensor& onehot,
                                 const std::optional<ClassWeights>& weights) {
  const ClassWeights w = weights.value_or(ClassWeights{});
  std::vector<ClassWeights> per(static_cast<std::size_t>(pred.dim(0)), w);
  return cce_impl(pred, onehot, per);
}

Tensor categorical_cross_entropy(const Tensor& pred, const Tensor& onehot,
                                 std::span<const ClassWeights> per_sample) {
  return cce_impl(pred, onehot, per_sample);
}

double joint_loss(const Tensor& liver_out, const Tensor& tumor_out,
                  std::span<const BinaryMask> liver_truth,
                  std::span<const BinaryMask> tumor_truth,
                  std::span<const BinaryMask> liver_mask, double c) {
  require(c >= 0.0 && c <= 1.0,
          "joint_loss: c must be in [0,1], got " + std::to_string(c));
  require(liver_out.rank() == 4 && tumor_out.rank() == 4,
          "joint_loss: outputs must be [N,1,H,W]");
  const std::size_t n = static_cast<std::size_t>(liver_out.dim(0));
  require(n > 0 && n == static_cast<std::size_t>(tumor_out.dim(0)) &&
              n == liver_truth.size() && n == tumor_truth.size() &&
              n == liver_mask.size(),
          "joint_loss: sample counts differ");
  const std::size_t plane =
      static_cast<std::size_t>(liver_out.dim(2)) * liver_out.dim(3);

  double liver_acc = 0.0, tumor_acc = 0.0;
  std::vector<std::uint8_t> masked(plane);
  for (std::size_t k = 0; k < n; ++k) {
    liver_acc += bce_value(liver_out.values().data() + k * plane,
                           liver_truth[k].pixels.data(), plane);
    for (std::size_t i = 0; i < plane; ++i)
      masked[i] = static_cast<std::uint8_t>(tumor_truth[k].pixels[i] &
                                            liver_mask[k].pixels[i]);
    tumor_acc += bce_value(tumor_out.values().data() + k * plane, masked.data(),
                           plane);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return c * liver_acc * inv_n + (1.0 - c) * tumor_acc * inv_n;
}

}  // namespace cseg
