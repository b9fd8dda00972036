#include "cascadeseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace cseg {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_output(Shape shape, bool track) {
  Tensor out = Tensor::zeros(std::move(shape));
  out.set_requires_grad(track);
  return out;
}

// Zero-padded copy of one [C,H,W] image block, or the raw rows when ph=pw=0.
void pad_image(const double* src, int c_count, int h, int w, int ph, int pw,
               double* dst) {
  const int hp = h + 2 * ph;
  const int wp = w + 2 * pw;
  std::fill(dst, dst + static_cast<std::size_t>(c_count) * hp * wp, 0.0);
  for (int c = 0; c < c_count; ++c) {
    for (int y = 0; y < h; ++y) {
      const double* s = src + (static_cast<std::size_t>(c) * h + y) * w;
      double* d = dst + (static_cast<std::size_t>(c) * hp + y + ph) * wp + pw;
      std::copy(s, s + w, d);
    }
  }
}

// out[x] += sum of the 3x3 window at p0/p1/p2 weighted by k[0..8]; the nine
// independent FMAs per output element vectorize without reassociation.
inline void corr3x3_row(const double* p0, const double* p1, const double* p2,
                        const double* k, double* out, int w) {
  const double k0 = k[0], k1 = k[1], k2 = k[2];
  const double k3 = k[3], k4 = k[4], k5 = k[5];
  const double k6 = k[6], k7 = k[7], k8 = k[8];
  for (int x = 0; x < w; ++x)
    out[x] += k0 * p0[x] + k1 * p0[x + 1] + k2 * p0[x + 2] +
              k3 * p1[x] + k4 * p1[x + 1] + k5 * p1[x + 2] +
              k6 * p2[x] + k7 * p2[x + 1] + k8 * p2[x + 2];
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              Padding padding) {
  require(input.rank() == 4, "conv2d: input must be [N,C,H,W], got " +
                                 shape_str(input.shape()));
  require(kernel.rank() == 4, "conv2d: kernel must be [F,C,kH,kW], got " +
                                  shape_str(kernel.shape()));
  const int n_count = input.dim(0), c_count = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  const int f_count = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(1) == c_count,
          "conv2d: channel mismatch between input " + shape_str(input.shape()) +
              " and kernel " + shape_str(kernel.shape()));
  require(kh % 2 == 1 && kw % 2 == 1,
          "conv2d: kernel spatial extents must be odd, got " +
              shape_str(kernel.shape()));
  require(bias.rank() == 1 && bias.dim(0) == f_count,
          "conv2d: bias must be [" + std::to_string(f_count) + "], got " +
              shape_str(bias.shape()));

  const int ph = padding == Padding::same ? kh / 2 : 0;
  const int pw = padding == Padding::same ? kw / 2 : 0;
  const int hp = h + 2 * ph, wp = w + 2 * pw;
  const int ho = hp - kh + 1, wo = wp - kw + 1;
  require(ho >= 1 && wo >= 1, "conv2d: kernel " + shape_str(kernel.shape()) +
                                  " larger than input " +
                                  shape_str(input.shape()));

  const bool track = needs_grad({&input, &kernel, &bias});
  Tensor out = make_output({n_count, f_count, ho, wo}, track);

  // Padded copy of the whole batch; reused by the backward pass.
  auto padded = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n_count) * c_count * hp * wp);
  {
    const double* in = input.values().data();
    for (int n = 0; n < n_count; ++n)
      pad_image(in + static_cast<std::size_t>(n) * c_count * h * w, c_count, h,
                w, ph, pw,
                padded->data() + static_cast<std::size_t>(n) * c_count * hp * wp);
  }

  {
    const double* p = padded->data();
    const double* k = kernel.values().data();
    const double* b = bias.values().data();
    double* o = out.values().data();
    for (int n = 0; n < n_count; ++n) {
      for (int f = 0; f < f_count; ++f) {
        double* oimg = o + (static_cast<std::size_t>(n) * f_count + f) * ho * wo;
        std::fill(oimg, oimg + static_cast<std::size_t>(ho) * wo, b[f]);
        for (int c = 0; c < c_count; ++c) {
          const double* pimg =
              p + (static_cast<std::size_t>(n) * c_count + c) * hp * wp;
          const double* kimg =
              k + (static_cast<std::size_t>(f) * c_count + c) * kh * kw;
          if (kh == 3 && kw == 3) {
            for (int y = 0; y < ho; ++y)
              corr3x3_row(pimg + static_cast<std::size_t>(y) * wp,
                          pimg + static_cast<std::size_t>(y + 1) * wp,
                          pimg + static_cast<std::size_t>(y + 2) * wp, kimg,
                          oimg + static_cast<std::size_t>(y) * wo, wo);
            continue;
          }
          for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
              const double kv = kimg[dy * kw + dx];
              if (kv == 0.0) continue;
              for (int y = 0; y < ho; ++y) {
                const double* prow = pimg + (y + dy) * wp + dx;
                double* orow = oimg + static_cast<std::size_t>(y) * wo;
                for (int x = 0; x < wo; ++x) orow[x] += kv * prow[x];
              }
            }
          }
        }
      }
    }
  }

  if (track) {
    auto in_node = input.node();
    auto k_node = kernel.node();
    auto b_node = bias.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, k_node, b_node, out_node,
                                      padded, n_count, c_count, f_count, h, w,
                                      hp, wp, ho, wo, kh, kw, ph, pw]() {
      const double* dout = out_node->grad.data();
      if (b_node->requires_grad) {
        b_node->ensure_grad();
        double* db = b_node->grad.data();
        for (int n = 0; n < n_count; ++n)
          for (int f = 0; f < f_count; ++f) {
            const double* drow =
                dout + (static_cast<std::size_t>(n) * f_count + f) * ho * wo;
            double acc = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i)
              acc += drow[i];
            db[f] += acc;
          }
      }
      if (k_node->requires_grad) {
        k_node->ensure_grad();
        double* dk = k_node->grad.data();
        const double* p = padded->data();
        std::vector<double> acc(kh == 3 && kw == 3 ? 9 * static_cast<std::size_t>(wo) : 0);
        for (int n = 0; n < n_count; ++n) {
          for (int f = 0; f < f_count; ++f) {
            const double* dimg =
                dout + (static_cast<std::size_t>(n) * f_count + f) * ho * wo;
            for (int c = 0; c < c_count; ++c) {
              const double* pimg =
                  p + (static_cast<std::size_t>(n) * c_count + c) * hp * wp;
              double* dkimg =
                  dk + (static_cast<std::size_t>(f) * c_count + c) * kh * kw;
              if (kh == 3 && kw == 3) {
                // Nine per-column accumulator rows, reduced once at the end,
                // keep the inner loop free of cross-lane reductions.
                std::fill(acc.begin(), acc.end(), 0.0);
                double* a = acc.data();
                for (int y = 0; y < ho; ++y) {
                  const double* d = dimg + static_cast<std::size_t>(y) * wo;
                  const double* p0 = pimg + static_cast<std::size_t>(y) * wp;
                  const double* p1 = p0 + wp;
                  const double* p2 = p1 + wp;
                  for (int x = 0; x < wo; ++x) {
                    const double dv = d[x];
                    a[0 * wo + x] += dv * p0[x];
                    a[1 * wo + x] += dv * p0[x + 1];
                    a[2 * wo + x] += dv * p0[x + 2];
                    a[3 * wo + x] += dv * p1[x];
                    a[4 * wo + x] += dv * p1[x + 1];
                    a[5 * wo + x] += dv * p1[x + 2];
                    a[6 * wo + x] += dv * p2[x];
                    a[7 * wo + x] += dv * p2[x + 1];
                    a[8 * wo + x] += dv * p2[x + 2];
                  }
                }
                for (int j = 0; j < 9; ++j) {
                  double s = 0.0;
                  for (int x = 0; x < wo; ++x) s += a[j * wo + x];
                  dkimg[j] += s;
                }
                continue;
              }
              for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx) {
                  double sum = 0.0;
                  for (int y = 0; y < ho; ++y) {
                    const double* prow = pimg + (y + dy) * wp + dx;
                    const double* drow = dimg + static_cast<std::size_t>(y) * wo;
                    for (int x = 0; x < wo; ++x) sum += drow[x] * prow[x];
                  }
                  dkimg[dy * kw + dx] += sum;
                }
              }
            }
          }
        }
      }
      if (in_node->requires_grad) {
        in_node->ensure_grad();
        const double* k = k_node->value.data();
        if (kh == 3 && kw == 3 && ph == 1 && pw == 1) {
          // d(input) is the correlation of the padded upstream gradient with
          // the 180-degree-rotated kernel; reuses the fast 3x3 row core.
          const int hq = ho + 2, wq = wo + 2;
          std::vector<double> dopad(static_cast<std::size_t>(f_count) * hq * wq);
          for (int n = 0; n < n_count; ++n) {
            pad_image(dout + static_cast<std::size_t>(n) * f_count * ho * wo,
                      f_count, ho, wo, 1, 1, dopad.data());
            for (int c = 0; c < c_count; ++c) {
              double* din = in_node->grad.data() +
                            (static_cast<std::size_t>(n) * c_count + c) * h * w;
              for (int f = 0; f < f_count; ++f) {
                const double* kimg =
                    k + (static_cast<std::size_t>(f) * c_count + c) * 9;
                const double krot[9] = {kimg[8], kimg[7], kimg[6],
                                        kimg[5], kimg[4], kimg[3],
                                        kimg[2], kimg[1], kimg[0]};
                const double* qimg = dopad.data() + static_cast<std::size_t>(f) * hq * wq;
                for (int y = 0; y < h; ++y)
                  corr3x3_row(qimg + static_cast<std::size_t>(y) * wq,
                              qimg + static_cast<std::size_t>(y + 1) * wq,
                              qimg + static_cast<std::size_t>(y + 2) * wq, krot,
                              din + static_cast<std::size_t>(y) * w, w);
              }
            }
          }
        } else {
          std::vector<double> dpad(static_cast<std::size_t>(hp) * wp);
          for (int n = 0; n < n_count; ++n) {
            for (int c = 0; c < c_count; ++c) {
              std::fill(dpad.begin(), dpad.end(), 0.0);
              for (int f = 0; f < f_count; ++f) {
                const double* dimg =
                    dout + (static_cast<std::size_t>(n) * f_count + f) * ho * wo;
                const double* kimg =
                    k + (static_cast<std::size_t>(f) * c_count + c) * kh * kw;
                for (int dy = 0; dy < kh; ++dy) {
                  for (int dx = 0; dx < kw; ++dx) {
                    const double kv = kimg[dy * kw + dx];
                    if (kv == 0.0) continue;
                    for (int y = 0; y < ho; ++y) {
                      double* drow = dpad.data() + (y + dy) * wp + dx;
                      const double* orow = dimg + static_cast<std::size_t>(y) * wo;
                      for (int x = 0; x < wo; ++x) drow[x] += kv * orow[x];
                    }
                  }
                }
              }
              double* din =
                  in_node->grad.data() + (static_cast<std::size_t>(n) * c_count + c) * h * w;
              for (int y = 0; y < h; ++y) {
                const double* s = dpad.data() + (y + ph) * wp + pw;
                double* d = din + static_cast<std::size_t>(y) * w;
                for (int x = 0; x < w; ++x) d[x] += s[x];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor max_pool_2x2(const Tensor& input) {
  require(input.rank() == 4, "max_pool_2x2: input must be [N,C,H,W], got " +
                                 shape_str(input.shape()));
  const int n_count = input.dim(0), c_count = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  require(h % 2 == 0 && w % 2 == 0,
          "max_pool_2x2: spatial extents must be even, got " +
              shape_str(input.shape()));
  const int ho = h / 2, wo = w / 2;

  const bool track = needs_grad({&input});
  Tensor out = make_output({n_count, c_count, ho, wo}, track);

  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(out.numel()));
  {
    const double* in = input.values().data();
    double* o = out.values().data();
    std::int64_t* am = argmax->data();
    std::size_t oi = 0;
    for (int n = 0; n < n_count; ++n) {
      for (int c = 0; c < c_count; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * c_count + c) *
                                 static_cast<std::size_t>(h) * w;
        for (int y = 0; y < ho; ++y) {
          for (int x = 0; x < wo; ++x, ++oi) {
            const std::size_t i00 = base + (2 * y) * static_cast<std::size_t>(w) + 2 * x;
            std::size_t best = i00;
            double bv = in[i00];
            // Row-major window scan; strict > keeps the first max on ties.
            const std::size_t idx[3] = {i00 + 1, i00 + w, i00 + w + 1};
            for (std::size_t cand : idx)
              if (in[cand] > bv) {
                bv = in[cand];
                best = cand;
              }
            o[oi] = bv;
            am[oi] = static_cast<std::int64_t>(best);
          }
        }
      }
    }
  }

  if (track) {
    auto in_node = input.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node, argmax]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double* dout = out_node->grad.data();
      const std::int64_t* am = argmax->data();
      for (std::size_t i = 0; i < out_node->value.size(); ++i)
        din[am[i]] += dout[i];
    });
  }
  return out;
}

Tensor upsample_nearest_2x(const Tensor& input) {
  require(input.rank() == 4, "upsample_nearest_2x: input must be [N,C,H,W], got " +
                                 shape_str(input.shape()));
  const int n_count = input.dim(0), c_count = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  const int ho = 2 * h, wo = 2 * w;

  const bool track = needs_grad({&input});
  Tensor out = make_output({n_count, c_count, ho, wo}, track);
  {
    const double* in = input.values().data();
    double* o = out.values().data();
    for (int nc = 0; nc < n_count * c_count; ++nc) {
      const double* iimg = in + static_cast<std::size_t>(nc) * h * w;
      double* oimg = o + static_cast<std::size_t>(nc) * ho * wo;
      for (int y = 0; y < h; ++y) {
        double* r0 = oimg + (2 * y) * static_cast<std::size_t>(wo);
        double* r1 = r0 + wo;
        const double* s = iimg + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          r0[2 * x] = r0[2 * x + 1] = s[x];
          r1[2 * x] = r1[2 * x + 1] = s[x];
        }
      }
    }
  }

  if (track) {
    auto in_node = input.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node, n_count, c_count, h, w]() {
      in_node->ensure_grad();
      const int ho = 2 * h, wo = 2 * w;
      double* din = in_node->grad.data();
      const double* dout = out_node->grad.data();
      for (int nc = 0; nc < n_count * c_count; ++nc) {
        double* dimg = din + static_cast<std::size_t>(nc) * h * w;
        const double* gimg = dout + static_cast<std::size_t>(nc) * ho * wo;
        for (int y = 0; y < h; ++y) {
          const double* r0 = gimg + (2 * y) * static_cast<std::size_t>(wo);
          const double* r1 = r0 + wo;
          double* d = dimg + static_cast<std::size_t>(y) * w;
          for (int x = 0; x < w; ++x)
            d[x] += r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == 4 && b.rank() == 4,
          "concat_channels: inputs must be [N,C,H,W], got " +
              shape_str(a.shape()) + " and " + shape_str(b.shape()));
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: batch/spatial mismatch between " +
              shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const int n_count = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const int h = a.dim(2), w = a.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  const bool track = needs_grad({&a, &b});
  Tensor out = make_output({n_count, ca + cb, h, w}, track);
  {
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* o = out.values().data();
    for (int n = 0; n < n_count; ++n) {
      std::copy(pa + static_cast<std::size_t>(n) * ca * plane,
                pa + static_cast<std::size_t>(n + 1) * ca * plane,
                o + static_cast<std::size_t>(n) * (ca + cb) * plane);
      std::copy(pb + static_cast<std::size_t>(n) * cb * plane,
                pb + static_cast<std::size_t>(n + 1) * cb * plane,
                o + (static_cast<std::size_t>(n) * (ca + cb) + ca) * plane);
    }
  }

  if (track) {
    auto a_node = a.node();
    auto b_node = b.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [a_node, b_node, out_node, n_count, ca, cb,
                                      plane]() {
      const double* dout = out_node->grad.data();
      if (a_node->requires_grad) {
        a_node->ensure_grad();
        double* da = a_node->grad.data();
        for (int n = 0; n < n_count; ++n) {
          const double* s = dout + static_cast<std::size_t>(n) * (ca + cb) * plane;
          double* d = da + static_cast<std::size_t>(n) * ca * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * plane; ++i)
            d[i] += s[i];
        }
      }
      if (b_node->requires_grad) {
        b_node->ensure_grad();
        double* db = b_node->grad.data();
        for (int n = 0; n < n_count; ++n) {
          const double* s =
              dout + (static_cast<std::size_t>(n) * (ca + cb) + ca) * plane;
          double* d = db + static_cast<std::size_t>(n) * cb * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * plane; ++i)
            d[i] += s[i];
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  const bool track = needs_grad({&x});
  Tensor out = make_output(x.shape(), track);
  const double* in = x.values().data();
  double* o = out.values().data();
  const std::size_t n = x.values().size();
  for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;

  if (track) {
    auto in_node = x.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double* v = in_node->value.data();
      const double* dout = out_node->grad.data();
      for (std::size_t i = 0; i < in_node->value.size(); ++i)
        if (v[i] > 0.0) din[i] += dout[i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  const bool track = needs_grad({&x});
  Tensor out = make_output(x.shape(), track);
  const double* in = x.values().data();
  double* o = out.values().data();
  const std::size_t n = x.values().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = in[i];
    o[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  }

  if (track) {
    auto in_node = x.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double* y = out_node->value.data();
      const double* dout = out_node->grad.data();
      for (std::size_t i = 0; i < in_node->value.size(); ++i)
        din[i] += dout[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor softmax_channels(const Tensor& x) {
  require(x.rank() == 4, "softmax_channels: input must be [N,C,H,W], got " +
                             shape_str(x.shape()));
  const int n_count = x.dim(0), c_count = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);

  const bool track = needs_grad({&x});
  Tensor out = make_output(x.shape(), track);
  {
    const double* in = x.values().data();
    double* o = out.values().data();
    for (int n = 0; n < n_count; ++n) {
      const std::size_t base = static_cast<std::size_t>(n) * c_count * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        double mx = in[base + p];
        for (int c = 1; c < c_count; ++c)
          mx = std::max(mx, in[base + c * plane + p]);
        double z = 0.0;
        for (int c = 0; c < c_count; ++c) {
          const double e = std::exp(in[base + c * plane + p] - mx);
          o[base + c * plane + p] = e;
          z += e;
        }
        for (int c = 0; c < c_count; ++c) o[base + c * plane + p] /= z;
      }
    }
  }

  if (track) {
    auto in_node = x.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node, n_count, c_count, plane]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double* y = out_node->value.data();
      const double* dout = out_node->grad.data();
      for (int n = 0; n < n_count; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * c_count * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          double dot = 0.0;
          for (int c = 0; c < c_count; ++c)
            dot += y[base + c * plane + p] * dout[base + c * plane + p];
          for (int c = 0; c < c_count; ++c) {
            const std::size_t i = base + c * plane + p;
            din[i] += y[i] * (dout[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0,
          "dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;

  const bool track = needs_grad({&x});
  Tensor out = make_output(x.shape(), track);
  auto mask = std::make_shared<std::vector<double>>(x.values().size());
  const double keep_scale = 1.0 / (1.0 - rate);
  {
    const double* in = x.values().data();
    double* o = out.values().data();
    double* m = mask->data();
    for (std::size_t i = 0; i < x.values().size(); ++i) {
      m[i] = rng.uniform() < rate ? 0.0 : keep_scale;
      o[i] = in[i] * m[i];
    }
  }

  if (track) {
    auto in_node = x.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node, mask]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double* dout = out_node->grad.data();
      const double* m = mask->data();
      for (std::size_t i = 0; i < in_node->value.size(); ++i)
        din[i] += dout[i] * m[i];
    });
  }
  return out;
}

namespace {

template <typename Fwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, double da_coeff, double db_coeff,
                          bool mul_mode) {
  require(same_shape(a.shape(), b.shape()),
          std::string(name) + ": shape mismatch between " + shape_str(a.shape()) +
              " and " + shape_str(b.shape()));
  const bool track = needs_grad({&a, &b});
  Tensor out = make_output(a.shape(), track);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* o = out.values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) o[i] = fwd(pa[i], pb[i]);

  if (track) {
    auto a_node = a.node();
    auto b_node = b.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [a_node, b_node, out_node, da_coeff,
                                      db_coeff, mul_mode]() {
      const double* dout = out_node->grad.data();
      if (a_node->requires_grad) {
        a_node->ensure_grad();
        double* da = a_node->grad.data();
        const double* vb = b_node->value.data();
        for (std::size_t i = 0; i < a_node->value.size(); ++i)
          da[i] += dout[i] * (mul_mode ? vb[i] : da_coeff);
      }
      if (b_node->requires_grad) {
        b_node->ensure_grad();
        double* db = b_node->grad.data();
        const double* va = a_node->value.data();
        for (std::size_t i = 0; i < b_node->value.size(); ++i)
          db[i] += dout[i] * (mul_mode ? va[i] : db_coeff);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "add", [](double x, double y) { return x + y; },
                            1.0, 1.0, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "sub", [](double x, double y) { return x - y; },
                            1.0, -1.0, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "mul", [](double x, double y) { return x * y; },
                            0.0, 0.0, true);
}

Tensor scale(const Tensor& a, double s) {
  const bool track = needs_grad({&a});
  Tensor out = make_output(a.shape(), track);
  const double* pa = a.values().data();
  double* o = out.values().data();
  for (std::size_t i = 0; i < a.values().size(); ++i) o[i] = pa[i] * s;
  if (track) {
    auto a_node = a.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [a_node, out_node, s]() {
      a_node->ensure_grad();
      double* da = a_node->grad.data();
      const double* dout = out_node->grad.data();
      for (std::size_t i = 0; i < a_node->value.size(); ++i)
        da[i] += dout[i] * s;
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const bool track = needs_grad({&x});
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  out.set_requires_grad(track);
  if (track) {
    auto in_node = x.node();
    auto out_node = out.node();
    Tape::current().record(out_node, [in_node, out_node]() {
      in_node->ensure_grad();
      double* din = in_node->grad.data();
      const double g = out_node->grad[0];
      for (std::size_t i = 0; i < in_node->value.size(); ++i) din[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  require(x.numel() > 0, "mean_all: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace cseg
