#include "cascadeseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Ellipse {
  double cx, cy;      // center, pixels
  double rx, ry;      // semi-axes, pixels
  double cos_phi, sin_phi;

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double xr = dx * cos_phi + dy * sin_phi;
    const double yr = -dx * sin_phi + dy * cos_phi;
    const double u = xr / rx, v = yr / ry;
    return u * u + v * v <= 1.0;
  }

  double bounding_radius() const { return std::max(rx, ry); }
};

struct Circle {
  double cx, cy, r;
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy <= r * r;
  }
};

// Every point of the circle's boundary (32 samples) inside the ellipse.
bool circle_inside_ellipse(const Circle& c, const Ellipse& e) {
  for (int k = 0; k < 32; ++k) {
    const double a = 2.0 * kPi * k / 32.0;
    if (!e.contains(c.cx + c.r * std::cos(a), c.cy + c.r * std::sin(a)))
      return false;
  }
  return e.contains(c.cx, c.cy);
}

void check_range(std::pair<double, double> r, const char* name) {
  if (r.first > r.second)
    throw std::invalid_argument(std::string("PhantomSpec: ") + name +
                                " range is inverted");
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 8)
    throw std::invalid_argument("PhantomSpec: size must be at least 8");
  check_range(liver_radius_range, "liver_radius");
  check_range(tumor_radius_range, "tumor_radius");
  check_range(distractor_radius_range, "distractor_radius");
  auto radii_ok = [](std::pair<double, double> r) {
    return r.first > 0.0 && r.second < 0.5;
  };
  if (!radii_ok(liver_radius_range) || !radii_ok(tumor_radius_range) ||
      !radii_ok(distractor_radius_range))
    throw std::invalid_argument(
        "PhantomSpec: radius fractions must lie in (0, 0.5)");
  if (tumor_count_range.first < 0 ||
      tumor_count_range.first > tumor_count_range.second ||
      distractor_count_range.first < 0 ||
      distractor_count_range.first > distractor_count_range.second)
    throw std::invalid_argument("PhantomSpec: bad count range");
  // Intensity separation keeps the synthetic task learnable.
  const double min_gap = 2.0 * noise_sigma;
  if (std::abs(liver_mean - background_mean) < min_gap ||
      std::abs(tumor_mean - liver_mean) < min_gap ||
      std::abs(tumor_mean - background_mean) < min_gap)
    throw std::invalid_argument(
        "PhantomSpec: region mean intensities must be separated by >= 2*sigma");
}

bool LiverEllipse::contains(double x, double y) const {
  return Ellipse{cx, cy, rx, ry, std::cos(angle), std::sin(angle)}.contains(x, y);
}

Sample generate_phantom(const PhantomSpec& spec, std::uint64_t index,
                        LiverEllipse* liver_out) {
  spec.validate();
  Rng rng = Rng::for_stream(spec.seed, index);
  const double sz = static_cast<double>(spec.size);

  const double phi = rng.uniform(0.0, kPi);
  Ellipse liver{sz * (0.5 + rng.uniform(-0.08, 0.08)),
                sz * (0.5 + rng.uniform(-0.08, 0.08)),
                sz * rng.uniform(spec.liver_radius_range.first,
                                 spec.liver_radius_range.second),
                sz * rng.uniform(spec.liver_radius_range.first,
                                 spec.liver_radius_range.second),
                std::cos(phi), std::sin(phi)};
  if (liver_out)
    *liver_out = LiverEllipse{liver.cx, liver.cy, liver.rx, liver.ry, phi};

  std::vector<Circle> tumors;
  const int tumor_count = rng.uniform_int(spec.tumor_count_range.first,
                                          spec.tumor_count_range.second);
  for (int t = 0; t < tumor_count; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const double r = sz * rng.uniform(spec.tumor_radius_range.first,
                                        spec.tumor_radius_range.second);
      // Candidate center drawn inside the liver ellipse in its own frame.
      const double a = rng.uniform(0.0, 2.0 * kPi);
      const double d = std::sqrt(rng.uniform());
      const double ex = d * std::cos(a) * liver.rx;
      const double ey = d * std::sin(a) * liver.ry;
      Circle c{liver.cx + ex * liver.cos_phi - ey * liver.sin_phi,
               liver.cy + ex * liver.sin_phi + ey * liver.cos_phi, r};
      if (circle_inside_ellipse(Circle{c.cx, c.cy, c.r + 1.0}, liver)) {
        tumors.push_back(c);
        placed = true;
      }
    }
    if (!placed)
      tumors.push_back(
          Circle{liver.cx, liver.cy, sz * spec.tumor_radius_range.first});
  }

  std::vector<Ellipse> distractors;
  const int distractor_count = rng.uniform_int(
      spec.distractor_count_range.first, spec.distractor_count_range.second);
  for (int dgt = 0; dgt < distractor_count; ++dgt) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double dphi = rng.uniform(0.0, kPi);
      Ellipse e{rng.uniform(0.0, sz),
                rng.uniform(0.0, sz),
                sz * rng.uniform(spec.distractor_radius_range.first,
                                 spec.distractor_radius_range.second),
                sz * rng.uniform(spec.distractor_radius_range.first,
                                 spec.distractor_radius_range.second),
                std::cos(dphi), std::sin(dphi)};
      const double dx = e.cx - liver.cx, dy = e.cy - liver.cy;
      const double clearance =
          liver.bounding_radius() + e.bounding_radius() + 2.0;
      if (dx * dx + dy * dy > clearance * clearance) {
        distractors.push_back(e);
        break;
      }
    }
  }

  // Labels first, then intensities with per-pixel noise in row-major order.
  Sample sample;
  sample.labels = LabelMap(spec.size, spec.size);
  std::vector<double> image(sample.labels.pixel_count());
  for (int y = 0; y < spec.size; ++y) {
    for (int x = 0; x < spec.size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::uint8_t label = 0;
      if (liver.contains(px, py)) {
        label = 1;
        for (const Circle& t : tumors)
          if (t.contains(px, py)) {
            label = 2;
            break;
          }
      }
      sample.labels.at(y, x) = label;
    }
  }
  for (int y = 0; y < spec.size; ++y) {
    for (int x = 0; x < spec.size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double mean = spec.background_mean;
      switch (sample.labels.at(y, x)) {
        case 2:
          mean = spec.tumor_mean;
          break;
        case 1:
          mean = spec.liver_mean;
          break;
        default:
          for (const Ellipse& e : distractors)
            if (e.contains(px, py)) {
              mean = spec.liver_mean;
              break;
            }
      }
      image[static_cast<std::size_t>(y) * spec.size + x] =
          std::clamp(rng.normal(mean, spec.noise_sigma), 0.0, 1.0);
    }
  }
  sample.image = Tensor::from_data({spec.size, spec.size}, std::move(image));
  return sample;
}

Dataset make_dataset(const PhantomSpec& spec, int n_train, int n_val, int n_test) {
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("make_dataset: all split sizes must be >= 1");
  Dataset ds;
  std::uint64_t index = 0;
  for (int i = 0; i < n_train; ++i) ds.train.push_back(generate_phantom(spec, index++));
  for (int i = 0; i < n_val; ++i) ds.val.push_back(generate_phantom(spec, index++));
  for (int i = 0; i < n_test; ++i) ds.test.push_back(generate_phantom(spec, index++));
  return ds;
}

}  // namespace cseg
