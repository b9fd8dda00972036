#include "cascadeseg/rng.hpp"

#include <cmath>

namespace cseg {

double Rng::normal(double mean, double sigma) {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return mean + sigma * cached_normal_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(phi);
  has_cached_normal_ = true;
  return mean + sigma * r * std::cos(phi);
}

}  // namespace cseg
