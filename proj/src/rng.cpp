#include "mvr/rng.hpp"

#include <cmath>

namespace mvr {

double Rng::next_normal() {
  // Box-Muller; one value per call keeps the stream simple to reason about.
  double u1 = next_double();
  double u2 = next_double();
  while (u1 <= 1e-300) u1 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace mvr
