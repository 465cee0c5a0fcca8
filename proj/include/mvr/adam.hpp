#pragma once

#include <cstdint>
#include <vector>

namespace mvr {

// Flat-array Adam with the usual bias correction. Non-finite gradient
// entries skip their parameter and are counted.
struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;
  std::int64_t skipped = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
  void reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr);

}  // namespace mvr
