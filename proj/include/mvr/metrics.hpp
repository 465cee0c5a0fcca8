#pragma once

#include <cstdint>
#include <string>

#include "mvr/image.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

// Symmetric mean point-to-surface distance over area-weighted surface
// samples, averaged over both directions.
double chamfer_l1(const TriMesh& a, const TriMesh& b, std::size_t samples,
                  std::uint64_t seed);

// Mean of (1 - |n_a . n_b|) between sample normals and the face normal at
// the closest surface point, both directions.
double normal_error(const TriMesh& a, const TriMesh& b, std::size_t samples,
                    std::uint64_t seed);

// -10 log10(MSE) over pixels where mask > 0.5, capped at 99 dB.
double psnr(const Image& a, const Image& b, const Image& mask);

struct MetricsReport {
  double chamfer = 0.0;
  double normal = 0.0;
  double psnr_db = -1.0;  // < 0 when not evaluated
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

void write_metrics_json(const MetricsReport& report, const std::string& path);

}  // namespace mvr
