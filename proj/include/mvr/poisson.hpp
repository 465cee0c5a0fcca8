#pragma once

#include <cstdint>

#include "mvr/grid.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

// Spectral Poisson reconstruction of an indicator field from an oriented
// point cloud, with the exact adjoint back to point positions and normals.
// The lattice is periodic over the cubified bounds box; points must stay
// clear of the boundary (the pipeline guarantees a margin).

struct SplatResult {
  VectorGrid field;
  int clamped_points = 0;  // points outside bounds, clamped with a warning count
};

// Distributes each point's normal over the 8 enclosing nodes with trilinear
// weights (periodic wrap). res must be a power of two.
SplatResult splat(const OrientedPointCloud& points, int res, const Aabb& bounds);

// Solves lap(chi) = div(v) spectrally with the Gaussian filter
// exp(-2 sig^2 |k|^2 / res^2), then shifts chi so its trilinear samples at
// the input point positions average to zero (shift kept in mean_offset).
IndicatorGrid solve_indicator(const VectorGrid& v, double sig,
                              const OrientedPointCloud& points);

struct PointGradients {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> normals;
};

// Exact adjoint of solve_indicator(splat(.)) including the mean-offset term.
PointGradients dpsr_adjoint(const std::vector<double>& grad_chi,
                            const OrientedPointCloud& points, double sig, int res,
                            const Aabb& bounds);

// Elementwise tanh used before isosurface extraction, plus its adjoint.
IndicatorGrid tanh_grid(const IndicatorGrid& chi);
std::vector<double> tanh_grid_adjoint(const std::vector<double>& grad_tanh,
                                      const IndicatorGrid& chi);

}  // namespace mvr
