#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "mvr/image.hpp"
#include "mvr/mesh.hpp"
#include "mvr/rasterizer.hpp"

namespace mvr {

// 9-coefficient real spherical-harmonics light, shared across color
// channels. Basis order: (1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2).
struct SHLight {
  Eigen::Matrix<double, 9, 1> coeffs = Eigen::Matrix<double, 9, 1>::Zero();
  bool degenerate = false;  // normal-equation rank < 9; minimal-norm solution

  void save_json(const std::string& path) const;
  static SHLight load_json(const std::string& path);
};

using ShBasis = Eigen::Matrix<double, 9, 1>;

// Basis evaluated at a (renormalized) unit normal; zero normals are rejected.
ShBasis sh_basis(const Eigen::Vector3d& normal);
// d(basis)/d(normal) as a 9x3 Jacobian of the raw polynomials (no
// renormalization term; callers feed unit normals from the rasterizer).
Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Eigen::Vector3d& normal);

// Least-squares fit of Y(N) . l = G over pixels with silhouette >= 0.5 and a
// finite rendered normal. Throws below 9 usable pixels; rank-deficient
// systems return the minimal-norm solution with `degenerate` set.
SHLight estimate_light(const AttributeMaps& maps, const Image& gray);

// Lambertian shading with output clamped to [0,1]; loss paths use the
// unclamped irradiance.
Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const Eigen::Vector3d& normal,
                      const SHLight& light);

struct SfsResult {
  double loss = 0.0;
  std::size_t valid_pixels = 0;
  std::vector<double> grad_albedo;  // H*W*3, wired to the albedo map
  std::vector<double> grad_normal;  // H*W*3, wired to the normal map
};

// Mean L1 difference between re-shaded pixels and the captured image over
// covered pixels; gradients with respect to the albedo and normal maps.
SfsResult sfs_loss(const AttributeMaps& maps, const SHLight& light, const Image& image,
                   bool want_normal_grad);

struct LaplacianResult {
  double loss = 0.0;
  std::vector<Eigen::Vector3d> grad;  // w.r.t. the attribute
};

// Mean over vertices of |attr_i - mean(neighbors)|_1 (umbrella Laplacian);
// isolated vertices contribute nothing.
LaplacianResult laplacian_reg(const TriMesh& mesh, const VertexAdjacency& adj,
                              const std::vector<Eigen::Vector3d>& attribute);

}  // namespace mvr
