#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mvr/camera.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

// Silhouette smoothing happens on a one-pixel band across visible contour
// edges; each affected pixel records the edge that won so the adjoint can
// recompute the coverage derivative.
struct AaEvent {
  std::int32_t x = 0, y = 0;
  std::uint32_t va = 0, vb = 0;  // oriented: covered side is left of va->vb
};

struct AttributeMaps {
  int width = 0, height = 0;
  std::vector<double> silhouette;   // H*W in [0,1]
  std::vector<double> depth;        // H*W, +inf where background
  std::vector<double> position;     // H*W*3 camera-frame coordinates
  std::vector<double> normal;       // H*W*3 unit normals (zero on background)
  std::vector<double> albedo;       // H*W*3 (zero when the mesh has no albedo)
  std::vector<std::int32_t> face_id;  // H*W, -1 background
  std::vector<double> barycentric;  // H*W*3 perspective-correct weights
  std::vector<AaEvent> aa_events;

  std::size_t pix(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool covered(int x, int y) const { return face_id[pix(x, y)] >= 0; }
  static constexpr double kInvalidDepth = std::numeric_limits<double>::infinity();
};

// Upstream gradients per channel; empty vectors mean zero. depth gradients
// are folded onto the z component of the position attribute.
struct MapGradients {
  std::vector<double> silhouette;
  std::vector<double> depth;
  std::vector<double> position;
  std::vector<double> normal;
  std::vector<double> albedo;
};

struct RasterGradients {
  std::vector<Eigen::Vector3d> vertices;        // dL/dV, world frame
  std::vector<Eigen::Vector3d> vertex_normals;  // attribute-path gradients
  std::vector<Eigen::Vector3d> vertex_albedo;
};

// Perspective-correct z-buffered rasterization of silhouette/depth/position/
// normal/albedo maps. Nearest surface wins; ties go to the lower face index;
// no back-face culling. A mesh entirely behind the camera yields background
// maps.
AttributeMaps rasterize(const TriMesh& mesh, const Camera& camera);

// Exact adjoint of the interior interpolation (attributes and the barycentric
// / depth dependence on vertex positions) plus the silhouette coverage term
// along visible contour edges.
RasterGradients raster_adjoint(const MapGradients& grads, const TriMesh& mesh,
                               const Camera& camera, const AttributeMaps& maps);

}  // namespace mvr
