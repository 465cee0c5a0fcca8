#pragma once

#include <cstdint>
#include <vector>

#include "mvr/grid.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

// Provenance of an extracted vertex: the lattice edge it interpolates.
// corner_b == -1 marks the virtual outside layer used to cap a level set
// that touches the lattice boundary (no gradient flows to that side).
struct VertexEdge {
  std::int64_t corner_a = -1;  // linear node index of the lower endpoint
  std::int64_t corner_b = -1;
  double value_a = 0.0;
  double value_b = 0.0;
  std::uint8_t axis = 0;
};

struct IsoSurface {
  TriMesh mesh;
  std::vector<VertexEdge> vertex_edges;  // one per vertex
  double level = 0.0;
  bool touched_boundary = false;         // capped against the lattice boundary
};

// Standard 256-case marching cubes with linear edge interpolation. Vertices
// on shared lattice edges are merged by exact edge identity, so the result
// is watertight whenever the level set stays inside the lattice; otherwise
// it is capped at the boundary and touched_boundary is set. Faces are wound
// so normals point toward decreasing values (outward for inside-positive
// fields); vertex normals come from the central-difference gradient.
// Throws when the grid never crosses the level.
IsoSurface marching_cubes(const IndicatorGrid& grid, double level);

// Pulls vertex-position gradients back to the grid through the exact
// derivative of the crossing interpolation along each generating edge.
// Edges with |value_b - value_a| < 1e-8 contribute nothing.
std::vector<double> mc_adjoint(const std::vector<Eigen::Vector3d>& grad_vertices,
                               const IsoSurface& surface, const IndicatorGrid& grid);

}  // namespace mvr
