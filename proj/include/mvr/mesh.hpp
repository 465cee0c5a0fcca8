#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <vector>

#include "mvr/rng.hpp"

namespace mvr {

struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<Eigen::Vector3d> vertex_normals;  // unit length
  std::vector<Eigen::Vector3d> vertex_albedo;   // empty until assigned, values in [0,1]

  bool has_albedo() const { return !vertex_albedo.empty(); }
  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

struct OrientedPointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> normals;  // unit length
  std::size_t size() const { return positions.size(); }
};

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent() const { return max - min; }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  // Smallest cube with the same center that covers the box (grids are cubic).
  Aabb cubified() const;
};

Eigen::Vector3d face_normal(const TriMesh& m, std::size_t f);  // unit length
double face_area(const TriMesh& m, std::size_t f);
Aabb mesh_bounds(const TriMesh& m);

// Area-weighted vertex normals (cross-product accumulation, normalized).
std::vector<Eigen::Vector3d> compute_vertex_normals(const TriMesh& m);
// Adjoint of compute_vertex_normals: gradients w.r.t. the unit vertex
// normals are pulled back to vertex positions.
std::vector<Eigen::Vector3d> vertex_normals_adjoint(
    const TriMesh& m, const std::vector<Eigen::Vector3d>& grad_normals);

// One-ring vertex adjacency in CSR form.
struct VertexAdjacency {
  std::vector<std::uint32_t> offsets;  // size V+1
  std::vector<std::uint32_t> neighbors;
  std::size_t degree(std::size_t v) const { return offsets[v + 1] - offsets[v]; }
};
VertexAdjacency build_adjacency(const TriMesh& m);

// Area-weighted uniform surface sampling; normals are the face normals of
// the sampled faces. Deterministic under seed.
OrientedPointCloud sample_surface(const TriMesh& m, std::size_t count, std::uint64_t seed);

// Every edge shared by exactly two faces (indices compared, not positions).
bool is_watertight(const TriMesh& m);

// Throws when indices are out of range, a face is degenerate below the area
// tolerance, or existing normals are not unit length.
void validate_mesh(const TriMesh& m, double area_tol = 1e-12);

}  // namespace mvr
