#include "mvr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mvr {

Aabb Aabb::cubified() const {
  const Eigen::Vector3d c = center();
  const double half = 0.5 * extent().maxCoeff();
  return {c.array() - half, c.array() + half};
}

Eigen::Vector3d face_normal(const TriMesh& m, std::size_t f) {
  const auto& [i, j, k] = m.faces[f];
  const Eigen::Vector3d n =
      (m.vertices[j] - m.vertices[i]).cross(m.vertices[k] - m.vertices[i]);
  const double len = n.norm();
  return len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
}

double face_area(const TriMesh& m, std::size_t f) {
  const auto& [i, j, k] = m.faces[f];
  return 0.5 *
         (m.vertices[j] - m.vertices[i]).cross(m.vertices[k] - m.vertices[i]).norm();
}

Aabb mesh_bounds(const TriMesh& m) {
  Aabb b;
  if (m.vertices.empty()) return b;
  b.min = b.max = m.vertices[0];
  for (const auto& v : m.vertices) {
    b.min = b.min.cwiseMin(v);
    b.max = b.max.cwiseMax(v);
  }
  return b;
}

std::vector<Eigen::Vector3d> compute_vertex_normals(const TriMesh& m) {
  std::vector<Eigen::Vector3d> acc(m.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& [i, j, k] : m.faces) {
    const Eigen::Vector3d n =
        (m.vertices[j] - m.vertices[i]).cross(m.vertices[k] - m.vertices[i]);
    acc[i] += n;
    acc[j] += n;
    acc[k] += n;
  }
  for (auto& n : acc) {
    const double len = n.norm();
    n = len > 1e-20 ? Eigen::Vector3d(n / len) : Eigen::Vector3d(0, 0, 1);
  }
  return acc;
}

std::vector<Eigen::Vector3d> vertex_normals_adjoint(
    const TriMesh& m, const std::vector<Eigen::Vector3d>& grad_normals) {
  const std::size_t V = m.vertices.size();
  // Recompute the unnormalized accumulators, then push gradients through
  // normalization and the per-face cross products.
  std::vector<Eigen::Vector3d> acc(V, Eigen::Vector3d::Zero());
  for (const auto& [i, j, k] : m.faces) {
    const Eigen::Vector3d n =
        (m.vertices[j] - m.vertices[i]).cross(m.vertices[k] - m.vertices[i]);
    acc[i] += n;
    acc[j] += n;
    acc[k] += n;
  }
  std::vector<Eigen::Vector3d> grad_acc(V, Eigen::Vector3d::Zero());
  for (std::size_t v = 0; v < V; ++v) {
    const double len = acc[v].norm();
    if (len <= 1e-20) continue;
    const Eigen::Vector3d unit = acc[v] / len;
    grad_acc[v] = (grad_normals[v] - unit * unit.dot(grad_normals[v])) / len;
  }
  std::vector<Eigen::Vector3d> grad_pos(V, Eigen::Vector3d::Zero());
  for (const auto& [i, j, k] : m.faces) {
    const Eigen::Vector3d a = m.vertices[j] - m.vertices[i];
    const Eigen::Vector3d b = m.vertices[k] - m.vertices[i];
    const Eigen::Vector3d g = grad_acc[i] + grad_acc[j] + grad_acc[k];
    const Eigen::Vector3d ga = b.cross(g);  // d(a x b)/da pullback
    const Eigen::Vector3d gb = g.cross(a);
    grad_pos[j] += ga;
    grad_pos[k] += gb;
    grad_pos[i] -= ga + gb;
  }
  return grad_pos;
}

VertexAdjacency build_adjacency(const TriMesh& m) {
  const std::size_t V = m.vertices.size();
  std::vector<std::vector<std::uint32_t>> nbrs(V);
  auto add = [&](std::uint32_t a, std::uint32_t b) {
    auto& v = nbrs[a];
    if (std::find(v.begin(), v.end(), b) == v.end()) v.push_back(b);
  };
  for (const auto& [i, j, k] : m.faces) {
    add(i, j); add(j, i);
    add(j, k); add(k, j);
    add(k, i); add(i, k);
  }
  VertexAdjacency adj;
  adj.offsets.resize(V + 1, 0);
  for (std::size_t v = 0; v < V; ++v) {
    std::sort(nbrs[v].begin(), nbrs[v].end());
    adj.offsets[v + 1] = adj.offsets[v] + static_cast<std::uint32_t>(nbrs[v].size());
  }
  adj.neighbors.reserve(adj.offsets[V]);
  for (auto& v : nbrs) adj.neighbors.insert(adj.neighbors.end(), v.begin(), v.end());
  return adj;
}

OrientedPointCloud sample_surface(const TriMesh& m, std::size_t count, std::uint64_t seed) {
  if (m.faces.empty()) throw std::runtime_error("sample_surface: mesh has no faces");
  std::vector<double> cum(m.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    total += face_area(m, f);
    cum[f] = total;
  }
  if (total <= 0.0) throw std::runtime_error("sample_surface: mesh is degenerate");

  Rng rng(seed);
  OrientedPointCloud pc;
  pc.positions.reserve(count);
  pc.normals.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double target = rng.next_double() * total;
    const std::size_t f =
        std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
    const auto& [i, j, k] = m.faces[std::min(f, m.faces.size() - 1)];
    const double r1 = std::sqrt(rng.next_double());
    const double r2 = rng.next_double();
    const Eigen::Vector3d p = (1.0 - r1) * m.vertices[i] +
                              r1 * (1.0 - r2) * m.vertices[j] + r1 * r2 * m.vertices[k];
    pc.positions.push_back(p);
    pc.normals.push_back(face_normal(m, std::min(f, m.faces.size() - 1)));
  }
  return pc;
}

bool is_watertight(const TriMesh& m) {
  if (m.faces.empty()) return false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& [i, j, k] : m.faces) {
    const std::array<std::pair<std::uint32_t, std::uint32_t>, 3> e = {
        std::minmax(i, j), std::minmax(j, k), std::minmax(k, i)};
    for (const auto& key : e) ++edges[key];
  }
  for (const auto& [key, n] : edges)
    if (n != 2) return false;
  return true;
}

void validate_mesh(const TriMesh& m, double area_tol) {
  const std::size_t V = m.vertices.size();
  for (const auto& f : m.faces)
    for (const auto idx : f)
      if (idx >= V) throw std::runtime_error("mesh: face index out of range");
  for (std::size_t f = 0; f < m.faces.size(); ++f)
    if (face_area(m, f) <= area_tol) throw std::runtime_error("mesh: degenerate face");
  if (!m.vertex_normals.empty()) {
    if (m.vertex_normals.size() != V)
      throw std::runtime_error("mesh: vertex normal count mismatch");
    for (const auto& n : m.vertex_normals)
      if (std::abs(n.norm() - 1.0) > 1e-5)
        throw std::runtime_error("mesh: vertex normal is not unit length");
  }
  if (!m.vertex_albedo.empty() && m.vertex_albedo.size() != V)
    throw std::runtime_error("mesh: vertex albedo count mismatch");
}

}  // namespace mvr
