#include "mvr/marching_cubes.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mvr/mc_tables.hpp"
#include "mvr/parallel.hpp"

namespace mvr {

namespace {

// Axis of each cube edge and its canonical (lower) corner.
struct EdgeGeom {
  std::uint8_t axis;
  std::uint8_t lower;  // corner index whose offset along axis is 0
};

constexpr EdgeGeom kEdgeGeom[12] = {
    {0, 0}, {1, 1}, {0, 3}, {1, 0}, {0, 4}, {1, 5},
    {0, 7}, {1, 4}, {2, 0}, {2, 1}, {2, 2}, {2, 3}};

struct Extractor {
  const IndicatorGrid& grid;
  double level;
  int res;
  int vres;  // res + 2, virtual lattice span per axis

  double value(int x, int y, int z) const {
    if (x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res) return level - 1.0;
    return grid.values[grid.layout.index(x, y, z)];
  }
  bool is_virtual(int x, int y, int z) const {
    return x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res;
  }
  // Key of the lattice edge starting at virtual-lattice node (x,y,z) along axis.
  std::uint64_t edge_key(int x, int y, int z, int axis) const {
    const std::uint64_t node =
        (static_cast<std::uint64_t>(z + 1) * vres + (y + 1)) * vres + (x + 1);
    return static_cast<std::uint64_t>(axis) * vres * vres * vres + node;
  }
  void decode_key(std::uint64_t key, int* x, int* y, int* z, int* axis) const {
    const std::uint64_t span = static_cast<std::uint64_t>(vres) * vres * vres;
    *axis = static_cast<int>(key / span);
    std::uint64_t node = key % span;
    *x = static_cast<int>(node % vres) - 1;
    node /= vres;
    *y = static_cast<int>(node % vres) - 1;
    *z = static_cast<int>(node / vres) - 1;
  }

  // Central-difference gradient at a (real) node, one-sided at the border.
  Eigen::Vector3d node_gradient(int x, int y, int z) const {
    Eigen::Vector3d g;
    const int c[3] = {x, y, z};
    for (int d = 0; d < 3; ++d) {
      int lo[3] = {x, y, z}, hi[3] = {x, y, z};
      lo[d] = std::max(c[d] - 1, 0);
      hi[d] = std::min(c[d] + 1, res - 1);
      const double denom = (hi[d] - lo[d]) * grid.layout.spacing;
      g[d] = denom > 0.0
                 ? (value(hi[0], hi[1], hi[2]) - value(lo[0], lo[1], lo[2])) / denom
                 : 0.0;
    }
    return g;
  }
};

}  // namespace

IsoSurface marching_cubes(const IndicatorGrid& grid, double level) {
  const int res = grid.layout.res;
  if (res < 2) throw std::runtime_error("marching_cubes: grid too small");
  for (const double v : grid.values)
    if (!std::isfinite(v)) throw std::runtime_error("marching_cubes: non-finite grid value");

  Extractor ex{grid, level, res, res + 2};

  // Pass 1: scan cells of the virtual lattice in parallel, emitting edge-key
  // triples per triangle. Chunking is fixed so the output order does not
  // depend on the worker count.
  const int cell_lo = -1;
  const int n_slices = res + 1;  // cz in [-1, res-1]
  const std::size_t n_chunks = 16;
  std::vector<std::vector<std::array<std::uint64_t, 3>>> chunk_tris(n_chunks);

  parallel_chunks(n_slices, n_chunks, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    auto& out = chunk_tris[chunk];
    for (std::size_t s = b; s < e; ++s) {
      const int cz = cell_lo + static_cast<int>(s);
      for (int cy = -1; cy < res; ++cy)
        for (int cx = -1; cx < res; ++cx) {
          double vals[8];
          int index = 0;
          for (int c = 0; c < 8; ++c) {
            vals[c] = ex.value(cx + kCornerOffsets[c][0], cy + kCornerOffsets[c][1],
                               cz + kCornerOffsets[c][2]);
            if (vals[c] < level) index |= 1 << c;
          }
          if (index == 0 || index == 255) continue;
          const std::int8_t* tri = kTriTable[index];
          for (int t = 0; tri[t] != -1; t += 3) {
            std::array<std::uint64_t, 3> keys;
            for (int k = 0; k < 3; ++k) {
              const int e_id = tri[t + k];
              const EdgeGeom& eg = kEdgeGeom[e_id];
              keys[k] = ex.edge_key(cx + kCornerOffsets[eg.lower][0],
                                    cy + kCornerOffsets[eg.lower][1],
                                    cz + kCornerOffsets[eg.lower][2], eg.axis);
            }
            if (keys[0] == keys[1] || keys[1] == keys[2] || keys[0] == keys[2]) continue;
            out.push_back(keys);
          }
        }
    }
  });

  // Pass 2: weld vertices by exact edge identity in chunk order.
  IsoSurface surf;
  surf.mesh.vertices.reserve(1024);
  std::unordered_map<std::uint64_t, std::uint32_t> weld;
  weld.reserve(1 << 16);

  auto vertex_for = [&](std::uint64_t key) -> std::uint32_t {
    auto it = weld.find(key);
    if (it != weld.end()) return it->second;
    int x, y, z, axis;
    ex.decode_key(key, &x, &y, &z, &axis);
    int bx = x, by = y, bz = z;
    (axis == 0 ? bx : axis == 1 ? by : bz) += 1;
    const double a = ex.value(x, y, z);
    const double b = ex.value(bx, by, bz);
    double t = (level - a) / (b - a);
    t = std::min(std::max(t, 1e-9), 1.0 - 1e-9);

    VertexEdge ve;
    ve.axis = static_cast<std::uint8_t>(axis);
    ve.value_a = a;
    ve.value_b = b;
    ve.corner_a = ex.is_virtual(x, y, z) ? -1 : static_cast<std::int64_t>(grid.layout.index(x, y, z));
    ve.corner_b =
        ex.is_virtual(bx, by, bz) ? -1 : static_cast<std::int64_t>(grid.layout.index(bx, by, bz));
    if (ve.corner_a < 0 || ve.corner_b < 0) surf.touched_boundary = true;

    Eigen::Vector3d pos = grid.layout.origin + grid.layout.spacing * Eigen::Vector3d(x, y, z);
    pos[axis] += t * grid.layout.spacing;

    Eigen::Vector3d ga = ve.corner_a >= 0 ? ex.node_gradient(x, y, z) : Eigen::Vector3d::Zero();
    Eigen::Vector3d gb =
        ve.corner_b >= 0 ? ex.node_gradient(bx, by, bz) : Eigen::Vector3d::Zero();
    if (ve.corner_a < 0) ga = gb;
    if (ve.corner_b < 0) gb = ga;
    Eigen::Vector3d g = (1.0 - t) * ga + t * gb;
    const double glen = g.norm();
    // Outward points toward decreasing values.
    Eigen::Vector3d normal = glen > 1e-12 ? Eigen::Vector3d(-g / glen) : Eigen::Vector3d(0, 0, 1);

    const std::uint32_t id = static_cast<std::uint32_t>(surf.mesh.vertices.size());
    surf.mesh.vertices.push_back(pos);
    surf.mesh.vertex_normals.push_back(normal);
    surf.vertex_edges.push_back(ve);
    weld.emplace(key, id);
    return id;
  };

  for (const auto& chunk : chunk_tris)
    for (const auto& keys : chunk) {
      const std::uint32_t a = vertex_for(keys[0]);
      const std::uint32_t b = vertex_for(keys[1]);
      const std::uint32_t c = vertex_for(keys[2]);
      if (a == b || b == c || a == c) continue;
      surf.mesh.faces.push_back({a, b, c});
    }

  if (surf.mesh.faces.empty())
    throw std::runtime_error("marching_cubes: level set absent (constant grid?)");
  surf.level = level;
  return surf;
}

std::vector<double> mc_adjoint(const std::vector<Eigen::Vector3d>& grad_vertices,
                               const IsoSurface& surface, const IndicatorGrid& grid) {
  if (grad_vertices.size() != surface.mesh.vertices.size())
    throw std::runtime_error("mc_adjoint: gradient count does not match vertex count");
  std::vector<double> grad_grid(grid.layout.cell_count(), 0.0);
  const double level = surface.level;

  for (std::size_t v = 0; v < grad_vertices.size(); ++v) {
    const VertexEdge& ve = surface.vertex_edges[v];
    const double denom = ve.value_b - ve.value_a;
    if (std::abs(denom) < 1e-8) continue;  // flat edge: no stable derivative
    // Vertex position = p_a + t * spacing * e_axis with t = (L-a)/(b-a).
    const double gdot = grad_vertices[v][ve.axis] * grid.layout.spacing;
    if (ve.corner_a >= 0)
      grad_grid[static_cast<std::size_t>(ve.corner_a)] +=
          gdot * (level - ve.value_b) / (denom * denom);
    if (ve.corner_b >= 0)
      grad_grid[static_cast<std::size_t>(ve.corner_b)] -=
          gdot * (level - ve.value_a) / (denom * denom);
  }
  return grad_grid;
}

}  // namespace mvr
