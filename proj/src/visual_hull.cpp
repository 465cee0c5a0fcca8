#include "mvr/visual_hull.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "mvr/marching_cubes.hpp"
#include "mvr/parallel.hpp"

namespace mvr {

std::size_t OccupancyGrid::count_occupied() const {
  std::size_t n = 0;
  for (const auto c : occupied) n += c;
  return n;
}

OccupancyGrid carve(const MultiViewDataset& dataset, int res) {
  if (res < 8) throw std::runtime_error("carve: res must be >= 8");
  if (dataset.views.empty()) throw std::runtime_error("carve: dataset has no views");

  OccupancyGrid grid;
  const Aabb cube = dataset.bounds.cubified();
  grid.layout.res = res;
  grid.layout.spacing = cube.extent().x() / res;
  // Nodes are cell centers.
  grid.layout.origin = cube.min + 0.5 * grid.layout.spacing * Eigen::Vector3d::Ones();
  grid.occupied.assign(grid.layout.cell_count(), 0);

  for (const auto& view : dataset.views) {
    bool any = false;
    for (const double m : view.mask.data())
      if (m > 0.5) { any = true; break; }
    if (!any) {
      grid.empty_warning = true;
      std::cerr << "warning: carve: a view has an all-background mask; hull is empty\n";
      return grid;
    }
  }

  parallel_chunks(res, 16, [&](std::size_t, std::size_t zb, std::size_t ze) {
    for (std::size_t z = zb; z < ze; ++z)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          const Eigen::Vector3d p = grid.layout.node_position(x, y, static_cast<int>(z));
          bool inside = true;
          for (const auto& view : dataset.views) {
            const Projection proj = view.camera.project(p);
            if (!proj.in_front) { inside = false; break; }
            const int u = static_cast<int>(std::lround(proj.pixel.x()));
            const int v = static_cast<int>(std::lround(proj.pixel.y()));
            if (u < 0 || v < 0 || u >= view.mask.width() || v >= view.mask.height())
              continue;  // outside the image: unconstrained for this view
            if (view.mask.at(u, v) < 0.5) { inside = false; break; }
          }
          if (inside) grid.occupied[grid.layout.index(x, y, static_cast<int>(z))] = 1;
        }
  });
  return grid;
}

TriMesh initial_mesh(const OccupancyGrid& grid) {
  if (grid.count_occupied() == 0)
    throw std::runtime_error("initial_mesh: occupancy grid is empty");

  const int res = grid.layout.res;
  IndicatorGrid field;
  field.layout = grid.layout;
  field.values.assign(grid.layout.cell_count(), 0.0);

  parallel_chunks(res, 16, [&](std::size_t, std::size_t zb, std::size_t ze) {
    for (std::size_t z = zb; z < ze; ++z)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          double sum = 0.0;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy, nz = static_cast<int>(z) + dz;
                if (nx < 0 || ny < 0 || nz < 0 || nx >= res || ny >= res || nz >= res)
                  continue;  // outside counts as empty
                sum += grid.occupied[grid.layout.index(nx, ny, nz)];
              }
          const double self = grid.occupied[grid.layout.index(x, y, static_cast<int>(z))];
          field.values[grid.layout.index(x, y, static_cast<int>(z))] =
              0.5 * self + 0.5 * (sum / 27.0);
        }
  });

  IsoSurface surf = marching_cubes(field, 0.5);
  return std::move(surf.mesh);
}

}  // namespace mvr
