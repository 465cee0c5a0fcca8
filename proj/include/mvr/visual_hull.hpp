#pragma once

#include <cstdint>
#include <vector>

#include "mvr/dataset.hpp"
#include "mvr/grid.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

struct OccupancyGrid {
  GridLayout layout;  // node (i,j,k) is the center of cell (i,j,k)
  std::vector<std::uint8_t> occupied;
  bool empty_warning = false;  // some view had an all-background mask

  std::size_t count_occupied() const;
};

// Space carving over the cubified dataset bounds: a cell stays occupied iff
// its center projects in front of every camera and lands on foreground in
// every view; projections outside an image leave the cell unconstrained for
// that view.
OccupancyGrid carve(const MultiViewDataset& dataset, int res);

// Marching cubes at level 0.5 over the lightly smoothed occupancy (3^3
// neighborhood average blended half/half with the cell itself, so isolated
// cells survive). Throws when the grid is empty.
TriMesh initial_mesh(const OccupancyGrid& grid);

}  // namespace mvr
