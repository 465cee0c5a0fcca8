#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace mvr {

// Cubic lattice of res^3 nodes; node (i,j,k) sits at origin + spacing*(i,j,k).
// Storage is x-fastest: index = (z*res + y)*res + x.
struct GridLayout {
  int res = 0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double spacing = 0.0;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(res) * res * res;
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * res + y) * res + x;
  }
  Eigen::Vector3d node_position(int x, int y, int z) const {
    return origin + spacing * Eigen::Vector3d(x, y, z);
  }
  // Continuous grid coordinates of a world point.
  Eigen::Vector3d to_grid(const Eigen::Vector3d& p) const {
    return (p - origin) / spacing;
  }
};

struct IndicatorGrid {
  GridLayout layout;
  std::vector<double> values;      // res^3 scalars
  double mean_offset = 0.0;        // already subtracted from values

  double at(int x, int y, int z) const { return values[layout.index(x, y, z)]; }
  double& at(int x, int y, int z) { return values[layout.index(x, y, z)]; }
};

struct VectorGrid {
  GridLayout layout;
  std::vector<double> comp[3];     // res^3 per component
};

}  // namespace mvr
