#pragma once

#include <string>
#include <vector>

#include "mvr/camera.hpp"
#include "mvr/image.hpp"
#include "mvr/mesh.hpp"

namespace mvr {

struct View {
  Image image;      // H x W x 3 in [0,1]
  Image gray;       // H x W luma
  Image mask;       // H x W, values exactly 0 or 1
  Camera camera;
};

struct MultiViewDataset {
  std::vector<View> views;
  std::vector<std::vector<int>> source_neighbors;  // per view, excludes self
  Aabb bounds;
};

// Directory layout: cameras.json + images/%04d.png + masks/%04d.png.
// Masks binarize at >127. Neighbors are the `neighbor_count` views with the
// smallest angle between optical axes.
MultiViewDataset load_dataset(const std::string& dir, int neighbor_count = 4);

// Writes the directory consumed by load_dataset.
void save_dataset(const std::string& dir, const std::vector<Camera>& cameras,
                  const std::vector<Image>& images, const std::vector<Image>& masks,
                  const Aabb& bounds);

std::vector<std::vector<int>> select_neighbors(const std::vector<Camera>& cameras,
                                               int neighbor_count);

}  // namespace mvr
