#pragma once

#include <Eigen/Core>
#include <cmath>
#include <filesystem>
#include <string>

#include "mvr/camera.hpp"
#include "mvr/mesh.hpp"
#include "mvr/rng.hpp"

namespace testutil {

// K = [[100,0,50],[0,100,50],[0,0,1]] on a 100x100 image, identity pose.
inline mvr::Camera simple_camera(const Eigen::Matrix4d& T = Eigen::Matrix4d::Identity(),
                                 int size = 100) {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = K(1, 1) = 100.0;
  K(0, 2) = K(1, 2) = 50.0;
  return mvr::Camera(K, T, size, size);
}

// Uniformly distributed points on a sphere with outward normals.
inline mvr::OrientedPointCloud sphere_cloud(std::size_t count, double radius,
                                            const Eigen::Vector3d& center,
                                            std::uint64_t seed) {
  mvr::Rng rng(seed);
  mvr::OrientedPointCloud pc;
  pc.positions.reserve(count);
  pc.normals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 2.0 * rng.next_double() - 1.0;
    const double phi = 2.0 * M_PI * rng.next_double();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d n(r * std::cos(phi), r * std::sin(phi), z);
    pc.positions.push_back(center + radius * n);
    pc.normals.push_back(n);
  }
  return pc;
}

// Scratch directory under the build tree, wiped per call site name.
inline std::string scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "mvrecon_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
