#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mvr {

struct Projection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool in_front = false;  // false when the point falls behind the camera
};

// Pinhole camera: K is upper triangular with positive focal entries,
// T maps world to camera coordinates (+z forward), pixel coordinate (x, y)
// addresses the center of pixel column x / row y.
class Camera {
 public:
  Camera() = default;
  Camera(const Eigen::Matrix3d& K, const Eigen::Matrix4d& T, int width, int height);

  const Eigen::Matrix3d& K() const { return K_; }
  const Eigen::Matrix4d& T() const { return T_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Eigen::Matrix3d rotation() const { return T_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return T_.topRightCorner<3, 1>(); }
  // Camera center and optical axis expressed in world coordinates.
  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }
  Eigen::Vector3d optical_axis() const { return rotation().row(2).transpose(); }

  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p) const {
    return rotation() * p + translation();
  }

  Projection project(const Eigen::Vector3d& point_world) const;
  // Pixel-space projection of a point already in camera coordinates.
  Eigen::Vector2d project_camera(const Eigen::Vector3d& point_camera) const;

  // Back-projects (pixel, depth) to camera coordinates; depth must be > 0.
  Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth) const;

 private:
  void validate() const;

  Eigen::Matrix3d K_ = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d K_inv_ = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d T_ = Eigen::Matrix4d::Identity();
  int width_ = 0;
  int height_ = 0;
};

}  // namespace mvr
