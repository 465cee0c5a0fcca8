#include "mvr/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace mvr {

Camera::Camera(const Eigen::Matrix3d& K, const Eigen::Matrix4d& T, int width, int height)
    : K_(K), T_(T), width_(width), height_(height) {
  validate();
  K_inv_ = K_.inverse();
}

void Camera::validate() const {
  if (width_ <= 0 || height_ <= 0) throw std::runtime_error("camera: non-positive image size");
  if (K_(0, 0) <= 0.0 || K_(1, 1) <= 0.0)
    throw std::runtime_error("camera: focal lengths must be strictly positive");
  if (std::abs(K_(1, 0)) > 1e-12 || std::abs(K_(2, 0)) > 1e-12 || std::abs(K_(2, 1)) > 1e-12)
    throw std::runtime_error("camera: K must be upper triangular");
  if (std::abs(K_(2, 2) - 1.0) > 1e-9) throw std::runtime_error("camera: K(2,2) must be 1");
  const Eigen::Matrix3d R = T_.topLeftCorner<3, 3>();
  if ((R * R.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    throw std::runtime_error("camera: rotation block is not orthonormal");
  if (R.determinant() < 0.0) throw std::runtime_error("camera: rotation determinant must be +1");
  if ((T_.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
    throw std::runtime_error("camera: last row of T must be (0,0,0,1)");
}

Projection Camera::project(const Eigen::Vector3d& point_world) const {
  const Eigen::Vector3d pc = world_to_camera(point_world);
  Projection out;
  out.depth = pc.z();
  if (pc.z() <= 0.0) return out;
  out.pixel = project_camera(pc);
  out.in_front = true;
  return out;
}

Eigen::Vector2d Camera::project_camera(const Eigen::Vector3d& pc) const {
  const Eigen::Vector3d h = K_ * pc;
  return {h.x() / h.z(), h.y() / h.z()};
}

Eigen::Vector3d Camera::unproject(const Eigen::Vector2d& pixel, double depth) const {
  if (depth <= 0.0) throw std::invalid_argument("unproject: depth must be > 0");
  return K_inv_ * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0) * depth;
}

}  // namespace mvr
