#include "mvr/patch_warp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "mvr/rng.hpp"

namespace mvr {

namespace {

struct RelativePose {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
};

RelativePose relative_pose(const Camera& cam_ref, const Camera& cam_src) {
  // T_src * T_ref^{-1} restricted to the rigid 3x4 block.
  const Eigen::Matrix3d Rr = cam_ref.rotation(), Rs = cam_src.rotation();
  const Eigen::Vector3d tr = cam_ref.translation(), ts = cam_src.translation();
  RelativePose rel;
  rel.R = Rs * Rr.transpose();
  rel.t = ts - rel.R * tr;
  return rel;
}

// d(pixel)/d(camera point) for an upper-triangular K.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Matrix3d& K,
                                                const Eigen::Vector3d& X) {
  const double iz = 1.0 / X.z();
  Eigen::Matrix<double, 2, 3> J;
  J << K(0, 0) * iz, K(0, 1) * iz, -(K(0, 0) * X.x() + K(0, 1) * X.y()) * iz * iz,
      0.0, K(1, 1) * iz, -K(1, 1) * X.y() * iz * iz;
  return J;
}

}  // namespace

std::vector<Patch> sample_patches(const AttributeMaps& maps_ref, int count, int patch_size,
                                  std::uint64_t seed) {
  if (patch_size < 3 || patch_size % 2 == 0)
    throw std::invalid_argument("sample_patches: patch_size must be odd and >= 3");
  const int margin = (patch_size + 1) / 2;
  std::vector<Patch> eligible;
  for (int y = margin; y < maps_ref.height - margin; ++y)
    for (int x = margin; x < maps_ref.width - margin; ++x)
      if (maps_ref.covered(x, y)) eligible.push_back({x, y});
  if (eligible.empty()) {
    std::cerr << "warning: sample_patches: no covered pixels\n";
    return {};
  }
  if (static_cast<std::size_t>(count) >= eligible.size()) return eligible;

  Rng rng(seed);
  std::vector<Patch> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.next_below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
    out.push_back(eligible[i]);
  }
  return out;
}

bool bilinear(const Image& map, const Eigen::Vector2d& coords, double* out,
              Eigen::Vector2d* grad, int channel) {
  const double x = coords.x(), y = coords.y();
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  if (x < 0.0 || y < 0.0 || x > map.width() - 1.0 || y > map.height() - 1.0) return false;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 >= map.width() - 1) x0 = map.width() - 2;
  if (y0 >= map.height() - 1) y0 = map.height() - 2;
  if (map.width() == 1) x0 = 0;
  if (map.height() == 1) y0 = 0;
  const double fx = x - x0, fy = y - y0;
  const double v00 = map.at(x0, y0, channel);
  const double v10 = map.at(std::min(x0 + 1, map.width() - 1), y0, channel);
  const double v01 = map.at(x0, std::min(y0 + 1, map.height() - 1), channel);
  const double v11 = map.at(std::min(x0 + 1, map.width() - 1),
                            std::min(y0 + 1, map.height() - 1), channel);
  *out = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
         fx * fy * v11;
  if (grad) {
    grad->x() = (1 - fy) * (v10 - v00) + fy * (v11 - v01);
    grad->y() = (1 - fx) * (v01 - v00) + fx * (v11 - v10);
  }
  return true;
}

PatchWarp warp_patch(const Patch& patch, int patch_size, const AttributeMaps& maps_ref,
                     const Camera& cam_ref, const Camera& cam_src) {
  const int half = patch_size / 2;
  const RelativePose rel = relative_pose(cam_ref, cam_src);
  PatchWarp out;
  const std::size_t k2 = static_cast<std::size_t>(patch_size) * patch_size;
  out.src_coords.assign(k2, Eigen::Vector2d::Zero());
  out.src_cam_points.assign(k2, Eigen::Vector3d::Zero());
  out.valid.assign(k2, 0);

  std::size_t idx = 0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx, ++idx) {
      const int x = patch.cx + dx, y = patch.cy + dy;
      if (x < 0 || y < 0 || x >= maps_ref.width || y >= maps_ref.height) continue;
      const std::size_t p = maps_ref.pix(x, y);
      if (maps_ref.face_id[p] < 0) continue;
      const Eigen::Vector3d xr(maps_ref.position[3 * p], maps_ref.position[3 * p + 1],
                               maps_ref.position[3 * p + 2]);
      const Eigen::Vector3d xs = rel.R * xr + rel.t;
      if (xs.z() <= 0.0) continue;
      out.src_cam_points[idx] = xs;
      out.src_coords[idx] = cam_src.project_camera(xs);
      out.valid[idx] = 1;
    }
  return out;
}

bool ncc(const std::vector<double>& a, const std::vector<double>& b,
         const std::vector<std::uint8_t>& valid, double* out) {
  double sa = 0, sb = 0;
  int n = 0;
  for (std::size_t i = 0; i < valid.size(); ++i)
    if (valid[i]) {
      sa += a[i];
      sb += b[i];
      ++n;
    }
  if (n < 2) return false;
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < valid.size(); ++i)
    if (valid[i]) {
      const double da = a[i] - ma, db = b[i] - mb;
      cov += da * db;
      va += da * da;
      vb += db * db;
    }
  cov /= n;
  va /= n;
  vb /= n;
  *out = cov / std::sqrt(va * vb + 1e-8);
  return true;
}

NccLossResult ncc_loss(const std::vector<Patch>& patches, const AttributeMaps& maps_ref,
                       const Image& gray_ref, const Camera& cam_ref,
                       const std::vector<NccSource>& sources, const NccOptions& opt) {
  NccLossResult res;
  const std::size_t n_pix = static_cast<std::size_t>(maps_ref.width) * maps_ref.height;
  res.grad_position.assign(n_pix * 3, 0.0);
  const int k = opt.patch_size;
  const int half = k / 2;
  const std::size_t k2 = static_cast<std::size_t>(k) * k;

  double loss_sum = 0.0;

  for (const auto& src : sources) {
    const RelativePose rel = relative_pose(cam_ref, *src.camera);
    for (const Patch& patch : patches) {
      // Plane for the point-based ablation: center rendered position and the
      // world normal moved into the reference camera frame.
      Eigen::Vector3d plane_n = Eigen::Vector3d::UnitZ();
      double plane_d = 0.0;
      const std::size_t cpix = maps_ref.pix(patch.cx, patch.cy);
      const Eigen::Vector3d center_pos(maps_ref.position[3 * cpix],
                                       maps_ref.position[3 * cpix + 1],
                                       maps_ref.position[3 * cpix + 2]);
      if (opt.point_based_warp) {
        const Eigen::Vector3d nw(maps_ref.normal[3 * cpix], maps_ref.normal[3 * cpix + 1],
                                 maps_ref.normal[3 * cpix + 2]);
        plane_n = cam_ref.rotation() * nw;
        plane_d = plane_n.dot(center_pos);
        if (std::abs(plane_d) < 1e-12) continue;
      }

      std::vector<double> a(k2, 0.0), b(k2, 0.0);
      std::vector<std::uint8_t> valid(k2, 0), pass(k2, 0);
      std::vector<Eigen::Vector2d> grad_b_coord(k2);      // d b / d src pixel coords
      std::vector<Eigen::Vector3d> ref_points(k2);        // reference-camera 3D point
      std::vector<Eigen::Matrix<double, 2, 3>> jac(k2);   // d src pixel / d src point
      int n_valid = 0, n_pass = 0;

      std::size_t idx = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx, ++idx) {
          const int x = patch.cx + dx, y = patch.cy + dy;
          if (x < 0 || y < 0 || x >= maps_ref.width || y >= maps_ref.height) continue;
          const std::size_t p = maps_ref.pix(x, y);
          if (maps_ref.face_id[p] < 0) continue;

          Eigen::Vector3d xr;
          if (opt.point_based_warp) {
            const Eigen::Vector3d ray = cam_ref.unproject(Eigen::Vector2d(x, y), 1.0);
            const double denom = plane_n.dot(ray);
            if (std::abs(denom) < 1e-12) continue;
            xr = ray * (plane_d / denom);
            if (xr.z() <= 0.0) continue;
          } else {
            xr = Eigen::Vector3d(maps_ref.position[3 * p], maps_ref.position[3 * p + 1],
                                 maps_ref.position[3 * p + 2]);
          }
          const Eigen::Vector3d xs = rel.R * xr + rel.t;
          if (xs.z() <= 0.0) continue;
          const Eigen::Vector2d c = src.camera->project_camera(xs);

          double gval;
          Eigen::Vector2d ggrad;
          if (!bilinear(*src.gray, c, &gval, &ggrad)) continue;

          // Depth gate on the rendered source depth; background corners fail.
          const int cx0 = static_cast<int>(std::floor(c.x()));
          const int cy0 = static_cast<int>(std::floor(c.y()));
          bool depth_ok = true;
          double dsum = 0.0;
          {
            const int x1 = std::min(cx0 + 1, src.maps->width - 1);
            const int y1 = std::min(cy0 + 1, src.maps->height - 1);
            const double fx = c.x() - cx0, fy = c.y() - cy0;
            const double d00 = src.maps->depth[src.maps->pix(cx0, cy0)];
            const double d10 = src.maps->depth[src.maps->pix(x1, cy0)];
            const double d01 = src.maps->depth[src.maps->pix(cx0, y1)];
            const double d11 = src.maps->depth[src.maps->pix(x1, y1)];
            if (!std::isfinite(d00) || !std::isfinite(d10) || !std::isfinite(d01) ||
                !std::isfinite(d11))
              depth_ok = false;
            else
              dsum = (1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d10 +
                     (1 - fx) * fy * d01 + fx * fy * d11;
          }

          valid[idx] = 1;
          ++n_valid;
          a[idx] = gray_ref.at(x, y);
          b[idx] = gval;
          grad_b_coord[idx] = ggrad;
          ref_points[idx] = xr;
          jac[idx] = projection_jacobian(src.camera->K(), xs);
          if (depth_ok && std::abs(xs.z() - dsum) < opt.delta_d) {
            pass[idx] = 1;
            ++n_pass;
          }
        }

      if (n_valid < 2 || 2 * n_pass < n_valid) {
        ++res.gated_out_pairs;
        continue;
      }
      double score;
      if (!ncc(a, b, valid, &score)) {
        ++res.gated_out_pairs;
        continue;
      }
      if (score <= opt.delta_ncc) {
        ++res.gated_out_pairs;
        continue;
      }

      ++res.contributing_pairs;
      loss_sum += 1.0 - score;

      // d(1-NCC)/db_q, then through the bilinear sample and the warp into the
      // reference position map (scaled by 1/pairs at the end).
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < k2; ++i)
        if (valid[i]) {
          ma += a[i];
          mb += b[i];
        }
      ma /= n_valid;
      mb /= n_valid;
      double cov = 0, va = 0, vb = 0;
      for (std::size_t i = 0; i < k2; ++i)
        if (valid[i]) {
          cov += (a[i] - ma) * (b[i] - mb);
          va += (a[i] - ma) * (a[i] - ma);
          vb += (b[i] - mb) * (b[i] - mb);
        }
      cov /= n_valid;
      va /= n_valid;
      vb /= n_valid;
      const double den = std::sqrt(va * vb + 1e-8);

      idx = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx, ++idx) {
          if (!valid[idx]) continue;
          const double dncc_db = (a[idx] - ma) / (n_valid * den) -
                                 cov * va * (b[idx] - mb) / (n_valid * den * den * den);
          const double dloss_db = -dncc_db;
          const Eigen::Vector2d gc = dloss_db * grad_b_coord[idx];
          const Eigen::Vector3d gxs = jac[idx].transpose() * gc;
          const Eigen::Vector3d gxr = rel.R.transpose() * gxs;
          if (opt.point_based_warp) {
            // Plane depth path only: X(q) = ray * (n . X0) / (n . ray).
            const Eigen::Vector3d ray =
                cam_ref.unproject(Eigen::Vector2d(patch.cx + dx, patch.cy + dy), 1.0);
            const double denom = plane_n.dot(ray);
            if (std::abs(denom) < 1e-12) continue;
            const Eigen::Vector3d g_center = (gxr.dot(ray) / denom) * plane_n;
            for (int c = 0; c < 3; ++c) res.grad_position[3 * cpix + c] += g_center[c];
          } else {
            const std::size_t p = maps_ref.pix(patch.cx + dx, patch.cy + dy);
            for (int c = 0; c < 3; ++c) res.grad_position[3 * p + c] += gxr[c];
          }
        }
    }
  }

  if (res.contributing_pairs > 0) {
    res.loss = loss_sum / res.contributing_pairs;
    const double scale = 1.0 / res.contributing_pairs;
    for (auto& g : res.grad_position) g *= scale;
  }
  return res;
}

}  // namespace mvr
