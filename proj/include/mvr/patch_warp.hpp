#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mvr/camera.hpp"
#include "mvr/image.hpp"
#include "mvr/rasterizer.hpp"

namespace mvr {

struct Patch {
  int cx = 0, cy = 0;  // center pixel in the reference view
};

// Uniform draw without replacement from covered pixels at least ceil(k/2)
// from the border; deterministic under seed. Returns everything eligible
// when count exceeds the eligible set (empty + warning when nothing is).
std::vector<Patch> sample_patches(const AttributeMaps& maps_ref, int count, int patch_size,
                                  std::uint64_t seed);

// Standard 4-neighbor blend; coordinates outside [0,W-1]x[0,H-1] are invalid
// (no clamping).
bool bilinear(const Image& map, const Eigen::Vector2d& coords, double* out,
              Eigen::Vector2d* grad = nullptr, int channel = 0);

struct PatchWarp {
  std::vector<Eigen::Vector2d> src_coords;     // k*k
  std::vector<Eigen::Vector3d> src_cam_points; // k*k, source-camera frame
  std::vector<std::uint8_t> valid;             // k*k
};

// Lifts each patch pixel to its rendered 3D position, moves it into the
// source camera frame and projects it. Pixels that are background in the
// reference view or land behind the source camera are flagged invalid.
PatchWarp warp_patch(const Patch& patch, int patch_size, const AttributeMaps& maps_ref,
                     const Camera& cam_ref, const Camera& cam_src);

// Covariance over valid entries divided by sqrt(var*var + 1e-8); defined
// (returns false) only when fewer than two entries are valid.
bool ncc(const std::vector<double>& a, const std::vector<double>& b,
         const std::vector<std::uint8_t>& valid, double* out);

struct NccSource {
  const Image* gray = nullptr;          // captured source grayscale
  const AttributeMaps* maps = nullptr;  // rendered source maps (depth gate)
  const Camera* camera = nullptr;
};

struct NccOptions {
  int patch_size = 11;
  double delta_ncc = 0.5;
  double delta_d = 0.01;
  bool point_based_warp = false;  // homography from the center pixel's plane
};

struct NccLossResult {
  double loss = 0.0;
  int contributing_pairs = 0;
  int gated_out_pairs = 0;
  std::vector<double> grad_position;  // H*W*3 w.r.t. the reference position map
};

// Occlusion-gated photometric loss: mean of (1 - NCC) over (patch, source)
// pairs whose NCC clears delta_ncc and where at least half the valid pixels
// pass the reprojected-depth gate. Gates are constants in the backward pass;
// gradients flow through the bilinear source samples into the warp and the
// reference position map.
NccLossResult ncc_loss(const std::vector<Patch>& patches, const AttributeMaps& maps_ref,
                       const Image& gray_ref, const Camera& cam_ref,
                       const std::vector<NccSource>& sources, const NccOptions& opt);

}  // namespace mvr
