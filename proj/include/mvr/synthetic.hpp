#pragma once

#include <string>

#include "mvr/dataset.hpp"
#include "mvr/mesh.hpp"
#include "mvr/shading.hpp"

namespace mvr {

struct SyntheticOptions {
  std::string shape = "sphere";  // sphere | bumpy-sphere | torus | cube
  int views = 12;
  int resolution = 256;
  SHLight light;       // defaults to a directional-ish light when untouched
  int holdout = 0;     // extra views written as a nested dataset
  int subdivisions = 4;
  double bump_amplitude = 0.12;  // relative, bumpy shapes only
  double bump_frequency = 5.0;
  std::uint64_t seed = 0;

  SyntheticOptions();
};

// Analytic mesh with procedural per-vertex albedo.
TriMesh make_shape(const SyntheticOptions& opt);

// Shaded render of a mesh under an SH light; background is black.
Image render_shaded(const TriMesh& mesh, const Camera& camera, const SHLight& light);

// Cameras on a circle around the origin with alternating elevation.
std::vector<Camera> circle_cameras(int count, int resolution, double radius = 1.3,
                                   double phase = 0.0);

// Writes a complete dataset directory (cameras.json, images/, masks/) plus
// gt_mesh.ply and gt_light.json; masks are the quantized silhouette channel
// of the renders. With holdout > 0 a nested `holdout/` dataset is written
// from cameras interleaved between the training ones.
void make_synthetic(const std::string& out_dir, const SyntheticOptions& opt);

}  // namespace mvr
