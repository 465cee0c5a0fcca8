#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvr/config.hpp"
#include "mvr/dataset.hpp"
#include "mvr/mesh.hpp"
#include "mvr/rasterizer.hpp"
#include "mvr/shading.hpp"

namespace mvr {

struct SilhouetteLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> grad;  // per view, H*W w.r.t. rendered M
};

// Mean over views of the mean-squared difference between rendered and target
// masks.
SilhouetteLoss silhouette_loss(const std::vector<const AttributeMaps*>& rendered,
                               const std::vector<const Image*>& masks);

// Area-weighted resampling of the current surface (spec name; thin wrapper
// over the mesh sampler).
OrientedPointCloud resample_points(const TriMesh& mesh, std::size_t count,
                                   std::uint64_t seed);

struct LossRow {
  int epoch = 0;
  int view = 0;
  double l_sil = 0.0;
  double l_ncc = 0.0;
  double l_sfs = 0.0;
  double total = 0.0;
};

void write_loss_log(const std::vector<LossRow>& rows, const std::string& path);

struct Stage1Options {
  bool use_ncc = true;            // --no-ncc ablation
  bool point_based_warp = false;  // --typical-ncc ablation
};

struct Stage1Result {
  OrientedPointCloud points;
  TriMesh mesh;
  std::vector<LossRow> loss_log;
  int lr_halvings = 0;
};

// Coarse shape optimization: every view once per epoch as reference;
// points -> Poisson indicator -> marching cubes -> rasterize, silhouette +
// NCC losses, adjoints back to the oriented points, Adam step, periodic
// resampling from the current surface.
Stage1Result stage1_optimize(const MultiViewDataset& dataset, const Config& config,
                             const OrientedPointCloud& init,
                             const Stage1Options& options = {});

struct Stage2Options {
  bool refine_geometry = true;  // --no-sfs keeps the albedo fit only
};

struct Stage2Result {
  TriMesh mesh;  // refined vertices + vertex_albedo
  std::vector<SHLight> lights;  // per view
  std::vector<LossRow> loss_log;
};

// Fixed-topology refinement: per-view lights estimated once from the input
// mesh, albedo-only phase, then joint vertex/albedo phase with Laplacian
// regularizers. Albedo is projected to [0,1] after every step.
Stage2Result stage2_refine(const TriMesh& mesh, const MultiViewDataset& dataset,
                           const Config& config, const Stage2Options& options = {});

// Shared by the CLI and tests: hull -> sampled points for stage 1.
OrientedPointCloud visual_hull_init(const MultiViewDataset& dataset, const Config& config);

}  // namespace mvr
