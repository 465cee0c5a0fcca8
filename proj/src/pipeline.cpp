#include "mvr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "mvr/adam.hpp"
#include "mvr/marching_cubes.hpp"
#include "mvr/patch_warp.hpp"
#include "mvr/poisson.hpp"
#include "mvr/rng.hpp"
#include "mvr/visual_hull.hpp"

namespace mvr {

namespace {

void flatten(const std::vector<Eigen::Vector3d>& v, std::vector<double>& out) {
  out.resize(v.size() * 3);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int c = 0; c < 3; ++c) out[3 * i + c] = v[i][c];
}

void unflatten(const std::vector<double>& flat, std::vector<Eigen::Vector3d>& out) {
  out.resize(flat.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int c = 0; c < 3; ++c) out[i][c] = flat[3 * i + c];
}

struct Stage1Forward {
  IndicatorGrid chi;
  IndicatorGrid tanh_chi;
  IsoSurface surface;
};

Stage1Forward stage1_forward(const OrientedPointCloud& points, const Config& config,
                             const Aabb& bounds) {
  Stage1Forward fwd;
  SplatResult sp = splat(points, config.grid_res_dpsr, bounds);
  fwd.chi = solve_indicator(sp.field, config.sig, points);
  fwd.tanh_chi = tanh_grid(fwd.chi);
  fwd.surface = marching_cubes(fwd.tanh_chi, 0.0);
  return fwd;
}

}  // namespace

SilhouetteLoss silhouette_loss(const std::vector<const AttributeMaps*>& rendered,
                               const std::vector<const Image*>& masks) {
  if (rendered.size() != masks.size() || rendered.empty())
    throw std::runtime_error("silhouette_loss: view count mismatch");
  SilhouetteLoss out;
  out.grad.resize(rendered.size());
  const double view_norm = 1.0 / static_cast<double>(rendered.size());
  for (std::size_t v = 0; v < rendered.size(); ++v) {
    const AttributeMaps& maps = *rendered[v];
    const Image& mask = *masks[v];
    if (mask.width() != maps.width || mask.height() != maps.height)
      throw std::runtime_error("silhouette_loss: mask size mismatch");
    const std::size_t n = static_cast<std::size_t>(maps.width) * maps.height;
    out.grad[v].assign(n, 0.0);
    const double pix_norm = 1.0 / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double diff = maps.silhouette[p] - mask.data()[p];
      acc += diff * diff;
      out.grad[v][p] = 2.0 * diff * pix_norm * view_norm;
    }
    out.loss += acc * pix_norm * view_norm;
  }
  return out;
}

OrientedPointCloud resample_points(const TriMesh& mesh, std::size_t count,
                                   std::uint64_t seed) {
  return sample_surface(mesh, count, seed);
}

void write_loss_log(const std::vector<LossRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log: " + path);
  out << "epoch,view,L_sil,L_ncc,L_sfs,total\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.view, r.l_sil,
                  r.l_ncc, r.l_sfs, r.total);
    out << buf;
  }
}

OrientedPointCloud visual_hull_init(const MultiViewDataset& dataset, const Config& config) {
  const OccupancyGrid grid = carve(dataset, config.grid_res_visualhull);
  const TriMesh hull = initial_mesh(grid);
  return sample_surface(hull, static_cast<std::size_t>(config.n_points),
                        Rng::derive(config.seed, 0x696e6974ULL));
}

Stage1Result stage1_optimize(const MultiViewDataset& dataset, const Config& config,
                             const OrientedPointCloud& init, const Stage1Options& options) {
  config.validate();
  if (init.size() < 4) throw std::runtime_error("stage1: need at least 4 points");
  const Aabb bounds = dataset.bounds;
  const int n_views = static_cast<int>(dataset.views.size());

  Stage1Result result;
  result.points = init;

  if (config.epochs_stage1 == 0) {
    Stage1Forward fwd = stage1_forward(result.points, config, bounds);
    result.mesh = std::move(fwd.surface.mesh);
    return result;
  }

  std::vector<double> pos_flat, nrm_flat, gpos_flat, gnrm_flat;
  flatten(result.points.positions, pos_flat);
  flatten(result.points.normals, nrm_flat);
  AdamState state_pos(pos_flat.size()), state_nrm(nrm_flat.size());

  double lr = config.lr_points;
  OrientedPointCloud last_valid = result.points;
  int failures = 0;

  for (int epoch = 0; epoch < config.epochs_stage1; ++epoch) {
    for (int view = 0; view < n_views; ++view) {
      Stage1Forward fwd;
      try {
        fwd = stage1_forward(result.points, config, bounds);
      } catch (const std::exception& e) {
        ++failures;
        ++result.lr_halvings;
        if (failures >= 2)
          throw std::runtime_error(std::string("stage1: optimization collapsed twice (") +
                                   e.what() + ")");
        std::cerr << "warning: stage1: forward failed (" << e.what()
                  << "); reverting and halving the learning rate\n";
        result.points = last_valid;
        flatten(result.points.positions, pos_flat);
        flatten(result.points.normals, nrm_flat);
        state_pos.reset(pos_flat.size());
        state_nrm.reset(nrm_flat.size());
        lr *= 0.5;
        continue;
      }

      const View& ref = dataset.views[view];
      const AttributeMaps maps_ref = rasterize(fwd.surface.mesh, ref.camera);

      const AttributeMaps* maps_ptr = &maps_ref;
      const Image* mask_ptr = &ref.mask;
      SilhouetteLoss sil = silhouette_loss({maps_ptr}, {mask_ptr});

      NccLossResult ncc_res;
      if (options.use_ncc) {
        std::vector<AttributeMaps> src_maps;
        std::vector<NccSource> sources;
        src_maps.reserve(dataset.source_neighbors[view].size());
        for (const int s : dataset.source_neighbors[view])
          src_maps.push_back(rasterize(fwd.surface.mesh, dataset.views[s].camera));
        for (std::size_t k = 0; k < src_maps.size(); ++k) {
          const int s = dataset.source_neighbors[view][k];
          sources.push_back({&dataset.views[s].gray, &src_maps[k], &dataset.views[s].camera});
        }
        NccOptions opt;
        opt.patch_size = config.patch_size;
        opt.delta_ncc = config.delta_ncc;
        opt.delta_d = config.delta_d;
        opt.point_based_warp = options.point_based_warp;
        const std::vector<Patch> patches =
            sample_patches(maps_ref, config.patches_per_view, config.patch_size,
                           Rng::derive(config.seed, static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(view)));
        ncc_res = ncc_loss(patches, maps_ref, ref.gray, ref.camera, sources, opt);
      } else {
        ncc_res.grad_position.assign(
            static_cast<std::size_t>(maps_ref.width) * maps_ref.height * 3, 0.0);
      }

      MapGradients mg;
      mg.silhouette = std::move(sil.grad[0]);
      for (auto& g : mg.silhouette) g *= config.lambda_sil;
      mg.position = std::move(ncc_res.grad_position);
      for (auto& g : mg.position) g *= config.lambda_ncc;

      const RasterGradients rg = raster_adjoint(mg, fwd.surface.mesh, ref.camera, maps_ref);
      const std::vector<double> grad_tanh = mc_adjoint(rg.vertices, fwd.surface, fwd.tanh_chi);
      const std::vector<double> grad_chi = tanh_grid_adjoint(grad_tanh, fwd.chi);
      const PointGradients pg =
          dpsr_adjoint(grad_chi, result.points, config.sig, config.grid_res_dpsr, bounds);

      flatten(pg.positions, gpos_flat);
      flatten(pg.normals, gnrm_flat);
      adam_step(pos_flat, gpos_flat, state_pos, lr);
      adam_step(nrm_flat, gnrm_flat, state_nrm, lr);
      unflatten(pos_flat, result.points.positions);
      unflatten(nrm_flat, result.points.normals);
      for (auto& n : result.points.normals) {
        const double len = n.norm();
        if (len > 1e-12) n /= len;
      }
      flatten(result.points.normals, nrm_flat);
      last_valid = result.points;

      LossRow row;
      row.epoch = epoch;
      row.view = view;
      row.l_sil = sil.loss;
      row.l_ncc = ncc_res.loss;
      row.total = config.lambda_sil * sil.loss + config.lambda_ncc * ncc_res.loss;
      result.loss_log.push_back(row);
    }

    if ((epoch + 1) % config.resample_every == 0 && epoch + 1 < config.epochs_stage1) {
      Stage1Forward fwd = stage1_forward(result.points, config, bounds);
      result.points = sample_surface(fwd.surface.mesh,
                                     static_cast<std::size_t>(config.n_points),
                                     Rng::derive(config.seed, 0x7265736dULL,
                                                 static_cast<std::uint64_t>(epoch)));
      flatten(result.points.positions, pos_flat);
      flatten(result.points.normals, nrm_flat);
      state_pos.reset(pos_flat.size());
      state_nrm.reset(nrm_flat.size());
      last_valid = result.points;
    }
  }

  Stage1Forward fwd = stage1_forward(result.points, config, bounds);
  result.mesh = std::move(fwd.surface.mesh);
  return result;
}

Stage2Result stage2_refine(const TriMesh& mesh_in, const MultiViewDataset& dataset,
                           const Config& config, const Stage2Options& options) {
  config.validate();
  Stage2Result result;
  result.mesh = mesh_in;
  TriMesh& mesh = result.mesh;
  mesh.vertex_normals = compute_vertex_normals(mesh);
  if (!mesh.has_albedo())
    mesh.vertex_albedo.assign(mesh.vertex_count(), Eigen::Vector3d::Constant(0.5));
  const VertexAdjacency adj = build_adjacency(mesh);
  const int n_views = static_cast<int>(dataset.views.size());

  // Lights are estimated once from the incoming geometry and then frozen.
  std::vector<std::uint8_t> light_ok(n_views, 0);
  result.lights.resize(n_views);
  for (int v = 0; v < n_views; ++v) {
    const AttributeMaps maps = rasterize(mesh, dataset.views[v].camera);
    try {
      result.lights[v] = estimate_light(maps, dataset.views[v].gray);
      if (result.lights[v].degenerate) {
        std::cerr << "warning: stage2: degenerate light for view " << v
                  << "; view excluded from the shading loss\n";
        continue;
      }
      light_ok[v] = 1;
    } catch (const std::exception& e) {
      std::cerr << "warning: stage2: light estimation failed for view " << v << " ("
                << e.what() << "); view excluded\n";
    }
  }
  if (config.shared_light) {
    Eigen::Matrix<double, 9, 1> mean = Eigen::Matrix<double, 9, 1>::Zero();
    int n_ok = 0;
    for (int v = 0; v < n_views; ++v)
      if (light_ok[v]) {
        mean += result.lights[v].coeffs;
        ++n_ok;
      }
    if (n_ok == 0) throw std::runtime_error("stage2: no view yielded a usable light");
    mean /= static_cast<double>(n_ok);
    for (int v = 0; v < n_views; ++v)
      if (light_ok[v]) result.lights[v].coeffs = mean;
  }

  std::vector<double> albedo_flat, grad_flat, pos_flat;
  flatten(mesh.vertex_albedo, albedo_flat);
  AdamState state_albedo(albedo_flat.size());

  auto project_albedo = [&] {
    for (auto& a : albedo_flat) a = std::clamp(a, 0.0, 1.0);
    unflatten(albedo_flat, mesh.vertex_albedo);
  };

  // Phase A: albedo only.
  for (int epoch = 0; epoch < config.epochs_albedo; ++epoch)
    for (int view = 0; view < n_views; ++view) {
      if (!light_ok[view]) continue;
      const View& ref = dataset.views[view];
      const AttributeMaps maps = rasterize(mesh, ref.camera);
      const SfsResult sfs = sfs_loss(maps, result.lights[view], ref.image, false);
      const LaplacianResult lap = laplacian_reg(mesh, adj, mesh.vertex_albedo);

      MapGradients mg;
      mg.albedo = sfs.grad_albedo;
      for (auto& g : mg.albedo) g *= config.lambda_sfs;
      const RasterGradients rg = raster_adjoint(mg, mesh, ref.camera, maps);

      grad_flat.assign(albedo_flat.size(), 0.0);
      for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
        for (int c = 0; c < 3; ++c)
          grad_flat[3 * i + c] =
              rg.vertex_albedo[i][c] + config.lambda_albedo * lap.grad[i][c];
      adam_step(albedo_flat, grad_flat, state_albedo, config.lr_albedo_init);
      project_albedo();

      LossRow row;
      row.epoch = epoch;
      row.view = view;
      row.l_sfs = sfs.loss;
      row.total = config.lambda_sfs * sfs.loss + config.lambda_albedo * lap.loss;
      result.loss_log.push_back(row);
    }

  // Phase B: joint vertex + albedo refinement at fixed topology.
  if (options.refine_geometry && config.epochs_joint > 0) {
    flatten(mesh.vertices, pos_flat);
    AdamState state_pos(pos_flat.size());
    state_albedo.reset(albedo_flat.size());
    std::vector<double> grad_pos_flat;

    for (int epoch = 0; epoch < config.epochs_joint; ++epoch)
      for (int view = 0; view < n_views; ++view) {
        if (!light_ok[view]) continue;
        const View& ref = dataset.views[view];
        mesh.vertex_normals = compute_vertex_normals(mesh);
        const AttributeMaps maps = rasterize(mesh, ref.camera);
        const SfsResult sfs = sfs_loss(maps, result.lights[view], ref.image, true);
        const LaplacianResult lap_mesh = laplacian_reg(mesh, adj, mesh.vertices);
        const LaplacianResult lap_alb = laplacian_reg(mesh, adj, mesh.vertex_albedo);

        MapGradients mg;
        mg.albedo = sfs.grad_albedo;
        mg.normal = sfs.grad_normal;
        for (auto& g : mg.albedo) g *= config.lambda_sfs;
        for (auto& g : mg.normal) g *= config.lambda_sfs;
        const RasterGradients rg = raster_adjoint(mg, mesh, ref.camera, maps);
        const std::vector<Eigen::Vector3d> gnorm =
            vertex_normals_adjoint(mesh, rg.vertex_normals);

        grad_pos_flat.assign(pos_flat.size(), 0.0);
        grad_flat.assign(albedo_flat.size(), 0.0);
        for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
          for (int c = 0; c < 3; ++c) {
            grad_pos_flat[3 * i + c] = rg.vertices[i][c] + gnorm[i][c] +
                                       config.lambda_mesh * lap_mesh.grad[i][c];
            grad_flat[3 * i + c] =
                rg.vertex_albedo[i][c] + config.lambda_albedo * lap_alb.grad[i][c];
          }
        adam_step(pos_flat, grad_pos_flat, state_pos, config.lr_vertices);
        adam_step(albedo_flat, grad_flat, state_albedo, config.lr_albedo_joint);
        unflatten(pos_flat, mesh.vertices);
        project_albedo();

        LossRow row;
        row.epoch = config.epochs_albedo + epoch;
        row.view = view;
        row.l_sfs = sfs.loss;
        row.total = config.lambda_sfs * sfs.loss + config.lambda_mesh * lap_mesh.loss +
                    config.lambda_albedo * lap_alb.loss;
        result.loss_log.push_back(row);
      }
  }

  mesh.vertex_normals = compute_vertex_normals(mesh);
  return result;
}

}  // namespace mvr
