#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mvr/patch_warp.hpp"
#include "mvr/synthetic.hpp"

using namespace mvr;

TEST_SUITE_BEGIN("patch_warp");

namespace {

// Fronto-parallel textured quad at depth `z` filling the frame.
TriMesh big_quad(double z) {
  TriMesh m;
  m.vertices = {{-2, -2, z}, {2, -2, z}, {2, 2, z}, {-2, 2, z}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.vertex_normals.assign(4, Eigen::Vector3d(0, 0, -1));
  return m;
}

Image texture_image(int w, int h) {
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(x, y) = 0.5 + 0.3 * std::sin(0.37 * x) * std::cos(0.23 * y) +
                     0.1 * std::sin(0.11 * (x + 2 * y));
  return img;
}

Camera translated_camera(double tx, int size = 100) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T(0, 3) = -tx;  // camera moved +tx in world x
  return testutil::simple_camera(T, size);
}

struct SphereScene {
  MultiViewDataset ds;
  TriMesh mesh;
};

SphereScene textured_sphere_scene(int n_views, int resolution) {
  SphereScene scene;
  SyntheticOptions opt;
  opt.shape = "sphere";
  opt.subdivisions = 4;
  scene.mesh = make_shape(opt);
  scene.ds.bounds = {Eigen::Vector3d(-0.5, -0.5, -0.5), Eigen::Vector3d(0.5, 0.5, 0.5)};
  std::vector<Camera> cams = circle_cameras(n_views, resolution);
  for (const auto& cam : cams) {
    View v;
    v.camera = cam;
    v.image = render_shaded(scene.mesh, cam, SyntheticOptions().light);
    v.gray = to_grayscale(v.image);
    v.mask = Image(resolution, resolution, 1, 1.0);
    scene.ds.views.push_back(std::move(v));
  }
  scene.ds.source_neighbors = select_neighbors(cams, 2);
  return scene;
}

}  // namespace

TEST_CASE("sample_patches: empty silhouette, cap at eligible count, determinism") {
  AttributeMaps maps;
  maps.width = maps.height = 32;
  maps.face_id.assign(32 * 32, -1);
  CHECK(sample_patches(maps, 10, 5, 1).empty());

  // A small covered block: margin 3 for k=5 keeps x,y in [3, 28].
  for (int y = 10; y < 14; ++y)
    for (int x = 10; x < 14; ++x) maps.face_id[y * 32 + x] = 0;
  const auto all = sample_patches(maps, 1000, 5, 1);
  CHECK(all.size() == 16);

  const auto a = sample_patches(maps, 7, 5, 99);
  const auto b = sample_patches(maps, 7, 5, 99);
  REQUIRE(a.size() == 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].cx == b[i].cx);
    CHECK(a[i].cy == b[i].cy);
  }
}

TEST_CASE("bilinear: exact at integers, midpoint blend, out-of-bounds invalid") {
  Image img(4, 4, 1);
  img.at(1, 1) = 0.0;
  img.at(2, 1) = 1.0;
  double v;
  CHECK(bilinear(img, {2.0, 1.0}, &v));
  CHECK(v == doctest::Approx(1.0));
  CHECK(bilinear(img, {1.5, 1.0}, &v));
  CHECK(v == doctest::Approx(0.5));
  CHECK_FALSE(bilinear(img, {-0.5, 0.0}, &v));
  CHECK_FALSE(bilinear(img, {0.0, 3.5}, &v));

  Eigen::Vector2d g;
  CHECK(bilinear(img, {1.5, 1.0}, &v, &g));
  CHECK(g.x() == doctest::Approx(1.0));  // slope between the two pixels
}

TEST_CASE("warp: identical cameras reproduce the patch coordinates") {
  const TriMesh quad = big_quad(2.0);
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(quad, cam);
  Patch p{50, 50};
  const PatchWarp w = warp_patch(p, 11, maps, cam, cam);
  int idx = 0;
  for (int dy = -5; dy <= 5; ++dy)
    for (int dx = -5; dx <= 5; ++dx, ++idx) {
      REQUIRE(w.valid[idx]);
      CHECK(w.src_coords[idx].x() == doctest::Approx(50.0 + dx).epsilon(1e-9));
      CHECK(w.src_coords[idx].y() == doctest::Approx(50.0 + dy).epsilon(1e-9));
    }
}

TEST_CASE("warp: translated source camera shifts a depth-1 patch by -fx*tx/z") {
  const TriMesh quad = big_quad(1.0);
  const Camera cam_ref = testutil::simple_camera();
  const Camera cam_src = translated_camera(0.1);
  const AttributeMaps maps = rasterize(quad, cam_ref);
  Patch p{50, 50};
  const PatchWarp w = warp_patch(p, 11, maps, cam_ref, cam_src);
  int idx = 0;
  for (int dy = -5; dy <= 5; ++dy)
    for (int dx = -5; dx <= 5; ++dx, ++idx) {
      REQUIRE(w.valid[idx]);
      CHECK(w.src_coords[idx].x() == doctest::Approx(50.0 + dx - 10.0).epsilon(1e-9));
      CHECK(w.src_coords[idx].y() == doctest::Approx(50.0 + dy).epsilon(1e-9));
    }
}

TEST_CASE("warp: round trip through the swapped cameras returns the pixel") {
  const TriMesh quad = big_quad(2.0);
  const Camera cam_a = testutil::simple_camera();
  const Camera cam_b = translated_camera(0.15);
  const AttributeMaps maps_a = rasterize(quad, cam_a);
  const AttributeMaps maps_b = rasterize(quad, cam_b);

  // Split B's position map into channel images once.
  Image pos_b[3] = {Image(maps_b.width, maps_b.height, 1),
                    Image(maps_b.width, maps_b.height, 1),
                    Image(maps_b.width, maps_b.height, 1)};
  for (std::size_t q = 0; q < maps_b.position.size() / 3; ++q)
    for (int c = 0; c < 3; ++c) pos_b[c].data()[q] = maps_b.position[3 * q + c];

  Patch p{48, 52};
  const PatchWarp fwd = warp_patch(p, 11, maps_a, cam_a, cam_b);
  int idx = 0;
  double max_err = 0.0;
  for (int dy = -5; dy <= 5; ++dy)
    for (int dx = -5; dx <= 5; ++dx, ++idx) {
      if (!fwd.valid[idx]) continue;
      Eigen::Vector3d xb;
      bool ok = true;
      for (int c = 0; c < 3; ++c) {
        double val;
        ok = ok && bilinear(pos_b[c], fwd.src_coords[idx], &val);
        xb[c] = val;
      }
      REQUIRE(ok);
      const Eigen::Matrix3d R_ba = cam_a.rotation() * cam_b.rotation().transpose();
      const Eigen::Vector3d t_ba = cam_a.translation() - R_ba * cam_b.translation();
      const Eigen::Vector2d back = cam_a.project_camera(R_ba * xb + t_ba);
      max_err = std::max(max_err,
                         (back - Eigen::Vector2d(p.cx + dx, p.cy + dy)).norm());
    }
  CHECK(max_err < 1e-6);
}

TEST_CASE("ncc: affine invariance and anti-correlation") {
  std::vector<double> a = {0.1, 0.5, 0.3, 0.9, 0.2, 0.7};
  std::vector<std::uint8_t> valid(a.size(), 1);
  double v;
  REQUIRE(ncc(a, a, valid, &v));
  CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 2.0 * a[i] + 3.0;
  REQUIRE(ncc(a, b, valid, &v));
  CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  for (std::size_t i = 0; i < a.size(); ++i) b[i] = -a[i];
  REQUIRE(ncc(a, b, valid, &v));
  CHECK(v == doctest::Approx(-1.0).epsilon(1e-6));

  // Property over random alpha > 0, beta. Alphas far below 1 shrink the
  // variance product toward the 1e-8 stabilizer, so stay at image scale.
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const double alpha = 0.5 + 2.0 * rng.next_double();
    const double beta = 4.0 * (rng.next_double() - 0.5);
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = alpha * a[i] + beta;
    REQUIRE(ncc(a, b, valid, &v));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  }

  std::vector<std::uint8_t> one(a.size(), 0);
  one[2] = 1;
  CHECK_FALSE(ncc(a, a, one, &v));
}

TEST_CASE("ncc_loss: a source identical to the reference scores NCC 1, loss 0") {
  const TriMesh quad = big_quad(2.0);
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(quad, cam);
  const Image gray = texture_image(100, 100);

  const auto patches = sample_patches(maps, 40, 11, 5);
  REQUIRE(patches.size() == 40);
  NccOptions opt;
  opt.patch_size = 11;
  std::vector<NccSource> sources = {{&gray, &maps, &cam}};
  const NccLossResult res = ncc_loss(patches, maps, gray, cam, sources, opt);
  CHECK(res.contributing_pairs == 40);
  CHECK(res.loss < 1e-4);  // floor set by the 1e-8 variance stabilizer
}

TEST_CASE("ncc_loss: exact geometry scores near zero, perturbed geometry worse") {
  SphereScene scene = textured_sphere_scene(6, 192);
  const int ref = 0;
  const AttributeMaps maps_ref = rasterize(scene.mesh, scene.ds.views[ref].camera);
  std::vector<AttributeMaps> smaps;
  std::vector<NccSource> sources;
  for (const int s : scene.ds.source_neighbors[ref])
    smaps.push_back(rasterize(scene.mesh, scene.ds.views[s].camera));
  for (std::size_t k = 0; k < smaps.size(); ++k) {
    const int s = scene.ds.source_neighbors[ref][k];
    sources.push_back({&scene.ds.views[s].gray, &smaps[k], &scene.ds.views[s].camera});
  }
  NccOptions opt;
  const auto patches = sample_patches(maps_ref, 200, 11, 7);
  const NccLossResult exact =
      ncc_loss(patches, maps_ref, scene.ds.views[ref].gray, scene.ds.views[ref].camera,
               sources, opt);
  CHECK(exact.contributing_pairs > 0);
  CHECK(exact.loss < 0.01);

  // Gaussian vertex noise with sigma of two DPSR cells (bounds 1.0 / 128).
  TriMesh noisy = scene.mesh;
  Rng rng(9);
  const double sigma = 2.0 / 128.0;
  for (auto& v : noisy.vertices)
    v += sigma * Eigen::Vector3d(rng.next_normal(), rng.next_normal(), rng.next_normal());
  noisy.vertex_normals = compute_vertex_normals(noisy);
  const AttributeMaps maps_noisy = rasterize(noisy, scene.ds.views[ref].camera);
  std::vector<AttributeMaps> smaps_noisy;
  std::vector<NccSource> sources_noisy;
  for (const int s : scene.ds.source_neighbors[ref])
    smaps_noisy.push_back(rasterize(noisy, scene.ds.views[s].camera));
  for (std::size_t k = 0; k < smaps_noisy.size(); ++k) {
    const int s = scene.ds.source_neighbors[ref][k];
    sources_noisy.push_back(
        {&scene.ds.views[s].gray, &smaps_noisy[k], &scene.ds.views[s].camera});
  }
  const auto patches_noisy = sample_patches(maps_noisy, 200, 11, 7);
  const NccLossResult perturbed =
      ncc_loss(patches_noisy, maps_noisy, scene.ds.views[ref].gray,
               scene.ds.views[ref].camera, sources_noisy, opt);
  CHECK(perturbed.loss > exact.loss);
}

TEST_CASE("ncc_loss: an occluder in the source view gates every patch out") {
  // Source camera far to the right; the blocker at depth 1 sits outside the
  // reference frustum (x >= 0.5 projects past u = 100) but interposes on the
  // source rays toward the probed patch region.
  const Camera cam_ref = testutil::simple_camera();
  const Camera cam_src = translated_camera(0.8);

  TriMesh scene = big_quad(2.0);
  TriMesh blocker;
  blocker.vertices = {{0.5, -3, 1.0}, {3, -3, 1.0}, {3, 3, 1.0}, {0.5, 3, 1.0}};
  blocker.faces = {{0, 1, 2}, {0, 2, 3}};
  const std::uint32_t base = static_cast<std::uint32_t>(scene.vertices.size());
  for (const auto& v : blocker.vertices) scene.vertices.push_back(v);
  for (const auto& f : blocker.faces)
    scene.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  scene.vertex_normals.assign(scene.vertices.size(), Eigen::Vector3d(0, 0, -1));

  const AttributeMaps maps_ref = rasterize(scene, cam_ref);
  const AttributeMaps maps_src = rasterize(scene, cam_src);
  const Image gray = texture_image(100, 100);

  std::vector<Patch> patches;
  for (int x = 70; x <= 80; x += 5) patches.push_back({x, 50});
  for (const auto& p : patches)
    REQUIRE(maps_ref.depth[maps_ref.pix(p.cx, p.cy)] == doctest::Approx(2.0));

  NccOptions opt;
  std::vector<NccSource> sources = {{&gray, &maps_src, &cam_src}};
  const NccLossResult res = ncc_loss(patches, maps_ref, gray, cam_ref, sources, opt);
  CHECK(res.contributing_pairs == 0);
  CHECK(res.loss == 0.0);
  CHECK(res.gated_out_pairs == static_cast<int>(patches.size()));
}

TEST_CASE("ncc_loss: vertex gradient matches finite differences within 2e-2") {
  SphereScene scene = textured_sphere_scene(4, 128);
  const int ref = 0;
  const Camera& cam_ref = scene.ds.views[ref].camera;

  auto eval = [&](const TriMesh& mesh, bool want_grads,
                  std::vector<Eigen::Vector3d>* grad_out) {
    const AttributeMaps maps_ref = rasterize(mesh, cam_ref);
    std::vector<AttributeMaps> smaps;
    std::vector<NccSource> sources;
    for (const int s : scene.ds.source_neighbors[ref])
      smaps.push_back(rasterize(mesh, scene.ds.views[s].camera));
    for (std::size_t k = 0; k < smaps.size(); ++k) {
      const int s = scene.ds.source_neighbors[ref][k];
      sources.push_back({&scene.ds.views[s].gray, &smaps[k], &scene.ds.views[s].camera});
    }
    NccOptions opt;
    opt.patch_size = 7;
    const auto patches = sample_patches(maps_ref, 60, 7, 13);
    const NccLossResult res =
        ncc_loss(patches, maps_ref, scene.ds.views[ref].gray, cam_ref, sources, opt);
    if (want_grads) {
      MapGradients mg;
      mg.position = res.grad_position;
      const RasterGradients rg = raster_adjoint(mg, mesh, cam_ref, maps_ref);
      *grad_out = rg.vertices;
    }
    return res.loss;
  };

  std::vector<Eigen::Vector3d> grads;
  eval(scene.mesh, true, &grads);

  // Directional probe over high-gradient vertices (stable gates under the
  // FD step; the gates themselves are hard switches).
  Rng rng(19);
  std::vector<Eigen::Vector3d> dir(scene.mesh.vertex_count(), Eigen::Vector3d::Zero());
  double analytic = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < grads.size() && used < 200; ++i) {
    if (grads[i].norm() < 1e-6) continue;
    dir[i] = Eigen::Vector3d(rng.next_double() - 0.5, rng.next_double() - 0.5,
                             rng.next_double() - 0.5);
    analytic += grads[i].dot(dir[i]);
    ++used;
  }
  REQUIRE(used > 20);

  const double h = 2e-6;
  TriMesh plus = scene.mesh, minus = scene.mesh;
  for (std::size_t i = 0; i < dir.size(); ++i) {
    plus.vertices[i] += h * dir[i];
    minus.vertices[i] -= h * dir[i];
  }
  const double fd = (eval(plus, false, nullptr) - eval(minus, false, nullptr)) / (2 * h);
  CHECK(analytic == doctest::Approx(fd).epsilon(2e-2));
}

TEST_SUITE_END();
