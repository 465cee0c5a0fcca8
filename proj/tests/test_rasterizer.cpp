#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mvr/rasterizer.hpp"

using namespace mvr;

TEST_SUITE_BEGIN("rasterizer");

namespace {

// World point whose projection through simple_camera lands at screen (u,v)
// and depth z (identity pose, f = 100, c = 50).
Eigen::Vector3d at_pixel(double u, double v, double z) {
  return {(u - 50.0) * z / 100.0, (v - 50.0) * z / 100.0, z};
}

double sil_sum(const AttributeMaps& maps) {
  double acc = 0.0;
  for (const double s : maps.silhouette) acc += s;
  return acc;
}

}  // namespace

TEST_CASE("constant-depth triangle renders depth 2 everywhere covered") {
  TriMesh m;
  m.vertices = {at_pixel(10, 10, 2), at_pixel(90, 10, 2), at_pixel(10, 90, 2)};
  m.faces = {{0, 1, 2}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(m, cam);
  std::size_t covered = 0;
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      if (maps.covered(x, y)) {
        ++covered;
        CHECK(maps.depth[maps.pix(x, y)] == doctest::Approx(2.0).epsilon(1e-12));
        // Depth/position consistency is exact on interior pixels.
        CHECK(maps.depth[maps.pix(x, y)] == maps.position[3 * maps.pix(x, y) + 2]);
        const double* b = &maps.barycentric[3 * maps.pix(x, y)];
        CHECK(b[0] + b[1] + b[2] == doctest::Approx(1.0));
        CHECK(b[0] >= 0.0);
      }
  CHECK(covered > 2500);
}

TEST_CASE("attribute at the screen centroid equals the vertex mean at equal depth") {
  TriMesh m;
  m.vertices = {at_pixel(12, 12, 2), at_pixel(96, 12, 2), at_pixel(12, 96, 2)};
  m.faces = {{0, 1, 2}};
  m.vertex_albedo = {{0.9, 0.1, 0.2}, {0.3, 0.5, 0.4}, {0.6, 0.3, 0.9}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(m, cam);
  const std::size_t p = maps.pix(40, 40);  // centroid of (12,12),(96,12),(12,96)
  REQUIRE(maps.face_id[p] == 0);
  for (int c = 0; c < 3; ++c) {
    const double mean =
        (m.vertex_albedo[0][c] + m.vertex_albedo[1][c] + m.vertex_albedo[2][c]) / 3.0;
    CHECK(maps.albedo[3 * p + c] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("half-covering square: mean silhouette is 0.5 within 1/64") {
  // Square spanning past the image except for its right edge at u = 31.5.
  const Camera cam = testutil::simple_camera(Eigen::Matrix4d::Identity(), 64);
  auto at = [&](double u, double v) {
    return Eigen::Vector3d((u - 50.0) / 50.0, (v - 50.0) / 50.0, 2.0);
  };
  TriMesh m;
  m.vertices = {at(-8, -8), at(31.5, -8), at(31.5, 72), at(-8, 72)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  const AttributeMaps maps = rasterize(m, cam);
  const double mean = sil_sum(maps) / (64.0 * 64.0);
  CHECK(std::abs(mean - 0.5) <= 1.0 / 64.0);
}

TEST_CASE("occlusion: nearer triangle owns every contested pixel") {
  TriMesh m;
  // Far triangle first so the id tie-break cannot mask a depth bug.
  m.vertices = {at_pixel(10, 10, 3), at_pixel(90, 10, 3), at_pixel(10, 90, 3),
                at_pixel(10, 10, 2), at_pixel(90, 10, 2), at_pixel(10, 90, 2)};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  const AttributeMaps maps = rasterize(m, testutil::simple_camera());
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      if (maps.covered(x, y)) CHECK(maps.face_id[maps.pix(x, y)] == 1);
}

TEST_CASE("tie-break: equal depth goes to the lower face index") {
  TriMesh m;
  m.vertices = {at_pixel(10, 10, 2), at_pixel(90, 10, 2), at_pixel(10, 90, 2)};
  m.faces = {{0, 1, 2}, {0, 1, 2}};
  const AttributeMaps maps = rasterize(m, testutil::simple_camera());
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      if (maps.covered(x, y)) CHECK(maps.face_id[maps.pix(x, y)] == 0);
}

TEST_CASE("mesh behind the camera renders background maps") {
  TriMesh m;
  m.vertices = {{0, 0, -2}, {1, 0, -2}, {0, 1, -2}};
  m.faces = {{0, 1, 2}};
  const AttributeMaps maps = rasterize(m, testutil::simple_camera());
  for (const auto f : maps.face_id) CHECK(f == -1);
  for (const double s : maps.silhouette) CHECK(s == 0.0);
}

TEST_CASE("rendering twice is bit-identical") {
  TriMesh m;
  m.vertices = {at_pixel(15, 20, 2.2), at_pixel(80, 25, 1.7), at_pixel(40, 88, 2.9)};
  m.faces = {{0, 1, 2}};
  m.vertex_albedo = {{0.2, 0.4, 0.6}, {0.8, 0.1, 0.3}, {0.5, 0.5, 0.5}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps a = rasterize(m, cam);
  const AttributeMaps b = rasterize(m, cam);
  CHECK(a.silhouette == b.silhouette);
  CHECK(a.depth == b.depth);
  CHECK(a.position == b.position);
  CHECK(a.face_id == b.face_id);
}

TEST_CASE("adjoint: zero upstream gradient gives zero everywhere") {
  TriMesh m;
  m.vertices = {at_pixel(10, 10, 2), at_pixel(90, 10, 2), at_pixel(10, 90, 2)};
  m.faces = {{0, 1, 2}};
  m.vertex_albedo = {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(m, cam);
  MapGradients mg;  // all channels empty
  const RasterGradients rg = raster_adjoint(mg, m, cam, maps);
  for (const auto& g : rg.vertices) CHECK(g.norm() == 0.0);
  for (const auto& g : rg.vertex_albedo) CHECK(g.norm() == 0.0);
}

TEST_CASE("adjoint: interior attribute gradient equals barycentric weights") {
  TriMesh m;
  m.vertices = {at_pixel(12, 12, 2), at_pixel(96, 12, 2), at_pixel(12, 96, 2)};
  m.faces = {{0, 1, 2}};
  m.vertex_albedo = {{0.9, 0.1, 0.2}, {0.3, 0.5, 0.4}, {0.6, 0.3, 0.9}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(m, cam);

  const int px = 30, py = 35;
  const std::size_t p = maps.pix(px, py);
  REQUIRE(maps.face_id[p] == 0);

  MapGradients mg;
  mg.albedo.assign(maps.albedo.size(), 0.0);
  mg.albedo[3 * p + 0] = 1.0;  // loss = red albedo at one pixel
  const RasterGradients rg = raster_adjoint(mg, m, cam, maps);

  for (int k = 0; k < 3; ++k) {
    CHECK(rg.vertex_albedo[k][0] ==
          doctest::Approx(maps.barycentric[3 * p + k]).epsilon(1e-12));
    // Finite differences on the attribute (linear, so h can be coarse).
    TriMesh plus = m, minus = m;
    plus.vertex_albedo[k][0] += 1e-4;
    minus.vertex_albedo[k][0] -= 1e-4;
    const AttributeMaps mp = rasterize(plus, cam);
    const AttributeMaps mm = rasterize(minus, cam);
    const double fd = (mp.albedo[3 * p] - mm.albedo[3 * p]) / 2e-4;
    CHECK(rg.vertex_albedo[k][0] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("adjoint: position-channel geometry gradient matches finite differences") {
  TriMesh m;
  m.vertices = {at_pixel(15, 18, 2.3), at_pixel(85, 22, 1.8), at_pixel(35, 88, 2.6)};
  m.faces = {{0, 1, 2}};
  const Camera cam = testutil::simple_camera();
  const AttributeMaps maps = rasterize(m, cam);

  const int px = 45, py = 40;
  const std::size_t p = maps.pix(px, py);
  REQUIRE(maps.face_id[p] == 0);
  const Eigen::Vector3d w(0.7, -0.4, 1.3);

  MapGradients mg;
  mg.position.assign(maps.position.size(), 0.0);
  for (int c = 0; c < 3; ++c) mg.position[3 * p + c] = w[c];
  const RasterGradients rg = raster_adjoint(mg, m, cam, maps);

  auto loss = [&](const TriMesh& mesh) {
    const AttributeMaps mm = rasterize(mesh, cam);
    REQUIRE(mm.face_id[p] == 0);
    return w[0] * mm.position[3 * p] + w[1] * mm.position[3 * p + 1] +
           w[2] * mm.position[3 * p + 2];
  };
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < 3; ++c) {
      TriMesh plus = m, minus = m;
      plus.vertices[k][c] += h;
      minus.vertices[k][c] -= h;
      const double fd = (loss(plus) - loss(minus)) / (2 * h);
      CHECK(rg.vertices[k][c] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("silhouette edge: translation changes coverage by edge length x delta") {
  // Only the vertical edge at u = 90 is inside the 128^2 image.
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = K(1, 1) = 100.0;
  K(0, 2) = K(1, 2) = 64.0;
  const Camera cam(K, Eigen::Matrix4d::Identity(), 128, 128);
  auto at = [&](double u, double v) {
    return Eigen::Vector3d((u - 64.0) * 2.0 / 100.0, (v - 64.0) * 2.0 / 100.0, 2.0);
  };
  TriMesh m;
  m.vertices = {at(90, -200), at(90, 328), at(-300, 64)};
  m.faces = {{0, 2, 1}};
  const AttributeMaps maps = rasterize(m, cam);

  const double delta_px = 0.3;
  const double delta_world = delta_px * 2.0 / 100.0;  // z / fx
  TriMesh shifted = m;
  for (auto& v : shifted.vertices) v.x() += delta_world;
  const AttributeMaps maps2 = rasterize(shifted, cam);

  const double change = sil_sum(maps2) - sil_sum(maps);
  CHECK(change == doctest::Approx(128.0 * delta_px).epsilon(0.10));

  // The adjoint predicts the same directional derivative.
  MapGradients mg;
  mg.silhouette.assign(maps.silhouette.size(), 1.0);
  const RasterGradients rg = raster_adjoint(mg, m, cam, maps);
  double directional = 0.0;
  for (const auto& g : rg.vertices) directional += g.x() * delta_world;
  CHECK(directional == doctest::Approx(change).epsilon(0.10));
}

TEST_SUITE_END();
