#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mvr/adam.hpp"
#include "mvr/config.hpp"
#include "mvr/image.hpp"
#include "mvr/mesh.hpp"
#include "mvr/synthetic.hpp"

using namespace mvr;

TEST_SUITE_BEGIN("core");

TEST_CASE("grayscale: luma weights, idempotent, bounded") {
  Image rgb(4, 2, 3);
  rgb.at(0, 0, 0) = 1.0;
  rgb.at(1, 0, 1) = 1.0;
  rgb.at(2, 0, 2) = 1.0;
  rgb.at(3, 0, 0) = rgb.at(3, 0, 1) = rgb.at(3, 0, 2) = 0.25;
  const Image g = to_grayscale(rgb);
  CHECK(g.at(0, 0) == doctest::Approx(0.299));
  CHECK(g.at(1, 0) == doctest::Approx(0.587));
  CHECK(g.at(2, 0) == doctest::Approx(0.114));
  CHECK(g.at(3, 0) == doctest::Approx(0.25));  // equal channels stay put
  for (const double v : g.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("adam: zero gradient leaves parameters, bumps step") {
  std::vector<double> p = {1.0, -2.0};
  AdamState st(2);
  adam_step(p, {0.0, 0.0}, st, 0.1);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(-2.0));
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step is roughly lr * sign(g)") {
  std::vector<double> p = {0.0};
  AdamState st(1);
  adam_step(p, {2.0}, st, 1e-3);
  CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-4));
}

TEST_CASE("adam: two steps match the hand-computed recurrence") {
  // g = (1, 1), lr = 0.1, default betas.
  std::vector<double> p = {0.0};
  AdamState st(1);
  adam_step(p, {1.0}, st, 0.1);
  adam_step(p, {1.0}, st, 0.1);

  double m = 0.0, v = 0.0, x = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("adam: non-finite gradients are skipped and counted") {
  std::vector<double> p = {1.0, 1.0};
  AdamState st(2);
  adam_step(p, {std::nan(""), 1.0}, st, 0.1);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1.0);
  CHECK(st.skipped == 1);
}

TEST_CASE("config: defaults validate; bad values rejected") {
  Config c;
  CHECK_NOTHROW(c.validate());
  c.patch_size = 10;
  CHECK_THROWS(c.validate());
  c = Config{};
  c.delta_ncc = 1.5;
  CHECK_THROWS(c.validate());
  c = Config{};
  c.grid_res_dpsr = 100;  // not a power of two
  CHECK_THROWS(c.validate());
}

TEST_CASE("mesh: watertight check and sampling") {
  SyntheticOptions opt;
  opt.shape = "sphere";
  opt.subdivisions = 2;
  const TriMesh m = make_shape(opt);
  CHECK(is_watertight(m));
  CHECK_NOTHROW(validate_mesh(m));

  const OrientedPointCloud pc = sample_surface(m, 500, 11);
  CHECK(pc.size() == 500);
  // Sphere of radius 0.32: samples sit on the faceted surface.
  for (const auto& p : pc.positions) CHECK(p.norm() == doctest::Approx(0.32).epsilon(0.02));
  // Deterministic under seed.
  const OrientedPointCloud pc2 = sample_surface(m, 500, 11);
  CHECK(pc.positions[120] == pc2.positions[120]);
}

TEST_CASE("mesh: area-weighted sampling fractions on a two-face strip") {
  // One face has 3x the area of the other; fractions approach 3:1.
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-3, 0, 0}, {0, -3, 0}};
  m.faces = {{0, 1, 2}, {0, 4, 3}};
  std::size_t hits = 0;
  const OrientedPointCloud pc = sample_surface(m, 100000, 5);
  for (const auto& p : pc.positions)
    if (p.x() >= 0.0 && p.y() >= 0.0) ++hits;
  const double frac = static_cast<double>(hits) / pc.size();
  CHECK(frac == doctest::Approx(1.0 / 10.0).epsilon(0.02 * 10));
}

TEST_CASE("mesh: vertex-normal adjoint matches finite differences") {
  SyntheticOptions opt;
  opt.shape = "sphere";
  opt.subdivisions = 1;
  TriMesh m = make_shape(opt);
  Rng rng(3);
  std::vector<Eigen::Vector3d> gn(m.vertex_count());
  for (auto& g : gn)
    g = Eigen::Vector3d(rng.next_double() - 0.5, rng.next_double() - 0.5,
                        rng.next_double() - 0.5);
  const std::vector<Eigen::Vector3d> gp = vertex_normals_adjoint(m, gn);

  auto scalar = [&](const TriMesh& mesh) {
    const auto normals = compute_vertex_normals(mesh);
    double acc = 0.0;
    for (std::size_t i = 0; i < normals.size(); ++i) acc += gn[i].dot(normals[i]);
    return acc;
  };
  const double h = 1e-6;
  for (const std::size_t vi : {std::size_t(0), std::size_t(5), std::size_t(17)})
    for (int c = 0; c < 3; ++c) {
      TriMesh plus = m, minus = m;
      plus.vertices[vi][c] += h;
      minus.vertices[vi][c] -= h;
      const double fd = (scalar(plus) - scalar(minus)) / (2 * h);
      CHECK(gp[vi][c] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_SUITE_END();
