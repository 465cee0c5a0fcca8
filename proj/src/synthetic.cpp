#include "mvr/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "mvr/mesh_io.hpp"

namespace mvr {

namespace fs = std::filesystem;

SyntheticOptions::SyntheticOptions() {
  // Global light: dominant ambient plus a tilted directional component,
  // scaled so shading stays inside [0,1] for albedos up to 0.8.
  light.coeffs << 2.4, 0.12, 0.45, 0.28, 0.04, 0.05, 0.09, 0.06, 0.03;
}

namespace {

TriMesh icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<std::uint32_t, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const std::uint32_t id = static_cast<std::uint32_t>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& [a, b, c] : faces) {
      const std::uint32_t ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh m;
  m.faces = std::move(faces);
  m.vertices.resize(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) m.vertices[i] = radius * verts[i];
  return m;
}

TriMesh torus(int nu, int nv, double major, double minor) {
  TriMesh m;
  m.vertices.resize(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * M_PI * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = 2.0 * M_PI * j / nv;
      m.vertices[static_cast<std::size_t>(i) * nv + j] = {
          (major + minor * std::cos(v)) * std::cos(u),
          (major + minor * std::cos(v)) * std::sin(u), minor * std::sin(v)};
    }
  }
  auto idx = [&](int i, int j) {
    return static_cast<std::uint32_t>((i % nu) * nv + (j % nv));
  };
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      m.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  return m;
}

TriMesh cube(int n, double half) {
  // Six gridded faces welded on shared lattice points.
  TriMesh m;
  std::map<std::array<int, 3>, std::uint32_t> weld;
  auto vertex = [&](int axis, int side, int i, int j) {
    // Integer lattice point on the cube surface in units of half/n.
    std::array<int, 3> key;
    key[axis] = side ? n : -n;
    key[(axis + 1) % 3] = 2 * i - n;
    key[(axis + 2) % 3] = 2 * j - n;
    auto it = weld.find(key);
    if (it != weld.end()) return it->second;
    const std::uint32_t id = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.push_back(Eigen::Vector3d(key[0], key[1], key[2]) * (half / n));
    weld.emplace(key, id);
    return id;
  };
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const std::uint32_t a = vertex(axis, side, i, j);
          const std::uint32_t b = vertex(axis, side, i + 1, j);
          const std::uint32_t c = vertex(axis, side, i + 1, j + 1);
          const std::uint32_t d = vertex(axis, side, i, j + 1);
          if (side == 1) {
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
          } else {
            m.faces.push_back({a, c, b});
            m.faces.push_back({a, d, c});
          }
        }
  return m;
}

void assign_albedo(TriMesh& m) {
  // Smooth procedural texture in [0.15, 0.8]; distinct direction and phase
  // per channel so the luma keeps local contrast for patch matching.
  const Eigen::Vector3d dirs[3] = {{1.0, 0.35, 0.2}, {-0.3, 1.0, 0.45}, {0.25, -0.4, 1.0}};
  const double freq[3] = {29.0, 33.0, 26.0};
  const double phase[3] = {0.4, 1.7, 2.9};
  m.vertex_albedo.resize(m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (int c = 0; c < 3; ++c)
      m.vertex_albedo[i][c] =
          0.475 + 0.325 * std::sin(freq[c] * dirs[c].normalized().dot(m.vertices[i]) + phase[c]);
}

}  // namespace

TriMesh make_shape(const SyntheticOptions& opt) {
  TriMesh m;
  if (opt.shape == "sphere") {
    m = icosphere(opt.subdivisions, 0.32);
  } else if (opt.shape == "bumpy-sphere") {
    m = icosphere(opt.subdivisions, 1.0);
    for (auto& v : m.vertices) {
      const Eigen::Vector3d d = v.normalized();
      const double bump = std::sin(opt.bump_frequency * M_PI * d.x()) *
                          std::sin(opt.bump_frequency * M_PI * d.y() + 1.1) *
                          std::cos(0.7 * opt.bump_frequency * M_PI * d.z() + 0.6);
      v = d * 0.3 * (1.0 + opt.bump_amplitude * bump);
    }
  } else if (opt.shape == "torus") {
    m = torus(96, 48, 0.24, 0.11);
  } else if (opt.shape == "cube") {
    m = cube(16, 0.24);
  } else {
    throw std::runtime_error("unknown shape '" + opt.shape +
                             "' (expected sphere|bumpy-sphere|torus|cube)");
  }
  m.vertex_normals = compute_vertex_normals(m);
  assign_albedo(m);
  return m;
}

std::vector<Camera> circle_cameras(int count, int resolution, double radius, double phase) {
  std::vector<Camera> cams;
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = K(1, 1) = 1.2 * resolution;
  K(0, 2) = K(1, 2) = 0.5 * (resolution - 1);

  for (int i = 0; i < count; ++i) {
    const double theta = 2.0 * M_PI * i / count + phase;
    const double elev = 0.28 * ((i % 3) - 1);  // alternate below/at/above the equator
    const Eigen::Vector3d center(radius * std::cos(theta) * std::cos(elev),
                                 radius * std::sin(theta) * std::cos(elev),
                                 radius * std::sin(elev));
    const Eigen::Vector3d forward = (-center).normalized();
    const Eigen::Vector3d up(0, 0, 1);
    const Eigen::Vector3d right = forward.cross(up).normalized();
    const Eigen::Vector3d down = forward.cross(right).normalized();
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.block<1, 3>(0, 0) = right.transpose();
    T.block<1, 3>(1, 0) = down.transpose();
    T.block<1, 3>(2, 0) = forward.transpose();
    T.topRightCorner<3, 1>() = -T.topLeftCorner<3, 3>() * center;
    cams.emplace_back(K, T, resolution, resolution);
  }
  return cams;
}

Image render_shaded(const TriMesh& mesh, const Camera& camera, const SHLight& light) {
  const AttributeMaps maps = rasterize(mesh, camera);
  Image img(camera.width(), camera.height(), 3);
  for (int y = 0; y < camera.height(); ++y)
    for (int x = 0; x < camera.width(); ++x) {
      const std::size_t p = maps.pix(x, y);
      if (maps.face_id[p] < 0) continue;
      const Eigen::Vector3d n(maps.normal[3 * p], maps.normal[3 * p + 1],
                              maps.normal[3 * p + 2]);
      const Eigen::Vector3d a(maps.albedo[3 * p], maps.albedo[3 * p + 1],
                              maps.albedo[3 * p + 2]);
      const Eigen::Vector3d rgb = shade(a, n, light);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
    }
  return img;
}

void make_synthetic(const std::string& out_dir, const SyntheticOptions& opt) {
  if (opt.views < 3) throw std::runtime_error("make-synthetic: need at least 3 views");
  if (opt.resolution < 32) throw std::runtime_error("make-synthetic: resolution too small");
  const TriMesh gt = make_shape(opt);
  const Aabb bounds{Eigen::Vector3d(-0.5, -0.5, -0.5), Eigen::Vector3d(0.5, 0.5, 0.5)};

  auto render_set = [&](const std::vector<Camera>& cams, const std::string& dir) {
    std::vector<Image> images, masks;
    for (const auto& cam : cams) {
      const AttributeMaps maps = rasterize(gt, cam);
      images.push_back(render_shaded(gt, cam, opt.light));
      Image mask(cam.width(), cam.height(), 1);
      for (std::size_t p = 0; p < maps.silhouette.size(); ++p)
        mask.data()[p] = maps.silhouette[p];
      masks.push_back(std::move(mask));
    }
    save_dataset(dir, cams, images, masks, bounds);
  };

  render_set(circle_cameras(opt.views, opt.resolution), out_dir);
  if (opt.holdout > 0) {
    const int n_holdout = std::max(opt.holdout, 2);  // a dataset needs two views
    render_set(circle_cameras(n_holdout, opt.resolution, 1.3, M_PI / opt.views),
               (fs::path(out_dir) / "holdout").string());
  }

  export_mesh(gt, (fs::path(out_dir) / "gt_mesh.ply").string());
  opt.light.save_json((fs::path(out_dir) / "gt_light.json").string());
}

}  // namespace mvr
