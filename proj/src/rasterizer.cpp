#include "mvr/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mvr/parallel.hpp"

namespace mvr {

namespace {

constexpr double kZNear = 1e-9;

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

struct FaceSetup {
  Eigen::Vector2d s[3];
  double z[3];
  double area2 = 0.0;  // signed screen area * 2
  int xmin = 0, xmax = -1, ymin = 0, ymax = -1;
  bool valid = false;
};

struct TransformedMesh {
  std::vector<Eigen::Vector3d> cam;  // camera-frame vertices
  std::vector<FaceSetup> faces;
};

TransformedMesh transform_mesh(const TriMesh& mesh, const Camera& camera) {
  TransformedMesh tm;
  const Eigen::Matrix3d R = camera.rotation();
  const Eigen::Vector3d t = camera.translation();
  tm.cam.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    tm.cam[i] = R * mesh.vertices[i] + t;

  tm.faces.resize(mesh.faces.size());
  const int W = camera.width(), H = camera.height();
  parallel_for(mesh.faces.size(), [&](std::size_t f) {
    FaceSetup& fs = tm.faces[f];
    const auto& [i0, i1, i2] = mesh.faces[f];
    const std::uint32_t idx[3] = {i0, i1, i2};
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d& p = tm.cam[idx[k]];
      if (p.z() <= kZNear) return;  // skipped: partially behind the camera
      fs.s[k] = camera.project_camera(p);
      fs.z[k] = p.z();
    }
    fs.area2 = cross2(fs.s[1] - fs.s[0], fs.s[2] - fs.s[0]);
    if (fs.area2 == 0.0) return;
    double xmin = fs.s[0].x(), xmax = fs.s[0].x(), ymin = fs.s[0].y(), ymax = fs.s[0].y();
    for (int k = 1; k < 3; ++k) {
      xmin = std::min(xmin, fs.s[k].x());
      xmax = std::max(xmax, fs.s[k].x());
      ymin = std::min(ymin, fs.s[k].y());
      ymax = std::max(ymax, fs.s[k].y());
    }
    fs.xmin = std::max(0, static_cast<int>(std::ceil(xmin)));
    fs.xmax = std::min(W - 1, static_cast<int>(std::floor(xmax)));
    fs.ymin = std::max(0, static_cast<int>(std::ceil(ymin)));
    fs.ymax = std::min(H - 1, static_cast<int>(std::floor(ymax)));
    fs.valid = fs.xmin <= fs.xmax && fs.ymin <= fs.ymax;
  });
  return tm;
}

// Affine barycentrics of pixel u inside face fs; true when inside.
inline bool barycentrics(const FaceSetup& fs, const Eigen::Vector2d& u, double lambda[3]) {
  const Eigen::Vector2d d0 = fs.s[0] - u, d1 = fs.s[1] - u, d2 = fs.s[2] - u;
  lambda[0] = cross2(d1, d2) / fs.area2;
  lambda[1] = cross2(d2, d0) / fs.area2;
  lambda[2] = cross2(d0, d1) / fs.area2;
  return lambda[0] >= 0.0 && lambda[1] >= 0.0 && lambda[2] >= 0.0;
}

struct ContourEdge {
  std::uint32_t va, vb;  // oriented so the covered side is left of a->b
  Eigen::Vector2d sa, sb;
  double za, zb;
};

std::vector<ContourEdge> find_contour_edges(const TriMesh& mesh, const TransformedMesh& tm) {
  // Edge -> adjacent faces. Contours are edges whose projected faces do not
  // face the same way (fold), plus open-boundary edges of non-watertight
  // test meshes.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::array<std::int64_t, 2>> edge_faces;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [i, j, k] = mesh.faces[f];
    const std::pair<std::uint32_t, std::uint32_t> keys[3] = {
        std::minmax(i, j), std::minmax(j, k), std::minmax(k, i)};
    for (const auto& key : keys) {
      auto [it, inserted] = edge_faces.try_emplace(key, std::array<std::int64_t, 2>{-1, -1});
      if (it->second[0] < 0) it->second[0] = static_cast<std::int64_t>(f);
      else if (it->second[1] < 0) it->second[1] = static_cast<std::int64_t>(f);
    }
  }

  std::vector<ContourEdge> contours;
  for (const auto& [key, fids] : edge_faces) {
    const std::int64_t f0 = fids[0], f1 = fids[1];
    auto renders = [&](std::int64_t f) {
      return f >= 0 && tm.faces[static_cast<std::size_t>(f)].area2 != 0.0 &&
             tm.cam[mesh.faces[static_cast<std::size_t>(f)][0]].z() > kZNear;
    };
    const bool r0 = renders(f0), r1 = renders(f1);
    std::int64_t owner = -1;
    if (r0 && r1) {
      const double a0 = tm.faces[static_cast<std::size_t>(f0)].area2;
      const double a1 = tm.faces[static_cast<std::size_t>(f1)].area2;
      if (a0 * a1 < 0.0 || a0 == 0.0 || a1 == 0.0)
        owner = std::abs(a0) >= std::abs(a1) ? f0 : f1;
    } else if (r0 != r1) {
      owner = r0 ? f0 : f1;
    }
    if (owner < 0) continue;

    // Orient the edge so the owner's third vertex lies on the left.
    const auto& face = mesh.faces[static_cast<std::size_t>(owner)];
    std::uint32_t a = key.first, b = key.second, other = face[0];
    for (int k = 0; k < 3; ++k)
      if (face[k] != a && face[k] != b) other = face[k];
    const Eigen::Vector3d &pa3 = tm.cam[a], &pb3 = tm.cam[b], &po3 = tm.cam[other];
    if (pa3.z() <= kZNear || pb3.z() <= kZNear || po3.z() <= kZNear) continue;
    ContourEdge ce;
    ce.va = a;
    ce.vb = b;
    ce.za = pa3.z();
    ce.zb = pb3.z();
    // Projections are cheap to redo here; keeps FaceSetup unneeded for edges.
    const FaceSetup& ofs = tm.faces[static_cast<std::size_t>(owner)];
    Eigen::Vector2d sa, sb, so;
    for (int k = 0; k < 3; ++k) {
      if (face[k] == a) sa = ofs.s[k];
      if (face[k] == b) sb = ofs.s[k];
      if (face[k] == other) so = ofs.s[k];
    }
    if (cross2(sb - sa, so - sa) < 0.0) {
      std::swap(ce.va, ce.vb);
      std::swap(ce.za, ce.zb);
      std::swap(sa, sb);
    }
    ce.sa = sa;
    ce.sb = sb;
    contours.push_back(ce);
  }
  return contours;
}

}  // namespace

AttributeMaps rasterize(const TriMesh& mesh, const Camera& camera) {
  const int W = camera.width(), H = camera.height();
  AttributeMaps maps;
  maps.width = W;
  maps.height = H;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  maps.silhouette.assign(n, 0.0);
  maps.depth.assign(n, AttributeMaps::kInvalidDepth);
  maps.position.assign(n * 3, 0.0);
  maps.normal.assign(n * 3, 0.0);
  maps.albedo.assign(n * 3, 0.0);
  maps.face_id.assign(n, -1);
  maps.barycentric.assign(n * 3, 0.0);
  if (mesh.faces.empty()) return maps;

  const TransformedMesh tm = transform_mesh(mesh, camera);

  // Depth pass, parallel over fixed row bands; each band scans faces in
  // index order so equal depths resolve to the lower face id everywhere.
  parallel_chunks(H, 16, [&](std::size_t, std::size_t yb, std::size_t ye) {
    for (std::size_t f = 0; f < tm.faces.size(); ++f) {
      const FaceSetup& fs = tm.faces[f];
      if (!fs.valid) continue;
      const int y0 = std::max<int>(fs.ymin, static_cast<int>(yb));
      const int y1 = std::min<int>(fs.ymax, static_cast<int>(ye) - 1);
      for (int y = y0; y <= y1; ++y)
        for (int x = fs.xmin; x <= fs.xmax; ++x) {
          double lambda[3];
          if (!barycentrics(fs, Eigen::Vector2d(x, y), lambda)) continue;
          const double w = lambda[0] / fs.z[0] + lambda[1] / fs.z[1] + lambda[2] / fs.z[2];
          if (w <= 0.0) continue;
          const double z = 1.0 / w;
          const std::size_t p = maps.pix(x, y);
          if (z < maps.depth[p]) {
            maps.depth[p] = z;
            maps.face_id[p] = static_cast<std::int32_t>(f);
          }
        }
    }
  });

  // Attribute pass.
  const bool has_albedo = mesh.has_albedo();
  parallel_chunks(H, 16, [&](std::size_t, std::size_t yb, std::size_t ye) {
    for (std::size_t y = yb; y < ye; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t p = maps.pix(x, static_cast<int>(y));
        const std::int32_t f = maps.face_id[p];
        if (f < 0) continue;
        const FaceSetup& fs = tm.faces[f];
        const auto& face = mesh.faces[f];
        double lambda[3];
        barycentrics(fs, Eigen::Vector2d(x, static_cast<double>(y)), lambda);
        const double w0 = lambda[0] / fs.z[0], w1 = lambda[1] / fs.z[1], w2 = lambda[2] / fs.z[2];
        const double wsum = w0 + w1 + w2;
        const double b[3] = {w0 / wsum, w1 / wsum, w2 / wsum};

        Eigen::Vector3d pos = Eigen::Vector3d::Zero(), nrm = Eigen::Vector3d::Zero(),
                        alb = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) {
          pos += b[k] * tm.cam[face[k]];
          if (!mesh.vertex_normals.empty()) nrm += b[k] * mesh.vertex_normals[face[k]];
          if (has_albedo) alb += b[k] * mesh.vertex_albedo[face[k]];
        }
        const double nlen = nrm.norm();
        if (nlen > 1e-12) nrm /= nlen;
        maps.silhouette[p] = 1.0;
        maps.depth[p] = pos.z();  // identical to the z-buffer value
        for (int c = 0; c < 3; ++c) {
          maps.position[3 * p + c] = pos[c];
          maps.normal[3 * p + c] = nrm[c];
          maps.albedo[3 * p + c] = alb[c];
          maps.barycentric[3 * p + c] = b[c];
        }
      }
  });

  // Mixed-coverage band: pixels whose 8-neighborhood straddles the hard
  // boundary are eligible for the coverage ramp.
  std::vector<std::uint8_t> band(n, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const bool c0 = maps.covered(x, y);
      bool mixed = false;
      for (int dy = -1; dy <= 1 && !mixed; ++dy)
        for (int dx = -1; dx <= 1 && !mixed; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          if (maps.covered(nx, ny) != c0) mixed = true;
        }
      if (mixed) band[maps.pix(x, y)] = 1;
    }

  const std::vector<ContourEdge> contours = find_contour_edges(mesh, tm);

  // Nearest visible contour edge per band pixel.
  std::vector<double> best_absd(n, 1.0 + 1e-12);
  std::vector<std::int64_t> best_edge(n, -1);
  for (std::size_t e = 0; e < contours.size(); ++e) {
    const ContourEdge& ce = contours[e];
    const Eigen::Vector2d dir = ce.sb - ce.sa;
    const double len = dir.norm();
    if (len < 1e-12) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ce.sa.x(), ce.sb.x()) - 1.5)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max(ce.sa.x(), ce.sb.x()) + 1.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ce.sa.y(), ce.sb.y()) - 1.5)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max(ce.sa.y(), ce.sb.y()) + 1.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const std::size_t p = maps.pix(x, y);
        if (!band[p]) continue;
        const Eigen::Vector2d r = Eigen::Vector2d(x, y) - ce.sa;
        const double s = r.dot(dir) / (len * len);
        if (s < 0.0 || s > 1.0) continue;
        const double d = cross2(dir, r) / len;  // >0 on the covered side
        const double absd = std::abs(d);
        if (absd >= best_absd[p]) continue;
        // Occlusion: a nearer surface in front of the edge keeps its pixel.
        if (maps.covered(x, y)) {
          const double edge_z = ce.za + s * (ce.zb - ce.za);
          if (edge_z > maps.depth[p] * (1.0 + 1e-2) + 1e-9) continue;
        }
        best_absd[p] = absd;
        best_edge[p] = static_cast<std::int64_t>(e);
      }
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (best_edge[p] < 0) continue;
    const ContourEdge& ce = contours[static_cast<std::size_t>(best_edge[p])];
    const int x = static_cast<int>(p % W), y = static_cast<int>(p / W);
    const Eigen::Vector2d dir = ce.sb - ce.sa;
    const double d = cross2(dir, Eigen::Vector2d(x, y) - ce.sa) / dir.norm();
    maps.silhouette[p] = std::clamp(0.5 + d, 0.0, 1.0);
    maps.aa_events.push_back({x, y, ce.va, ce.vb});
  }
  return maps;
}

RasterGradients raster_adjoint(const MapGradients& grads, const TriMesh& mesh,
                               const Camera& camera, const AttributeMaps& maps) {
  const int W = maps.width, H = maps.height;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  auto check = [&](const std::vector<double>& g, std::size_t expect, const char* what) {
    if (!g.empty() && g.size() != expect)
      throw std::runtime_error(std::string("raster_adjoint: bad gradient shape for ") + what);
  };
  check(grads.silhouette, n, "silhouette");
  check(grads.depth, n, "depth");
  check(grads.position, n * 3, "position");
  check(grads.normal, n * 3, "normal");
  check(grads.albedo, n * 3, "albedo");

  const TransformedMesh tm = transform_mesh(mesh, camera);
  const Eigen::Matrix3d Rt = camera.rotation().transpose();
  const Eigen::Matrix3d& K = camera.K();
  const std::size_t V = mesh.vertices.size();

  const std::size_t n_chunks = 8;
  std::vector<std::vector<Eigen::Vector3d>> gv(n_chunks), gn(n_chunks), ga(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    gv[c].assign(V, Eigen::Vector3d::Zero());
    gn[c].assign(V, Eigen::Vector3d::Zero());
    ga[c].assign(V, Eigen::Vector3d::Zero());
  }

  parallel_chunks(H, n_chunks, [&](std::size_t chunk, std::size_t yb, std::size_t ye) {
    auto& gvc = gv[chunk];
    auto& gnc = gn[chunk];
    auto& gac = ga[chunk];
    for (std::size_t y = yb; y < ye; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t p = maps.pix(x, static_cast<int>(y));
        const std::int32_t f = maps.face_id[p];
        if (f < 0) continue;

        Eigen::Vector3d gP = Eigen::Vector3d::Zero(), gN = Eigen::Vector3d::Zero(),
                        gA = Eigen::Vector3d::Zero();
        if (!grads.position.empty())
          gP = Eigen::Vector3d(grads.position[3 * p], grads.position[3 * p + 1],
                               grads.position[3 * p + 2]);
        if (!grads.depth.empty()) gP.z() += grads.depth[p];
        if (!grads.normal.empty())
          gN = Eigen::Vector3d(grads.normal[3 * p], grads.normal[3 * p + 1],
                               grads.normal[3 * p + 2]);
        if (!grads.albedo.empty())
          gA = Eigen::Vector3d(grads.albedo[3 * p], grads.albedo[3 * p + 1],
                               grads.albedo[3 * p + 2]);
        if (gP.isZero() && gN.isZero() && gA.isZero()) continue;

        const FaceSetup& fs = tm.faces[f];
        const auto& face = mesh.faces[f];
        const Eigen::Vector2d u(x, static_cast<double>(y));
        double lambda[3];
        barycentrics(fs, u, lambda);
        const double w[3] = {lambda[0] / fs.z[0], lambda[1] / fs.z[1], lambda[2] / fs.z[2]};
        const double wsum = w[0] + w[1] + w[2];
        const double b[3] = {w[0] / wsum, w[1] / wsum, w[2] / wsum};

        // Linear-stage attribute values and their upstream gradients.
        Eigen::Vector3d attr_pos[3], attr_nrm[3], attr_alb[3];
        Eigen::Vector3d F_pos = Eigen::Vector3d::Zero(), F_nrm = Eigen::Vector3d::Zero(),
                        F_alb = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) {
          attr_pos[k] = tm.cam[face[k]];
          attr_nrm[k] =
              mesh.vertex_normals.empty() ? Eigen::Vector3d::Zero() : mesh.vertex_normals[face[k]];
          attr_alb[k] =
              mesh.has_albedo() ? mesh.vertex_albedo[face[k]] : Eigen::Vector3d::Zero();
          F_pos += b[k] * attr_pos[k];
          F_nrm += b[k] * attr_nrm[k];
          F_alb += b[k] * attr_alb[k];
        }

        // Normal map stores m/|m|; pull gN back to the linear interpolant m.
        Eigen::Vector3d gM = Eigen::Vector3d::Zero();
        const double mlen = F_nrm.norm();
        if (!gN.isZero() && mlen > 1e-12) {
          const Eigen::Vector3d unit = F_nrm / mlen;
          gM = (gN - unit * unit.dot(gN)) / mlen;
        }

        double glam[3] = {0, 0, 0}, gz[3] = {0, 0, 0};
        auto channel = [&](const Eigen::Vector3d attr[3], const Eigen::Vector3d& F,
                           const Eigen::Vector3d& g) {
          if (g.isZero()) return;
          for (int k = 0; k < 3; ++k) {
            const double gdot = g.dot(attr[k] - F);
            glam[k] += gdot / (wsum * fs.z[k]);
            gz[k] += -b[k] * gdot / fs.z[k];
          }
        };
        channel(attr_pos, F_pos, gP);
        channel(attr_nrm, F_nrm, gM);
        channel(attr_alb, F_alb, gA);

        // Attribute-path scatter.
        for (int k = 0; k < 3; ++k) {
          gnc[face[k]] += b[k] * gM;
          gac[face[k]] += b[k] * gA;
        }

        // lambda -> screen vertices.
        const Eigen::Vector2d d0 = fs.s[0] - u, d1 = fs.s[1] - u, d2 = fs.s[2] - u;
        const Eigen::Vector2d dD_ds1(d2.y() - d0.y(), d0.x() - d2.x());
        const Eigen::Vector2d dD_ds2(d0.y() - d1.y(), d1.x() - d0.x());
        const Eigen::Vector2d dD_ds0 = -(dD_ds1 + dD_ds2);
        // dN_k/ds_j for the numerators N0=cross(d1,d2), N1=cross(d2,d0), N2=cross(d0,d1).
        const Eigen::Vector2d dN[3][3] = {
            {Eigen::Vector2d::Zero(), Eigen::Vector2d(d2.y(), -d2.x()),
             Eigen::Vector2d(-d1.y(), d1.x())},
            {Eigen::Vector2d(-d2.y(), d2.x()), Eigen::Vector2d::Zero(),
             Eigen::Vector2d(d0.y(), -d0.x())},
            {Eigen::Vector2d(d1.y(), -d1.x()), Eigen::Vector2d(-d0.y(), d0.x()),
             Eigen::Vector2d::Zero()}};
        const Eigen::Vector2d dD[3] = {dD_ds0, dD_ds1, dD_ds2};

        Eigen::Vector2d gs[3] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                 Eigen::Vector2d::Zero()};
        for (int k = 0; k < 3; ++k) {
          if (glam[k] == 0.0) continue;
          for (int j = 0; j < 3; ++j)
            gs[j] += glam[k] * (dN[k][j] - lambda[k] * dD[j]) / fs.area2;
        }

        // screen + depth -> camera-frame vertices -> world.
        for (int k = 0; k < 3; ++k) {
          const Eigen::Vector3d& X = tm.cam[face[k]];
          Eigen::Vector3d gX = Eigen::Vector3d::Zero();
          const double iz = 1.0 / X.z();
          gX.x() += gs[k].x() * K(0, 0) * iz;
          gX.y() += gs[k].x() * K(0, 1) * iz + gs[k].y() * K(1, 1) * iz;
          gX.z() += -gs[k].x() * (K(0, 0) * X.x() + K(0, 1) * X.y()) * iz * iz -
                    gs[k].y() * K(1, 1) * X.y() * iz * iz;
          gX.z() += gz[k];
          gX += b[k] * gP;  // position channel: attribute is the vertex itself
          gvc[face[k]] += Rt * gX;
        }
      }
  });

  RasterGradients out;
  out.vertices.assign(V, Eigen::Vector3d::Zero());
  out.vertex_normals.assign(V, Eigen::Vector3d::Zero());
  out.vertex_albedo.assign(V, Eigen::Vector3d::Zero());
  for (std::size_t c = 0; c < n_chunks; ++c)
    for (std::size_t v = 0; v < V; ++v) {
      out.vertices[v] += gv[c][v];
      out.vertex_normals[v] += gn[c][v];
      out.vertex_albedo[v] += ga[c][v];
    }

  // Silhouette coverage term along the recorded contour edges.
  if (!grads.silhouette.empty()) {
    for (const AaEvent& ev : maps.aa_events) {
      const std::size_t p = maps.pix(ev.x, ev.y);
      const double gsil = grads.silhouette[p];
      if (gsil == 0.0) continue;
      const Eigen::Vector3d &Xa = tm.cam[ev.va], &Xb = tm.cam[ev.vb];
      if (Xa.z() <= kZNear || Xb.z() <= kZNear) continue;
      const Eigen::Vector2d sa = camera.project_camera(Xa);
      const Eigen::Vector2d sb = camera.project_camera(Xb);
      const Eigen::Vector2d e = sb - sa;
      const Eigen::Vector2d r = Eigen::Vector2d(ev.x, ev.y) - sa;
      const double len = e.norm();
      if (len < 1e-12) continue;
      const double c = cross2(e, r);
      const double d = c / len;
      if (0.5 + d <= 0.0 || 0.5 + d >= 1.0) continue;  // outside the ramp

      const Eigen::Vector2d dc_dsa(-r.y() + e.y(), r.x() - e.x());
      const Eigen::Vector2d dc_dsb(r.y(), -r.x());
      const Eigen::Vector2d dlen_dsa = -e / len;
      const Eigen::Vector2d dlen_dsb = e / len;
      const Eigen::Vector2d gd_sa = (dc_dsa * len - c * dlen_dsa) / (len * len);
      const Eigen::Vector2d gd_sb = (dc_dsb * len - c * dlen_dsb) / (len * len);

      const std::uint32_t vids[2] = {ev.va, ev.vb};
      const Eigen::Vector2d gsv[2] = {gsil * gd_sa, gsil * gd_sb};
      for (int k = 0; k < 2; ++k) {
        const Eigen::Vector3d& X = tm.cam[vids[k]];
        const double iz = 1.0 / X.z();
        Eigen::Vector3d gX;
        gX.x() = gsv[k].x() * K(0, 0) * iz;
        gX.y() = gsv[k].x() * K(0, 1) * iz + gsv[k].y() * K(1, 1) * iz;
        gX.z() = -gsv[k].x() * (K(0, 0) * X.x() + K(0, 1) * X.y()) * iz * iz -
                 gsv[k].y() * K(1, 1) * X.y() * iz * iz;
        out.vertices[vids[k]] += Rt * gX;
      }
    }
  }
  return out;
}

}  // namespace mvr
