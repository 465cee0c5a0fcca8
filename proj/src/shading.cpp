#include "mvr/shading.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mvr {

namespace {
constexpr double kC0 = 0.282095;  // band 0
constexpr double kC1 = 0.488603;  // band 1
constexpr double kC2 = 1.092548;  // xy, yz, xz
constexpr double kC3 = 0.315392;  // 3z^2 - 1
constexpr double kC4 = 0.546274;  // x^2 - y^2
}  // namespace

void SHLight::save_json(const std::string& path) const {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < 9; ++i) a.push_back(coeffs[i]);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write light file: " + path);
  out << a.dump(2) << "\n";
}

SHLight SHLight::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open light file: " + path);
  nlohmann::json a;
  in >> a;
  if (!a.is_array() || a.size() != 9)
    throw std::runtime_error("light file must hold a 9-float array: " + path);
  SHLight l;
  for (int i = 0; i < 9; ++i) l.coeffs[i] = a[i].get<double>();
  return l;
}

ShBasis sh_basis(const Eigen::Vector3d& normal) {
  const double len = normal.norm();
  if (len < 1e-12) throw std::invalid_argument("sh_basis: zero normal");
  const Eigen::Vector3d n = normal / len;
  const double x = n.x(), y = n.y(), z = n.z();
  ShBasis b;
  b << kC0, kC1 * y, kC1 * z, kC1 * x, kC2 * x * y, kC2 * y * z, kC3 * (3.0 * z * z - 1.0),
      kC2 * x * z, kC4 * (x * x - y * y);
  return b;
}

Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Eigen::Vector3d& n) {
  const double x = n.x(), y = n.y(), z = n.z();
  Eigen::Matrix<double, 9, 3> J = Eigen::Matrix<double, 9, 3>::Zero();
  J(1, 1) = kC1;
  J(2, 2) = kC1;
  J(3, 0) = kC1;
  J(4, 0) = kC2 * y;
  J(4, 1) = kC2 * x;
  J(5, 1) = kC2 * z;
  J(5, 2) = kC2 * y;
  J(6, 2) = kC3 * 6.0 * z;
  J(7, 0) = kC2 * z;
  J(7, 2) = kC2 * x;
  J(8, 0) = kC4 * 2.0 * x;
  J(8, 1) = -kC4 * 2.0 * y;
  return J;
}

SHLight estimate_light(const AttributeMaps& maps, const Image& gray) {
  if (gray.width() != maps.width || gray.height() != maps.height)
    throw std::runtime_error("estimate_light: image size does not match maps");
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  Eigen::Matrix<double, 9, 1> atb = Eigen::Matrix<double, 9, 1>::Zero();
  std::size_t used = 0;
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      const std::size_t p = maps.pix(x, y);
      if (maps.face_id[p] < 0 || maps.silhouette[p] < 0.5) continue;
      const Eigen::Vector3d n(maps.normal[3 * p], maps.normal[3 * p + 1],
                              maps.normal[3 * p + 2]);
      if (n.squaredNorm() < 0.5) continue;
      const ShBasis b = sh_basis(n);
      ata.noalias() += b * b.transpose();
      atb.noalias() += b * gray.at(x, y);
      ++used;
    }
  if (used < 9) throw std::runtime_error("estimate_light: fewer than 9 usable pixels");

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const auto& vals = eig.eigenvalues();
  const double tol = vals.cwiseAbs().maxCoeff() * 1e-10;
  SHLight light;
  Eigen::Matrix<double, 9, 1> inv = Eigen::Matrix<double, 9, 1>::Zero();
  int rank = 0;
  for (int i = 0; i < 9; ++i)
    if (vals[i] > tol) {
      inv[i] = 1.0 / vals[i];
      ++rank;
    }
  light.degenerate = rank < 9;
  light.coeffs =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * atb;
  return light;
}

Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const Eigen::Vector3d& normal,
                      const SHLight& light) {
  const double irr = sh_basis(normal).dot(light.coeffs);
  Eigen::Vector3d out = albedo * irr;
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

SfsResult sfs_loss(const AttributeMaps& maps, const SHLight& light, const Image& image,
                   bool want_normal_grad) {
  if (image.width() != maps.width || image.height() != maps.height || image.channels() != 3)
    throw std::runtime_error("sfs_loss: image does not match maps");
  SfsResult res;
  const std::size_t n = static_cast<std::size_t>(maps.width) * maps.height;
  res.grad_albedo.assign(n * 3, 0.0);
  if (want_normal_grad) res.grad_normal.assign(n * 3, 0.0);

  // First pass: count contributing pixels so gradients carry the 1/(3N) scale.
  auto usable = [&](std::size_t p) {
    if (maps.face_id[p] < 0) return false;
    const double nx = maps.normal[3 * p], ny = maps.normal[3 * p + 1],
                 nz = maps.normal[3 * p + 2];
    return nx * nx + ny * ny + nz * nz > 0.5;
  };
  std::size_t valid = 0;
  for (std::size_t p = 0; p < n; ++p)
    if (usable(p)) ++valid;
  res.valid_pixels = valid;
  if (valid == 0) return res;
  const double norm = 1.0 / (3.0 * static_cast<double>(valid));

  double loss = 0.0;
  for (int y = 0; y < maps.height; ++y)
    for (int x = 0; x < maps.width; ++x) {
      const std::size_t p = maps.pix(x, y);
      if (!usable(p)) continue;
      const Eigen::Vector3d nrm(maps.normal[3 * p], maps.normal[3 * p + 1],
                                maps.normal[3 * p + 2]);
      const ShBasis b = sh_basis(nrm);
      const double irr = b.dot(light.coeffs);
      double girr = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double a = maps.albedo[3 * p + c];
        const double r = a * irr - image.at(x, y, c);
        loss += std::abs(r);
        const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        res.grad_albedo[3 * p + c] = s * irr * norm;
        girr += s * a * norm;
      }
      if (want_normal_grad && girr != 0.0) {
        const Eigen::Vector3d gn =
            sh_basis_jacobian(nrm).transpose() * light.coeffs * girr;
        for (int c = 0; c < 3; ++c) res.grad_normal[3 * p + c] = gn[c];
      }
    }
  res.loss = loss * norm;
  return res;
}

LaplacianResult laplacian_reg(const TriMesh& mesh, const VertexAdjacency& adj,
                              const std::vector<Eigen::Vector3d>& attribute) {
  const std::size_t V = mesh.vertices.size();
  if (attribute.size() != V)
    throw std::runtime_error("laplacian_reg: attribute count does not match vertices");
  LaplacianResult res;
  res.grad.assign(V, Eigen::Vector3d::Zero());
  if (V == 0) return res;
  const double norm = 1.0 / static_cast<double>(V);

  for (std::size_t v = 0; v < V; ++v) {
    const std::size_t deg = adj.degree(v);
    if (deg == 0) continue;  // isolated vertex
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::uint32_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e)
      mean += attribute[adj.neighbors[e]];
    mean /= static_cast<double>(deg);
    const Eigen::Vector3d r = attribute[v] - mean;
    res.loss += r.cwiseAbs().sum() * norm;
    const Eigen::Vector3d s = r.unaryExpr(
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    res.grad[v] += s * norm;
    const Eigen::Vector3d back = s * (norm / static_cast<double>(deg));
    for (std::uint32_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e)
      res.grad[adj.neighbors[e]] -= back;
  }
  return res;
}

}  // namespace mvr
