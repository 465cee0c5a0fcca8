#include "mvr/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mvr/parallel.hpp"
#include "mvr/rng.hpp"

namespace mvr {

namespace {

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + (c - b) * w;
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Median-split AABB tree over triangles for nearest-surface queries.
class TriangleTree {
 public:
  explicit TriangleTree(const TriMesh& mesh) : mesh_(mesh) {
    const std::size_t F = mesh.faces.size();
    if (F == 0) throw std::runtime_error("TriangleTree: mesh has no faces");
    order_.resize(F);
    std::iota(order_.begin(), order_.end(), 0u);
    centroids_.resize(F);
    for (std::size_t f = 0; f < F; ++f) {
      const auto& [i, j, k] = mesh.faces[f];
      centroids_[f] = (mesh.vertices[i] + mesh.vertices[j] + mesh.vertices[k]) / 3.0;
    }
    nodes_.reserve(2 * F);
    build(0, F);
  }

  // Squared distance plus the face holding the closest point.
  double closest(const Eigen::Vector3d& p, std::size_t* face) const {
    double best = std::numeric_limits<double>::infinity();
    query(0, p, &best, face);
    return best;
  }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin = 0, end = 0;  // leaf range in order_
    std::int32_t left = -1, right = -1;
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::size_t i = begin; i < end; ++i)
      for (const auto v : mesh_.faces[order_[i]]) {
        lo = lo.cwiseMin(mesh_.vertices[v]);
        hi = hi.cwiseMax(mesh_.vertices[v]);
      }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= 8) {
      nodes_[id].begin = static_cast<std::uint32_t>(begin);
      nodes_[id].end = static_cast<std::uint32_t>(end);
      return id;
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t x, std::uint32_t y) {
                       return centroids_[x][axis] < centroids_[y][axis];
                     });
    const std::uint32_t l = build(begin, mid);
    const std::uint32_t r = build(mid, end);
    nodes_[id].left = static_cast<std::int32_t>(l);
    nodes_[id].right = static_cast<std::int32_t>(r);
    return id;
  }

  double box_dist2(const Node& n, const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d =
        (n.lo - p).cwiseMax(0.0).cwiseMax(p - n.hi);
    return d.squaredNorm();
  }

  void query(std::uint32_t id, const Eigen::Vector3d& p, double* best,
             std::size_t* face) const {
    const Node& n = nodes_[id];
    if (box_dist2(n, p) >= *best) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t f = order_[i];
        const auto& [a, b, c] = mesh_.faces[f];
        const Eigen::Vector3d q = closest_point_on_triangle(
            p, mesh_.vertices[a], mesh_.vertices[b], mesh_.vertices[c]);
        const double d2 = (q - p).squaredNorm();
        if (d2 < *best) {
          *best = d2;
          if (face) *face = f;
        }
      }
      return;
    }
    const double dl = box_dist2(nodes_[n.left], p);
    const double dr = box_dist2(nodes_[n.right], p);
    if (dl <= dr) {
      query(static_cast<std::uint32_t>(n.left), p, best, face);
      query(static_cast<std::uint32_t>(n.right), p, best, face);
    } else {
      query(static_cast<std::uint32_t>(n.right), p, best, face);
      query(static_cast<std::uint32_t>(n.left), p, best, face);
    }
  }

  const TriMesh& mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Eigen::Vector3d> centroids_;
  std::vector<Node> nodes_;
};

double directed_mean_distance(const TriMesh& from, const TriangleTree& tree,
                              std::size_t samples, std::uint64_t seed) {
  const OrientedPointCloud pc = sample_surface(from, samples, seed);
  std::vector<double> partial(16, 0.0);
  parallel_chunks(pc.size(), 16, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      std::size_t face;
      acc += std::sqrt(tree.closest(pc.positions[i], &face));
    }
    partial[chunk] = acc;
  });
  double total = 0.0;
  for (const double p : partial) total += p;
  return total / static_cast<double>(pc.size());
}

double directed_normal_error(const TriMesh& from, const TriMesh& to,
                             const TriangleTree& tree, std::size_t samples,
                             std::uint64_t seed) {
  const OrientedPointCloud pc = sample_surface(from, samples, seed);
  std::vector<double> partial(16, 0.0);
  parallel_chunks(pc.size(), 16, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      std::size_t face = 0;
      tree.closest(pc.positions[i], &face);
      acc += 1.0 - std::abs(pc.normals[i].dot(face_normal(to, face)));
    }
    partial[chunk] = acc;
  });
  double total = 0.0;
  for (const double p : partial) total += p;
  return total / static_cast<double>(pc.size());
}

}  // namespace

double chamfer_l1(const TriMesh& a, const TriMesh& b, std::size_t samples,
                  std::uint64_t seed) {
  if (a.faces.empty() || b.faces.empty())
    throw std::runtime_error("chamfer_l1: empty mesh");
  const TriangleTree tree_a(a), tree_b(b);
  // Same sampling seed for both directions keeps the metric exactly
  // symmetric under argument swap.
  const double ab = directed_mean_distance(a, tree_b, samples, Rng::derive(seed, 1));
  const double ba = directed_mean_distance(b, tree_a, samples, Rng::derive(seed, 1));
  return 0.5 * (ab + ba);
}

double normal_error(const TriMesh& a, const TriMesh& b, std::size_t samples,
                    std::uint64_t seed) {
  if (a.faces.empty() || b.faces.empty())
    throw std::runtime_error("normal_error: empty mesh");
  const TriangleTree tree_a(a), tree_b(b);
  const double ab = directed_normal_error(a, b, tree_b, samples, Rng::derive(seed, 3));
  const double ba = directed_normal_error(b, a, tree_a, samples, Rng::derive(seed, 3));
  return 0.5 * (ab + ba);
}

double psnr(const Image& a, const Image& b, const Image& mask) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels())
    throw std::runtime_error("psnr: image sizes differ");
  if (mask.width() != a.width() || mask.height() != a.height())
    throw std::runtime_error("psnr: mask size differs");
  double acc = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (mask.at(x, y) <= 0.5) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = a.at(x, y, c) - b.at(x, y, c);
        acc += d * d;
      }
      ++count;
    }
  if (count == 0) throw std::runtime_error("psnr: empty mask");
  const double mse = acc / (static_cast<double>(count) * a.channels());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json doc;
  doc["chamfer_l1"] = report.chamfer;
  doc["normal_error"] = report.normal;
  if (report.psnr_db >= 0.0) doc["psnr_db"] = report.psnr_db;
  doc["samples"] = report.samples;
  doc["seed"] = report.seed;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics report: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace mvr
