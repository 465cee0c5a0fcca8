#include "mvr/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mvr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", i);
  return buf;
}

Eigen::Matrix3d mat3_from(const json& a, const std::string& what) {
  if (!a.is_array() || a.size() != 9)
    throw std::runtime_error("cameras.json: " + what + " must be a 9-element row-major array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a[3 * r + c].get<double>();
  return m;
}

Eigen::Matrix4d mat4_from(const json& a, const std::string& what) {
  if (!a.is_array() || a.size() != 16)
    throw std::runtime_error("cameras.json: " + what + " must be a 16-element row-major array");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = a[4 * r + c].get<double>();
  return m;
}

json mat_to_json(const double* p, int n) {
  json a = json::array();
  for (int i = 0; i < n; ++i) a.push_back(p[i]);
  return a;
}

}  // namespace

std::vector<std::vector<int>> select_neighbors(const std::vector<Camera>& cameras,
                                               int neighbor_count) {
  const int n = static_cast<int>(cameras.size());
  std::vector<std::vector<int>> out(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d ai = cameras[i].optical_axis();
    std::vector<std::pair<double, int>> scored;
    scored.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = std::clamp(ai.dot(cameras[j].optical_axis()), -1.0, 1.0);
      scored.emplace_back(std::acos(c), j);
    }
    std::sort(scored.begin(), scored.end());
    const int take = std::min<int>(neighbor_count, static_cast<int>(scored.size()));
    for (int k = 0; k < take; ++k) out[i].push_back(scored[k].second);
  }
  return out;
}

MultiViewDataset load_dataset(const std::string& dir, int neighbor_count) {
  const fs::path root(dir);
  const fs::path camera_file = root / "cameras.json";
  std::ifstream in(camera_file);
  if (!in) throw std::runtime_error("cannot open " + camera_file.string());
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("failed to parse " + camera_file.string() + ": " + e.what());
  }

  if (!doc.contains("bounds_min") || !doc.contains("bounds_max"))
    throw std::runtime_error("cameras.json: missing bounds_min/bounds_max");
  MultiViewDataset ds;
  for (int k = 0; k < 3; ++k) {
    ds.bounds.min[k] = doc["bounds_min"][k].get<double>();
    ds.bounds.max[k] = doc["bounds_max"][k].get<double>();
  }
  if ((ds.bounds.extent().array() <= 0.0).any())
    throw std::runtime_error("cameras.json: bounds box is empty");

  const json& views = doc.at("views");
  if (!views.is_array() || views.size() < 2)
    throw std::runtime_error("cameras.json: need at least 2 views");

  std::vector<Camera> cameras;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const json& v = views[i];
    try {
      cameras.emplace_back(mat3_from(v.at("K"), "K"), mat4_from(v.at("T"), "T"),
                           v.at("width").get<int>(), v.at("height").get<int>());
    } catch (const std::exception& e) {
      throw std::runtime_error("cameras.json: view " + std::to_string(i) + ": " + e.what());
    }
  }

  for (std::size_t i = 0; i < cameras.size(); ++i) {
    View view;
    view.camera = cameras[i];
    const std::string img_path = (root / "images" / frame_name(static_cast<int>(i))).string();
    const std::string mask_path = (root / "masks" / frame_name(static_cast<int>(i))).string();
    Image img = load_png(img_path);
    if (img.channels() == 1) {  // grayscale capture: replicate to RGB
      Image rgb(img.width(), img.height(), 3);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y);
      img = std::move(rgb);
    }
    Image mraw = load_png(mask_path);
    if (mraw.channels() == 3) mraw = to_grayscale(mraw);
    Image mask(mraw.width(), mraw.height(), 1);
    for (int y = 0; y < mraw.height(); ++y)
      for (int x = 0; x < mraw.width(); ++x)
        mask.at(x, y) = mraw.at(x, y) > 127.5 / 255.0 ? 1.0 : 0.0;

    if (img.width() != cameras[i].width() || img.height() != cameras[i].height())
      throw std::runtime_error("view " + std::to_string(i) + ": image size " +
                               std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                               " does not match camera");
    if (mask.width() != cameras[i].width() || mask.height() != cameras[i].height())
      throw std::runtime_error("view " + std::to_string(i) + ": mask size does not match camera");

    view.gray = to_grayscale(img);
    view.image = std::move(img);
    view.mask = std::move(mask);
    ds.views.push_back(std::move(view));
  }

  ds.source_neighbors = select_neighbors(cameras, neighbor_count);
  return ds;
}

void save_dataset(const std::string& dir, const std::vector<Camera>& cameras,
                  const std::vector<Image>& images, const std::vector<Image>& masks,
                  const Aabb& bounds) {
  if (cameras.size() != images.size() || cameras.size() != masks.size())
    throw std::runtime_error("save_dataset: camera/image/mask counts differ");
  const fs::path root(dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");

  json doc;
  doc["bounds_min"] = {bounds.min.x(), bounds.min.y(), bounds.min.z()};
  doc["bounds_max"] = {bounds.max.x(), bounds.max.y(), bounds.max.z()};
  json views = json::array();
  for (const auto& cam : cameras) {
    json v;
    Eigen::Matrix<double, 3, 3, Eigen::RowMajor> K = cam.K();
    Eigen::Matrix<double, 4, 4, Eigen::RowMajor> T = cam.T();
    v["K"] = mat_to_json(K.data(), 9);
    v["T"] = mat_to_json(T.data(), 16);
    v["width"] = cam.width();
    v["height"] = cam.height();
    views.push_back(std::move(v));
  }
  doc["views"] = std::move(views);
  std::ofstream out(root / "cameras.json");
  out << doc.dump(2) << "\n";

  for (std::size_t i = 0; i < cameras.size(); ++i) {
    save_png(images[i], (root / "images" / frame_name(static_cast<int>(i))).string());
    save_png(masks[i], (root / "masks" / frame_name(static_cast<int>(i))).string());
  }
}

}  // namespace mvr
