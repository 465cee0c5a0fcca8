#include "mvr/config.hpp"

#include <fstream>
#include <stdexcept>

namespace mvr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void Config::validate() const {
  if (grid_res_visualhull < 8) throw std::runtime_error("config: grid_res_visualhull < 8");
  if (!is_pow2(grid_res_dpsr)) throw std::runtime_error("config: grid_res_dpsr must be a power of two");
  if (sig <= 0.0) throw std::runtime_error("config: sig must be positive");
  if (n_points < 4) throw std::runtime_error("config: n_points < 4");
  if (patch_size < 3 || patch_size % 2 == 0) throw std::runtime_error("config: patch_size must be odd and >= 3");
  if (patches_per_view <= 0) throw std::runtime_error("config: patches_per_view must be positive");
  if (delta_ncc <= -1.0 || delta_ncc >= 1.0) throw std::runtime_error("config: delta_ncc must be in (-1,1)");
  if (delta_d <= 0.0) throw std::runtime_error("config: delta_d must be positive");
  if (epochs_stage1 < 0 || epochs_albedo < 0 || epochs_joint < 0)
    throw std::runtime_error("config: epoch counts must be non-negative");
  if (lambda_sil < 0 || lambda_ncc < 0 || lambda_sfs < 0 || lambda_mesh < 0 || lambda_albedo < 0)
    throw std::runtime_error("config: loss weights must be non-negative");
  if (lr_points <= 0 || lr_vertices <= 0 || lr_albedo_init <= 0 || lr_albedo_joint <= 0)
    throw std::runtime_error("config: learning rates must be positive");
  if (resample_every <= 0) throw std::runtime_error("config: resample_every must be positive");
  if (neighbor_count <= 0) throw std::runtime_error("config: neighbor_count must be positive");
}

void apply_config_entry(Config& c, const std::string& key, const std::string& value) {
  auto i = [&] { return std::stoi(value); };
  auto d = [&] { return std::stod(value); };
  auto b = [&] { return value == "1" || value == "true" || value == "on"; };
  if (key == "grid_res_visualhull") c.grid_res_visualhull = i();
  else if (key == "grid_res_dpsr") c.grid_res_dpsr = i();
  else if (key == "sig") c.sig = d();
  else if (key == "n_points") c.n_points = i();
  else if (key == "patch_size") c.patch_size = i();
  else if (key == "patches_per_view") c.patches_per_view = i();
  else if (key == "delta_ncc") c.delta_ncc = d();
  else if (key == "delta_d") c.delta_d = d();
  else if (key == "epochs_stage1") c.epochs_stage1 = i();
  else if (key == "lambda_sil") c.lambda_sil = d();
  else if (key == "lambda_ncc") c.lambda_ncc = d();
  else if (key == "lambda_sfs") c.lambda_sfs = d();
  else if (key == "lambda_mesh") c.lambda_mesh = d();
  else if (key == "lambda_albedo") c.lambda_albedo = d();
  else if (key == "lr_points") c.lr_points = d();
  else if (key == "lr_vertices") c.lr_vertices = d();
  else if (key == "lr_albedo_init") c.lr_albedo_init = d();
  else if (key == "lr_albedo_joint") c.lr_albedo_joint = d();
  else if (key == "epochs_albedo") c.epochs_albedo = i();
  else if (key == "epochs_joint") c.epochs_joint = i();
  else if (key == "resample_every") c.resample_every = i();
  else if (key == "neighbor_count") c.neighbor_count = i();
  else if (key == "shared_light") c.shared_light = b();
  else if (key == "seed") c.seed = std::stoull(value);
  else throw std::runtime_error("config: unknown key '" + key + "'");
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: missing '=' at " + path + ":" + std::to_string(lineno));
    apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

}  // namespace mvr
