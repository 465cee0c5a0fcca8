#pragma once

#include <cstdint>
#include <string>

namespace mvr {

// Pipeline hyperparameters. Defaults are the desk-scale operating point;
// any field can be overridden from a flat `key = value` file or CLI flags.
struct Config {
  int grid_res_visualhull = 128;
  int grid_res_dpsr = 128;  // power of two
  double sig = 4.0;         // Gaussian spectral smoothing, grid units
  int n_points = 50000;
  int patch_size = 11;      // odd
  int patches_per_view = 200;
  double delta_ncc = 0.5;
  double delta_d = 0.01;    // world units
  int epochs_stage1 = 10;
  double lambda_sil = 20.0;
  double lambda_ncc = 5.0;
  double lambda_sfs = 20.0;
  double lambda_mesh = 50.0;
  double lambda_albedo = 1.0;
  double lr_points = 1e-3;
  double lr_vertices = 1e-3;
  double lr_albedo_init = 1e-2;
  double lr_albedo_joint = 5e-3;
  int epochs_albedo = 200;
  int epochs_joint = 100;
  int resample_every = 2;   // epochs
  int neighbor_count = 4;
  bool shared_light = false;  // one SH light for all views instead of per view
  std::uint64_t seed = 0;

  void validate() const;
};

Config load_config(const std::string& path);          // flat key = value file
void apply_config_entry(Config& c, const std::string& key, const std::string& value);

}  // namespace mvr
