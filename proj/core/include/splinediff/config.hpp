#pragma once

#include <cstdint>
#include <string>

#include "splinediff/denoiser.hpp"
#include "splinediff/synthdata.hpp"
#include "splinediff/training.hpp"

namespace splinediff {

enum class Variant { Full, NoAsd, NoPda, Baseline };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// One JSON document drives every command; flags may override scalar fields.
struct Config {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::string data_dir;
  ClipGeometry clip;
  struct Diffusion {
    int steps = 100;
    double beta_lo = 1e-3;
    double beta_hi = 0.1;
  } diffusion;
  struct Spline {
    int grid_intervals = 8;
    int order = 3;
    double lo = -3.0;
    double hi = 3.0;
  } spline;
  struct Model {
    int channels = 32;
    int blocks = 3;
    int style_dim = 16;
    int time_dim = 64;
  } model;
  OptimConfig optim;
  struct TrainCfg {
    std::int64_t warmup_steps = 4000;
    std::int64_t injection_steps = 2000;
    int eval_cadence = 200;
    int checkpoint_cadence = 1000;
    int batch = 16;
    int early_stop_patience = 5;
    double early_stop_min_improve = 0.01;
    int smooth_window = 3;
  } train;
  Variant variant = Variant::Full;

  ModelDims model_dims() const;
  std::string canonical_json() const;
  std::string hash() const;  // FNV-1a over the canonical JSON
};

Config config_from_json_text(const std::string& text);
std::string config_to_json_text(const Config& config);
Config load_config(const std::string& path);
void save_config(const std::string& path, const Config& config);

/// Cross-module checks (schedule strength, geometry/patch compatibility...).
/// Throws on violation.
void validate_config(const Config& config);

}  // namespace splinediff
