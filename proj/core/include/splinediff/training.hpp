#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "splinediff/conditioning.hpp"
#include "splinediff/denoiser.hpp"
#include "splinediff/diffusion.hpp"

namespace splinediff {

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double ema_decay = 0.999;
};

/// One training example: whitened latent clip, its depth sequence, and the
/// clean first frame for the style reference.
struct TrainClip {
  TensorF z0;
  TensorF depth;
  TensorF first_frame;  // [1,H,W]
};

struct TrainingData {
  std::vector<TrainClip> train;
  std::vector<TrainClip> eval;
  LatentCodec codec;
};

struct TrainState {
  Stage stage = Stage::Warmup;
  std::int64_t step = 0;        // global optimizer step count
  std::int64_t stage_step = 0;  // steps completed in the current stage
  Rng rng{0};                   // batch/timestep/noise stream
  std::vector<std::vector<float>> m;    // AdamW first moments, per named param
  std::vector<std::vector<float>> v;    // AdamW second moments
  std::vector<std::vector<float>> ema;  // EMA shadow values
  std::vector<std::uint8_t> ema_covered;
  std::vector<std::uint8_t> trainable;  // current-stage mask over the registry
  std::vector<double> eval_losses;      // raw eval-loss history (all stages)
};

/// Fresh state for a model at the given stage; EMA shadows start at the
/// current parameter values of the stage's trainable set.
TrainState init_train_state(const Denoiser<float>& model, std::uint64_t seed, Stage stage);

/// Switches a warmed-up state into the injection stage: resets the stage step,
/// refreshes the trainable mask, and extends EMA coverage to the newly
/// trainable parameters.
void begin_injection(const Denoiser<float>& model, TrainState& state);

/// One optimizer step over a batch of clip indices into data.train. Samples t
/// uniformly per clip, corrupts via the forward marginal, backprops the MSE
/// objective, applies AdamW to the trainable set only, and updates the EMA.
double train_step(Denoiser<float>& model, TrainState& state, const TrainingData& data,
                  std::span<const std::size_t> batch, const NoiseSchedule& sched,
                  const OptimConfig& optim);

/// Deterministic eval loss: every eval clip is scored on `draws` fixed
/// (t, noise) pairs derived from eval_seed, so successive evaluations are
/// comparable point estimates.
double eval_loss(Denoiser<float>& model, const TrainState& state, const TrainingData& data,
                 const NoiseSchedule& sched, std::uint64_t eval_seed, int draws = 4);

/// Trailing-mean smoothing used before the early-stop rule.
std::vector<double> smooth_losses(std::span<const double> raw, int window);

/// True once the best smoothed loss has gone `patience` consecutive
/// evaluations without improving by more than min_rel_improve (relative).
bool early_stop_check(std::span<const double> smoothed, int patience = 5,
                      double min_rel_improve = 0.01);

struct StageRunConfig {
  std::int64_t target_stage_steps = 0;  // run until stage_step reaches this
  int batch = 16;
  int eval_cadence = 200;
  int checkpoint_cadence = 1000;
  int early_stop_patience = 5;
  double early_stop_min_improve = 0.01;
  int smooth_window = 3;
  std::uint64_t eval_seed = 0;
  int eval_draws = 4;
};

struct StageCallbacks {
  std::function<void(const std::string&)> on_metrics;  // one JSONL record
  std::function<void()> on_checkpoint;                 // periodic save
};

struct StageResult {
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double first_loss = std::numeric_limits<double>::quiet_NaN();
  bool stopped_early = false;
};

StageResult run_stage(Denoiser<float>& model, TrainState& state, const TrainingData& data,
                      const NoiseSchedule& sched, const OptimConfig& optim,
                      const StageRunConfig& run, const StageCallbacks& callbacks = {});

/// Copies raw parameters into `dst`, overriding EMA-covered entries with
/// their shadow values. `dst` must share the source layout.
void load_ema_into(const Denoiser<float>& src, const TrainState& state, Denoiser<float>& dst);

}  // namespace splinediff
