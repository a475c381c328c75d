#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "splinediff/config.hpp"
#include "splinediff/gradcheck.hpp"

namespace splinediff {

struct GenDataResult {
  std::string manifest_path;
  std::size_t train_count = 0;
  std::size_t eval_count = 0;
};

GenDataResult cmd_gen_data(const Config& config, std::size_t n, const std::string& out_dir);

struct TrainResult {
  std::string checkpoint_path;
  double first_loss = 0.0;
  double final_loss = 0.0;
  std::int64_t final_step = 0;
  bool stopped_early = false;
};

/// Runs one training stage to its step budget (config, or steps_override when
/// >= 0, interpreted as the target total stage steps). Injection requires a
/// warm-up (or injection) checkpoint as ckpt_in; warmup accepts an optional
/// ckpt_in to resume. Metrics stream (JSONL) goes to *metrics when non-null.
TrainResult cmd_train(const Config& config, Stage stage, const std::string& data_dir,
                      const std::string& ckpt_in, const std::string& ckpt_out,
                      std::ostream* metrics = nullptr, std::int64_t steps_override = -1);

struct SampleResult {
  std::vector<std::string> files;
  std::string manifest_path;
};

/// Writes n DPT1 samples (sample_{i}.video.dpt) plus a small manifest. A
/// non-empty depth_file selects conditional sampling (requires an injection-
/// stage checkpoint); an optional style_file supplies the reference frame.
SampleResult cmd_sample(const Config& config, const std::string& ckpt_path,
                        const std::string& depth_file, std::size_t n, std::uint64_t seed,
                        const std::string& out_dir, const std::string& style_file = {});

struct EvalReport {
  double frechet = 0.0;
  double temporal_coherence = 0.0;
  std::optional<double> depth_fidelity_mean;
  std::vector<double> depth_fidelity_per_clip;
  std::size_t n_clips = 0;  // generated corpus size
  std::uint64_t projection_seed = 0;
};

/// Fits Gaussian stats on both corpora (all *.video.dpt files, sorted;
/// `split` filters the real dir by its manifest when not "all") and writes
/// the metrics JSON to out_path when non-empty.
EvalReport cmd_eval(const std::string& real_dir, const std::string& gen_dir,
                    const std::string& depth_dir, const std::string& out_path,
                    std::uint64_t projection_seed = 1234, const std::string& split = "all");

GradcheckReport cmd_gradcheck(std::uint64_t seed, bool corrupt = false,
                              std::ostream* out = nullptr);

struct AblateRow {
  std::string variant;
  std::uint64_t seed = 0;
  double frechet = 0.0;
  double depth_fidelity_mean = 0.0;
};

struct AblateResult {
  std::vector<AblateRow> rows;
  int ordered_seeds = 0;  // seeds with frechet(full) <= frechet(+PDA) <= frechet(baseline)
  int total_seeds = 0;
};

/// Trains baseline / +PDA / +PDA+ASD under identical budgets and seeds,
/// samples each against the same held-out depth set, evaluates, and writes
/// the comparison table JSON.
AblateResult cmd_ablate(const Config& config, const std::string& data_dir,
                        const std::string& out_path, const std::string& work_dir,
                        const std::vector<std::uint64_t>& seeds, std::ostream* log = nullptr);

}  // namespace splinediff
