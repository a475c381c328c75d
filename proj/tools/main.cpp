// splinediff: conditional diffusion lab with learnable spline activations and
// depth-prior conditioning on synthetic tube-flythrough clips.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "splinediff/cli.hpp"
#include "splinediff/errors.hpp"

using namespace splinediff;

namespace {

int log_level() {
  const char* env = std::getenv("SPLINEDIFF_LOG");
  if (env == nullptr) return 1;
  const std::string v = env;
  if (v == "quiet") return 0;
  if (v == "debug") return 2;
  return 1;
}

Config load_or_default(const std::string& config_path, std::uint64_t seed_override,
                       bool has_seed) {
  Config config;
  if (!config_path.empty()) config = load_config(config_path);
  if (has_seed) config.seed = seed_override;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional diffusion lab: spline-activation denoiser with depth priors"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  bool has_seed = false;
  app.add_option("--config", config_path, "config JSON path (defaults are built in)");
  app.add_option("--seed", seed, "override config seed")->each([&](const std::string&) {
    has_seed = true;
  });

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic depth/video corpus");
  std::size_t gen_n = 256;
  std::string gen_out;
  gen->add_option("-n,--count", gen_n, "number of clips")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "run one training stage");
  std::string train_stage = "warmup", train_data, train_in, train_out, metrics_path;
  std::int64_t train_steps = -1;
  train->add_option("--stage", train_stage, "warmup | injection")->required();
  train->add_option("--data", train_data, "corpus directory (with manifest.json)")->required();
  train->add_option("--in", train_in, "checkpoint to resume / warm-up checkpoint");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--steps", train_steps, "override target stage steps");
  train->add_option("--metrics", metrics_path, "also write the JSONL metrics stream here");

  // sample
  auto* sample = app.add_subcommand("sample", "sample videos from a checkpoint");
  std::string sample_ckpt, sample_depth, sample_out, sample_style;
  std::size_t sample_n = 1;
  std::uint64_t sample_seed = 1;
  sample->add_option("--ckpt", sample_ckpt, "checkpoint path")->required();
  sample->add_option("--depth", sample_depth, "depth DPT1 file (omit for unconditional)");
  sample->add_option("--style", sample_style, "style reference frame DPT1 file");
  sample->add_option("-n,--count", sample_n, "number of samples");
  sample->add_option("--sample-seed", sample_seed, "sampling seed");
  sample->add_option("--out", sample_out, "output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "metric suite over real vs generated corpora");
  std::string eval_real, eval_gen, eval_depth, eval_out, eval_split = "all";
  std::uint64_t eval_proj = 1234;
  eval->add_option("--real", eval_real, "real corpus directory")->required();
  eval->add_option("--gen", eval_gen, "generated corpus directory")->required();
  eval->add_option("--depth", eval_depth, "depth directory for fidelity (paired by sort order)");
  eval->add_option("--out", eval_out, "metrics JSON output path")->required();
  eval->add_option("--projection-seed", eval_proj, "feature projection seed");
  eval->add_option("--split", eval_split, "real-side split filter: all | train | eval");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  gradcheck->add_option("--gc-seed", gc_seed, "probe seed");
  gradcheck->add_flag("--corrupt", gc_corrupt,
                      "negative control: corrupt one gradient and expect FAIL");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "baseline / +PDA / +PDA+ASD comparison");
  std::string ab_data, ab_out, ab_work;
  std::vector<std::uint64_t> ab_seeds{1, 2, 3};
  ablate->add_option("--data", ab_data, "corpus directory")->required();
  ablate->add_option("--out", ab_out, "comparison table JSON path")->required();
  ablate->add_option("--work", ab_work, "working directory for checkpoints/samples")->required();
  ablate->add_option("--seeds", ab_seeds, "seeds to run");

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = load_or_default(config_path, seed, has_seed);
    if (gen->parsed()) {
      GenDataResult r = cmd_gen_data(config, gen_n, gen_out);
      std::cout << r.manifest_path << "\n";
      if (log_level() > 0) {
        std::cerr << "wrote " << gen_n << " clips (" << r.train_count << " train / "
                  << r.eval_count << " eval)\n";
      }
    } else if (train->parsed()) {
      std::ofstream metrics_file;
      if (!metrics_path.empty()) {
        metrics_file.open(metrics_path, std::ios::trunc);
        if (!metrics_file) fail(ErrorCode::IoError, "cannot open " + metrics_path);
      }
      std::ostream* metrics = metrics_file.is_open() ? &metrics_file : &std::cout;
      TrainResult r = cmd_train(config, stage_from_string(train_stage), train_data, train_in,
                                train_out, metrics, train_steps);
      if (log_level() > 0) {
        std::cerr << "stage done: step=" << r.final_step << " loss=" << r.final_loss
                  << (r.stopped_early ? " (early stop)" : "") << " -> " << r.checkpoint_path
                  << "\n";
      }
    } else if (sample->parsed()) {
      SampleResult r =
          cmd_sample(config, sample_ckpt, sample_depth, sample_n, sample_seed, sample_out,
                     sample_style);
      for (const auto& f : r.files) std::cout << f << "\n";
    } else if (eval->parsed()) {
      EvalReport r = cmd_eval(eval_real, eval_gen, eval_depth, eval_out, eval_proj, eval_split);
      std::cout << eval_out << "\n";
      if (log_level() > 0) {
        std::cerr << "frechet=" << r.frechet << " coherence=" << r.temporal_coherence;
        if (r.depth_fidelity_mean) std::cerr << " fidelity=" << *r.depth_fidelity_mean;
        std::cerr << "\n";
      }
    } else if (gradcheck->parsed()) {
      GradcheckReport r = cmd_gradcheck(gc_seed, gc_corrupt, &std::cout);
      return r.pass ? 0 : 1;
    } else if (ablate->parsed()) {
      AblateResult r = cmd_ablate(config, ab_data, ab_out, ab_work, ab_seeds,
                                  log_level() > 0 ? &std::cerr : nullptr);
      std::cout << ab_out << "\n";
      if (log_level() > 0) {
        std::cerr << "ordering satisfied in " << r.ordered_seeds << "/" << r.total_seeds
                  << " seeds\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
