#include "splinediff/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "splinediff/checkpoint.hpp"
#include "splinediff/metrics.hpp"
#include "splinediff/sampling.hpp"
#include "splinediff/tensor_io.hpp"

namespace splinediff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// One process owns one checkpoint path while training.
class LockFile {
 public:
  explicit LockFile(const std::string& target) : path_(target + ".lock") {
    std::error_code ec;
    if (fs::exists(path_, ec)) {
      fail(ErrorCode::IoError, "lock file exists (another run owns " + target +
                                   "?); remove " + path_ + " if stale");
    }
    std::ofstream os(path_, std::ios::trunc);
    if (!os) fail(ErrorCode::IoError, "cannot create lock file " + path_);
    os << "pid unknown\n";
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  std::string path_;
};

struct LoadedCorpus {
  Manifest manifest;
  std::vector<Clip> train;
  std::vector<Clip> eval;
};

LoadedCorpus load_corpus(const std::string& data_dir) {
  const std::string mpath = data_dir + "/manifest.json";
  if (!fs::exists(mpath)) fail(ErrorCode::IoError, "no manifest.json in " + data_dir);
  LoadedCorpus corpus;
  corpus.manifest = read_manifest(mpath);
  for (const auto& entry : corpus.manifest.entries) {
    Clip clip = read_clip(data_dir + "/" + entry.id + ".video.dpt",
                          data_dir + "/" + entry.id + ".depth.dpt");
    clip.id = entry.id;
    (entry.split == "train" ? corpus.train : corpus.eval).push_back(std::move(clip));
  }
  return corpus;
}

TrainingData build_training_data(const LoadedCorpus& corpus, const LatentCodec& codec) {
  TrainingData data;
  data.codec = codec;
  auto convert = [&](const std::vector<Clip>& src, std::vector<TrainClip>& dst) {
    for (const Clip& clip : src) {
      TrainClip tc;
      tc.z0 = codec.encode(clip.video);
      tc.depth = clip.depth;
      const std::size_t hw = clip.video.extent(2) * clip.video.extent(3);
      tc.first_frame = TensorF({1, clip.video.extent(2), clip.video.extent(3)},
                               std::vector<float>(clip.video.data(), clip.video.data() + hw));
      dst.push_back(std::move(tc));
    }
  };
  convert(corpus.train, data.train);
  convert(corpus.eval, data.eval);
  return data;
}

std::vector<std::string> list_files(const std::string& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

GenDataResult cmd_gen_data(const Config& config, std::size_t n, const std::string& out_dir) {
  GenDataResult result;
  result.manifest_path = make_corpus(n, config.seed, out_dir, config.clip);
  result.train_count = train_split_count(n);
  result.eval_count = n - result.train_count;
  return result;
}

TrainResult cmd_train(const Config& config, Stage stage, const std::string& data_dir,
                      const std::string& ckpt_in, const std::string& ckpt_out,
                      std::ostream* metrics, std::int64_t steps_override) {
  validate_config(config);
  if (stage == Stage::Injection && ckpt_in.empty()) {
    fail(ErrorCode::StagePrerequisite, "injection requires a warm-up checkpoint (--in)");
  }
  LockFile lock(ckpt_out);

  LoadedCorpus corpus = load_corpus(data_dir);
  NoiseSchedule sched =
      make_schedule(config.diffusion.steps, config.diffusion.beta_lo, config.diffusion.beta_hi);
  Denoiser<float> model(config.model_dims());
  TrainState state;
  LatentCodec codec;

  if (!ckpt_in.empty()) {
    CheckpointMeta meta = load_checkpoint(ckpt_in, model, state, codec);
    if (stage == Stage::Warmup && meta.stage != Stage::Warmup) {
      fail(ErrorCode::InvalidStage, "cannot resume warmup from an injection checkpoint");
    }
    if (stage == Stage::Injection && meta.stage == Stage::Warmup) {
      begin_injection(model, state);
    }
  } else {
    model.init(config.seed);
    state = init_train_state(model, config.seed, Stage::Warmup);
    std::vector<TensorF> train_videos;
    for (const Clip& clip : corpus.train) train_videos.push_back(clip.video);
    codec = LatentCodec::fit(train_videos);
  }

  TrainingData data = build_training_data(corpus, codec);

  StageRunConfig run;
  run.target_stage_steps = steps_override >= 0
                               ? steps_override
                               : (stage == Stage::Warmup ? config.train.warmup_steps
                                                         : config.train.injection_steps);
  run.batch = config.train.batch;
  run.eval_cadence = config.train.eval_cadence;
  run.checkpoint_cadence = config.train.checkpoint_cadence;
  run.early_stop_patience = config.train.early_stop_patience;
  run.early_stop_min_improve = config.train.early_stop_min_improve;
  run.smooth_window = config.train.smooth_window;
  run.eval_seed = config.seed;

  const std::string config_hash = config.hash();
  const std::string variant = to_string(config.variant);
  StageCallbacks callbacks;
  if (metrics != nullptr) {
    callbacks.on_metrics = [metrics](const std::string& line) { (*metrics) << line << "\n"; };
  }
  callbacks.on_checkpoint = [&]() {
    save_checkpoint(ckpt_out, model, state, codec, config_hash, variant);
  };

  StageResult sr = run_stage(model, state, data, sched, config.optim, run, callbacks);
  save_checkpoint(ckpt_out, model, state, codec, config_hash, variant);

  TrainResult result;
  result.checkpoint_path = ckpt_out;
  result.first_loss = sr.first_loss;
  result.final_loss = sr.final_loss;
  result.final_step = state.step;
  result.stopped_early = sr.stopped_early;
  return result;
}

SampleResult cmd_sample(const Config& config, const std::string& ckpt_path,
                        const std::string& depth_file, std::size_t n, std::uint64_t seed,
                        const std::string& out_dir, const std::string& style_file) {
  CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
  const bool conditional = !depth_file.empty();
  if (conditional && meta.stage != Stage::Injection) {
    fail(ErrorCode::StagePrerequisite,
         "conditional sampling requires an injection-stage checkpoint");
  }
  if (!meta.has_ema) fail(ErrorCode::MissingState, "checkpoint has no EMA shadow");

  Config cfg = config;
  cfg.variant = variant_from_string(meta.variant);
  Denoiser<float> model(cfg.model_dims());
  TrainState state;
  LatentCodec codec;
  load_checkpoint(ckpt_path, model, state, codec);
  Denoiser<float> ema_model(cfg.model_dims());
  load_ema_into(model, state, ema_model);

  ConditionBundle<float> cond;
  if (conditional) {
    TensorF depth = read_dpt(depth_file);
    TensorF style_frame({1, depth.extent(2), depth.extent(3)});
    if (!style_file.empty()) {
      TensorF f = read_dpt(style_file);
      style_frame = f.reshaped({1, f.extent(f.ndim() - 2), f.extent(f.ndim() - 1)});
    }
    DepthEncoderCache<float> dc;
    StyleEncoderCache<float> sc;
    cond = ema_model.make_condition(depth, style_frame, dc, sc);
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) fail(ErrorCode::IoError, "cannot create " + out_dir);

  NoiseSchedule sched =
      make_schedule(cfg.diffusion.steps, cfg.diffusion.beta_lo, cfg.diffusion.beta_hi);
  SampleResult result;
  json manifest = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng(seed).fork(0x5A5A + i);
    TensorF sample = sample_video(ema_model, sched, cond, rng, codec);
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%05zu.video.dpt", i);
    const std::string path = out_dir + "/" + name;
    write_dpt(path, sample);
    result.files.push_back(path);
    manifest.push_back(json{{"file", name},
                            {"seed", seed},
                            {"stream", i},
                            {"depth_source", conditional ? depth_file : ""}});
  }
  result.manifest_path = out_dir + "/samples.json";
  std::ofstream os(result.manifest_path, std::ios::trunc);
  os << manifest.dump(2) << "\n";
  return result;
}

EvalReport cmd_eval(const std::string& real_dir, const std::string& gen_dir,
                    const std::string& depth_dir, const std::string& out_path,
                    std::uint64_t projection_seed, const std::string& split) {
  std::vector<std::string> real_files = list_files(real_dir, ".video.dpt");
  if (split != "all" && fs::exists(real_dir + "/manifest.json")) {
    Manifest manifest = read_manifest(real_dir + "/manifest.json");
    std::vector<std::string> keep;
    for (const auto& e : manifest.entries) {
      if (e.split == split) keep.push_back(real_dir + "/" + e.id + ".video.dpt");
    }
    std::sort(keep.begin(), keep.end());
    real_files = std::move(keep);
  }
  std::vector<std::string> gen_files = list_files(gen_dir, ".video.dpt");
  if (real_files.size() < 2 || gen_files.size() < 2) {
    fail(ErrorCode::InsufficientData, "cmd_eval: need >= 2 clips on each side");
  }
  std::vector<TensorF> real_clips, gen_clips;
  for (const auto& f : real_files) real_clips.push_back(read_dpt(f));
  for (const auto& f : gen_files) gen_clips.push_back(read_dpt(f));

  EvalReport report;
  report.projection_seed = projection_seed;
  report.n_clips = gen_clips.size();
  GaussianStats real_stats = fit_gaussian_stats(real_clips, projection_seed);
  GaussianStats gen_stats = fit_gaussian_stats(gen_clips, projection_seed);
  report.frechet = frechet_distance(real_stats, gen_stats);
  double coh = 0.0;
  for (const auto& clip : gen_clips) coh += temporal_coherence(clip);
  report.temporal_coherence = coh / static_cast<double>(gen_clips.size());

  if (!depth_dir.empty()) {
    std::vector<std::string> depth_files = list_files(depth_dir, ".depth.dpt");
    if (depth_files.size() != gen_files.size()) {
      fail(ErrorCode::InvalidParams,
           "cmd_eval: depth/gen counts differ (pairing is by sorted order)");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < gen_clips.size(); ++i) {
      TensorF depth = read_dpt(depth_files[i]);
      FidelityResult fr = depth_fidelity(gen_clips[i], depth);
      report.depth_fidelity_per_clip.push_back(fr.value);
      total += fr.value;
    }
    report.depth_fidelity_mean = total / static_cast<double>(gen_clips.size());
  }

  if (!out_path.empty()) {
    json j;
    j["frechet"] = report.frechet;
    j["depth_fidelity_mean"] =
        report.depth_fidelity_mean ? json(*report.depth_fidelity_mean) : json(nullptr);
    j["depth_fidelity_per_clip"] = report.depth_fidelity_per_clip;
    j["temporal_coherence"] = report.temporal_coherence;
    j["n_clips"] = report.n_clips;
    j["projection_seed"] = report.projection_seed;
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) fail(ErrorCode::IoError, "cannot open for write: " + out_path);
    os << j.dump(2) << "\n";
  }
  return report;
}

GradcheckReport cmd_gradcheck(std::uint64_t seed, bool corrupt, std::ostream* out) {
  GradcheckReport report = run_gradcheck(seed, corrupt);
  if (out != nullptr) {
    for (const auto& s : report.suites) {
      (*out) << (s.pass ? "PASS" : "FAIL") << "  " << s.name << "  max_err=" << s.max_err
             << "  tol=" << s.tolerance << "  checked=" << s.checked << "\n";
    }
    (*out) << (report.pass ? "PASS" : "FAIL") << "  overall\n";
  }
  return report;
}

AblateResult cmd_ablate(const Config& config, const std::string& data_dir,
                        const std::string& out_path, const std::string& work_dir,
                        const std::vector<std::uint64_t>& seeds, std::ostream* log) {
  std::error_code ec;
  fs::create_directories(work_dir, ec);
  const struct {
    Variant variant;
    const char* label;
  } variants[] = {{Variant::Baseline, "baseline"},
                  {Variant::NoAsd, "+PDA"},
                  {Variant::Full, "+PDA+ASD"}};

  // held-out depth targets: the eval split, capped at 16 sequences
  LoadedCorpus corpus = load_corpus(data_dir);
  std::vector<const Clip*> held;
  for (const auto& clip : corpus.eval) {
    held.push_back(&clip);
    if (held.size() == 16) break;
  }
  if (held.size() < 2) fail(ErrorCode::InsufficientData, "cmd_ablate: eval split too small");

  AblateResult result;
  result.total_seeds = static_cast<int>(seeds.size());
  for (std::uint64_t seed : seeds) {
    double frechet_by_variant[3] = {0, 0, 0};
    for (int vi = 0; vi < 3; ++vi) {
      Config cfg = config;
      cfg.seed = seed;
      cfg.variant = variants[vi].variant;
      const std::string tag =
          std::string(to_string(cfg.variant)) + "_s" + std::to_string(seed);
      const std::string warm_ckpt = work_dir + "/" + tag + ".warmup.dpck";
      const std::string inj_ckpt = work_dir + "/" + tag + ".injection.dpck";
      if (log) (*log) << "[ablate] training " << tag << "\n" << std::flush;
      cmd_train(cfg, Stage::Warmup, data_dir, "", warm_ckpt, nullptr);
      cmd_train(cfg, Stage::Injection, data_dir, warm_ckpt, inj_ckpt, nullptr);

      const bool use_pda = cfg.variant == Variant::Full || cfg.variant == Variant::NoAsd;
      const std::string sample_dir = work_dir + "/" + tag + ".samples";
      fs::create_directories(sample_dir, ec);
      const std::string depth_dir = work_dir + "/held_depths";
      if (!fs::exists(depth_dir)) {
        fs::create_directories(depth_dir, ec);
        for (std::size_t i = 0; i < held.size(); ++i) {
          char name[64];
          std::snprintf(name, sizeof(name), "target_%05zu.depth.dpt", i);
          write_dpt(depth_dir + "/" + name, held[i]->depth);
        }
      }
      // one sample per held-out depth; unconditional variants reuse the seeds
      for (std::size_t i = 0; i < held.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%05zu", i);
        const std::string one_dir = sample_dir + "/" + name;
        char depth_name[64];
        std::snprintf(depth_name, sizeof(depth_name), "target_%05zu.depth.dpt", i);
        cmd_sample(cfg, inj_ckpt,
                   use_pda ? depth_dir + "/" + std::string(depth_name) : std::string{}, 1,
                   seed * 1000 + i, one_dir);
        fs::rename(one_dir + "/sample_00000.video.dpt",
                   sample_dir + "/" + std::string(name) + ".video.dpt");
        fs::remove_all(one_dir, ec);
      }
      EvalReport ev = cmd_eval(data_dir, sample_dir, depth_dir, "", 1234, "eval");
      AblateRow row;
      row.variant = variants[vi].label;
      row.seed = seed;
      row.frechet = ev.frechet;
      row.depth_fidelity_mean = ev.depth_fidelity_mean.value_or(0.0);
      frechet_by_variant[vi] = ev.frechet;
      result.rows.push_back(row);
      if (log) {
        (*log) << "[ablate] " << tag << " frechet=" << row.frechet
               << " fidelity=" << row.depth_fidelity_mean << "\n"
               << std::flush;
      }
    }
    if (frechet_by_variant[2] <= frechet_by_variant[1] &&
        frechet_by_variant[1] <= frechet_by_variant[0]) {
      ++result.ordered_seeds;
    }
  }

  if (!out_path.empty()) {
    json j;
    j["variants"] = json::array({"baseline", "+PDA", "+PDA+ASD"});
    json jseeds = json::array();
    for (auto s : seeds) jseeds.push_back(s);
    j["seeds"] = jseeds;
    json rows = json::array();
    for (const auto& r : result.rows) {
      rows.push_back(json{{"variant", r.variant},
                          {"seed", r.seed},
                          {"frechet", r.frechet},
                          {"depth_fidelity_mean", r.depth_fidelity_mean}});
    }
    j["rows"] = rows;
    j["ordering"] = json{{"satisfied_seeds", result.ordered_seeds},
                         {"total_seeds", result.total_seeds}};
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) fail(ErrorCode::IoError, "cannot open for write: " + out_path);
    os << j.dump(2) << "\n";
  }
  return result;
}

}  // namespace splinediff
