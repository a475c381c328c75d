#include "splinediff/training.hpp"

#include <cmath>
#include <sstream>

namespace splinediff {

namespace {

std::vector<std::uint8_t> stage_mask(const Denoiser<float>& model, Stage stage) {
  std::vector<std::uint8_t> mask;
  mask.reserve(model.params().size());
  for (const auto& p : model.params()) {
    mask.push_back(trainable_in_stage(p.name, stage) ? 1 : 0);
  }
  return mask;
}

}  // namespace

TrainState init_train_state(const Denoiser<float>& model, std::uint64_t seed, Stage stage) {
  TrainState st;
  st.stage = stage;
  st.rng = Rng(seed).fork(0x7261494E);  // training stream, distinct from init streams
  const auto& params = model.params();
  st.m.resize(params.size());
  st.v.resize(params.size());
  st.ema.resize(params.size());
  st.ema_covered.assign(params.size(), 0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i].assign(params[i].size, 0.0f);
    st.v[i].assign(params[i].size, 0.0f);
    st.ema[i].assign(params[i].value, params[i].value + params[i].size);
  }
  st.trainable = stage_mask(model, stage);
  for (std::size_t i = 0; i < params.size(); ++i) st.ema_covered[i] = st.trainable[i];
  return st;
}

void begin_injection(const Denoiser<float>& model, TrainState& state) {
  if (state.stage == Stage::Injection) {
    fail(ErrorCode::InvalidStage, "begin_injection: already in injection stage");
  }
  state.stage = Stage::Injection;
  state.stage_step = 0;
  state.trainable = stage_mask(model, Stage::Injection);
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.trainable[i] && !state.ema_covered[i]) {
      state.ema[i].assign(params[i].value, params[i].value + params[i].size);
      state.ema_covered[i] = 1;
    }
  }
}

double train_step(Denoiser<float>& model, TrainState& state, const TrainingData& data,
                  std::span<const std::size_t> batch, const NoiseSchedule& sched,
                  const OptimConfig& optim) {
  if (batch.empty()) fail(ErrorCode::InvalidParams, "train_step: empty batch");
  model.zero_grads();
  const bool conditional = state.stage == Stage::Injection && model.dims().use_pda;
  double total_loss = 0.0;
  DenoiserTrace<float> trace;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const TrainClip& clip = data.train[batch[bi]];
    const int t = 1 + static_cast<int>(state.rng.uniform_int(
                          static_cast<std::uint64_t>(sched.steps)));
    TensorF zt, eps;
    forward_marginal(sched, clip.z0, t, state.rng, zt, eps);
    ConditionBundle<float> cond;
    DepthEncoderCache<float> dcache;
    StyleEncoderCache<float> scache;
    if (conditional) {
      cond = model.make_condition(clip.depth, clip.first_frame, dcache, scache);
    }
    TensorF pred = model.predict_noise(zt, cond, t, trace);
    total_loss += training_loss(eps, pred);
    // d(mean-over-batch MSE)/d pred
    TensorF d_pred(pred.shape());
    const double scale = 2.0 / (static_cast<double>(pred.numel()) *
                                static_cast<double>(batch.size()));
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      d_pred[i] = static_cast<float>(scale * (static_cast<double>(pred[i]) -
                                              static_cast<double>(eps[i])));
    }
    CondGrads<float> cg = model.backward(trace, d_pred);
    if (cg.valid) {
      model.depth_encoder().backward(dcache, cg.d_depth_embedding);
      model.style_encoder().backward(scache, cg.d_style);
    }
  }
  const double loss = total_loss / static_cast<double>(batch.size());
  if (!std::isfinite(loss)) {
    fail(ErrorCode::Divergence,
         "train_step: non-finite loss at step " + std::to_string(state.step));
  }

  // AdamW on the trainable set; frozen parameters are never touched.
  const auto& params = model.params();
  const double t_corr = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(optim.beta1, t_corr);
  const double bc2 = 1.0 - std::pow(optim.beta2, t_corr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.trainable[i]) continue;
    float* value = params[i].value;
    const float* grad = params[i].grad;
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    for (std::size_t k = 0; k < params[i].size; ++k) {
      const double g = static_cast<double>(grad[k]);
      const double mk = optim.beta1 * static_cast<double>(m[k]) + (1.0 - optim.beta1) * g;
      const double vk = optim.beta2 * static_cast<double>(v[k]) + (1.0 - optim.beta2) * g * g;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = (mk / bc1) / (std::sqrt(vk / bc2) + optim.eps) +
                            optim.weight_decay * static_cast<double>(value[k]);
      value[k] = static_cast<float>(static_cast<double>(value[k]) - optim.lr * update);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.ema_covered[i]) continue;
    const float* value = params[i].value;
    float* ema = state.ema[i].data();
    for (std::size_t k = 0; k < params[i].size; ++k) {
      ema[k] = static_cast<float>(optim.ema_decay * static_cast<double>(ema[k]) +
                                  (1.0 - optim.ema_decay) * static_cast<double>(value[k]));
    }
  }
  ++state.step;
  ++state.stage_step;
  return loss;
}

double eval_loss(Denoiser<float>& model, const TrainState& state, const TrainingData& data,
                 const NoiseSchedule& sched, std::uint64_t eval_seed, int draws) {
  if (data.eval.empty()) fail(ErrorCode::InsufficientData, "eval_loss: no eval clips");
  const bool conditional = state.stage == Stage::Injection && model.dims().use_pda;
  const Rng base = Rng(eval_seed).fork(0xE7A1);
  double total = 0.0;
  std::size_t count = 0;
  DenoiserTrace<float> trace;
  for (std::size_t ci = 0; ci < data.eval.size(); ++ci) {
    const TrainClip& clip = data.eval[ci];
    ConditionBundle<float> cond;
    DepthEncoderCache<float> dcache;
    StyleEncoderCache<float> scache;
    if (conditional) {
      cond = model.make_condition(clip.depth, clip.first_frame, dcache, scache);
    }
    for (int k = 0; k < draws; ++k) {
      Rng r = base.fork(ci * 64 + static_cast<std::size_t>(k));
      const int t =
          1 + static_cast<int>(r.uniform_int(static_cast<std::uint64_t>(sched.steps)));
      TensorF zt, eps;
      forward_marginal(sched, clip.z0, t, r, zt, eps);
      TensorF pred = model.predict_noise(zt, cond, t, trace);
      total += training_loss(eps, pred);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> smooth_losses(std::span<const double> raw, int window) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), i + 1);
    double acc = 0.0;
    for (std::size_t k = i + 1 - w; k <= i; ++k) acc += raw[k];
    out[i] = acc / static_cast<double>(w);
  }
  return out;
}

bool early_stop_check(std::span<const double> smoothed, int patience,
                      double min_rel_improve) {
  if (smoothed.size() < 2) return false;
  double best = std::numeric_limits<double>::infinity();
  int run = 0;  // trailing evaluations without a >min_rel_improve improvement
  for (double loss : smoothed) {
    const bool improving =
        std::isfinite(best) && loss < best * (1.0 - min_rel_improve);
    run = improving ? 0 : run + 1;
    best = std::min(best, loss);
  }
  return run >= patience;
}

StageResult run_stage(Denoiser<float>& model, TrainState& state, const TrainingData& data,
                      const NoiseSchedule& sched, const OptimConfig& optim,
                      const StageRunConfig& run, const StageCallbacks& callbacks) {
  if (data.train.empty()) fail(ErrorCode::InsufficientData, "run_stage: no training clips");
  StageResult result;
  std::vector<std::size_t> batch(static_cast<std::size_t>(run.batch));
  while (state.stage_step < run.target_stage_steps) {
    for (auto& idx : batch) {
      idx = static_cast<std::size_t>(state.rng.uniform_int(data.train.size()));
    }
    const double loss = train_step(model, state, data, batch, sched, optim);
    if (std::isnan(result.first_loss)) result.first_loss = loss;
    result.final_loss = loss;
    const bool eval_now = run.eval_cadence > 0 && state.stage_step % run.eval_cadence == 0;
    double ev = 0.0;
    if (eval_now) {
      ev = eval_loss(model, state, data, sched, run.eval_seed, run.eval_draws);
      state.eval_losses.push_back(ev);
    }
    if (callbacks.on_metrics) {
      std::ostringstream line;
      line << "{\"step\":" << state.step << ",\"stage\":\"" << to_string(state.stage)
           << "\",\"loss\":" << loss;
      if (eval_now) line << ",\"eval_loss\":" << ev;
      line << "}";
      callbacks.on_metrics(line.str());
    }
    if (run.checkpoint_cadence > 0 && state.stage_step % run.checkpoint_cadence == 0 &&
        callbacks.on_checkpoint) {
      callbacks.on_checkpoint();
    }
    if (eval_now) {
      const auto smoothed = smooth_losses(state.eval_losses, run.smooth_window);
      if (early_stop_check(smoothed, run.early_stop_patience, run.early_stop_min_improve)) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

void load_ema_into(const Denoiser<float>& src, const TrainState& state, Denoiser<float>& dst) {
  bool any = false;
  for (std::uint8_t c : state.ema_covered) any |= (c != 0);
  if (!any) fail(ErrorCode::MissingState, "load_ema_into: no EMA shadow present");
  dst.copy_params_from(src);
  const auto& sp = src.params();
  const auto& dp = dst.params();
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (!state.ema_covered[i]) continue;
    for (std::size_t k = 0; k < dp[i].size; ++k) dp[i].value[k] = state.ema[i][k];
  }
}

}  // namespace splinediff
