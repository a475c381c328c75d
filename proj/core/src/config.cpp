#include "splinediff/config.hpp"

#include <fstream>

#include "json.hpp"
#include "splinediff/diffusion.hpp"

namespace splinediff {

namespace {
using nlohmann::json;
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoAsd: return "no-asd";
    case Variant::NoPda: return "no-pda";
    case Variant::Baseline: return "baseline";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no-asd") return Variant::NoAsd;
  if (s == "no-pda") return Variant::NoPda;
  if (s == "baseline") return Variant::Baseline;
  fail(ErrorCode::InvalidParams, "unknown ablation variant '" + s + "'");
}

ModelDims Config::model_dims() const {
  ModelDims d;
  d.frames = clip.frames;
  d.height = clip.height;
  d.width = clip.width;
  d.channels = model.channels;
  d.blocks = model.blocks;
  d.style_dim = model.style_dim;
  d.time_dim = model.time_dim;
  d.grid_intervals = spline.grid_intervals;
  d.spline_order = spline.order;
  d.spline_lo = spline.lo;
  d.spline_hi = spline.hi;
  d.use_asd = variant == Variant::Full || variant == Variant::NoPda;
  d.use_pda = variant == Variant::Full || variant == Variant::NoAsd;
  return d;
}

namespace {

json to_json(const Config& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["data_dir"] = c.data_dir;
  j["clip"] = {{"frames", c.clip.frames}, {"height", c.clip.height}, {"width", c.clip.width}};
  j["diffusion"] = {{"steps", c.diffusion.steps},
                    {"beta_lo", c.diffusion.beta_lo},
                    {"beta_hi", c.diffusion.beta_hi}};
  j["spline"] = {{"grid_intervals", c.spline.grid_intervals},
                 {"order", c.spline.order},
                 {"lo", c.spline.lo},
                 {"hi", c.spline.hi}};
  j["model"] = {{"channels", c.model.channels},
                {"blocks", c.model.blocks},
                {"style_dim", c.model.style_dim},
                {"time_dim", c.model.time_dim}};
  j["optim"] = {{"lr", c.optim.lr},
                {"weight_decay", c.optim.weight_decay},
                {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"eps", c.optim.eps},
                {"ema_decay", c.optim.ema_decay}};
  j["train"] = {{"warmup_steps", c.train.warmup_steps},
                {"injection_steps", c.train.injection_steps},
                {"eval_cadence", c.train.eval_cadence},
                {"checkpoint_cadence", c.train.checkpoint_cadence},
                {"batch", c.train.batch},
                {"early_stop_patience", c.train.early_stop_patience},
                {"early_stop_min_improve", c.train.early_stop_min_improve},
                {"smooth_window", c.train.smooth_window}};
  j["variant"] = to_string(c.variant);
  return j;
}

Config from_json(const json& j) {
  Config c;
  c.schema_version = j.at("schema_version");
  if (c.schema_version != 1) {
    fail(ErrorCode::VersionMismatch, "config: unsupported schema_version");
  }
  c.seed = j.at("seed");
  c.data_dir = j.value("data_dir", std::string{});
  const json& clip = j.at("clip");
  c.clip.frames = clip.at("frames");
  c.clip.height = clip.at("height");
  c.clip.width = clip.at("width");
  const json& diff = j.at("diffusion");
  c.diffusion.steps = diff.at("steps");
  c.diffusion.beta_lo = diff.at("beta_lo");
  c.diffusion.beta_hi = diff.at("beta_hi");
  const json& spline = j.at("spline");
  c.spline.grid_intervals = spline.at("grid_intervals");
  c.spline.order = spline.at("order");
  c.spline.lo = spline.at("lo");
  c.spline.hi = spline.at("hi");
  const json& model = j.at("model");
  c.model.channels = model.at("channels");
  c.model.blocks = model.at("blocks");
  c.model.style_dim = model.at("style_dim");
  c.model.time_dim = model.at("time_dim");
  const json& optim = j.at("optim");
  c.optim.lr = optim.at("lr");
  c.optim.weight_decay = optim.at("weight_decay");
  c.optim.beta1 = optim.at("beta1");
  c.optim.beta2 = optim.at("beta2");
  c.optim.eps = optim.at("eps");
  c.optim.ema_decay = optim.at("ema_decay");
  const json& train = j.at("train");
  c.train.warmup_steps = train.at("warmup_steps");
  c.train.injection_steps = train.at("injection_steps");
  c.train.eval_cadence = train.at("eval_cadence");
  c.train.checkpoint_cadence = train.at("checkpoint_cadence");
  c.train.batch = train.at("batch");
  c.train.early_stop_patience = train.at("early_stop_patience");
  c.train.early_stop_min_improve = train.at("early_stop_min_improve");
  c.train.smooth_window = train.at("smooth_window");
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  return c;
}

}  // namespace

std::string Config::canonical_json() const { return to_json(*this).dump(); }

std::string Config::hash() const {
  const std::string text = canonical_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Config config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::FormatError, "config: malformed JSON");
  return from_json(j);
}

std::string config_to_json_text(const Config& config) { return to_json(config).dump(2) + "\n"; }

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

void save_config(const std::string& path, const Config& config) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open for write: " + path);
  os << config_to_json_text(config);
  if (!os) fail(ErrorCode::IoError, "write failed: " + path);
}

void validate_config(const Config& c) {
  if (c.clip.frames < 2 || c.clip.height < 4 || c.clip.width < 4) {
    fail(ErrorCode::InvalidParams, "config: clip geometry too small");
  }
  const ModelDims d = c.model_dims();
  if (c.clip.height % d.patch != 0 || c.clip.width % d.patch != 0) {
    fail(ErrorCode::InvalidParams, "config: clip extent must be divisible by the patch size");
  }
  NoiseSchedule sched = make_schedule(c.diffusion.steps, c.diffusion.beta_lo, c.diffusion.beta_hi);
  if (sched.weak) {
    fail(ErrorCode::InvalidSchedule,
         "config: schedule too weak, alpha_bar_T >= 0.01 (final-step corruption incomplete)");
  }
  if (!(c.spline.lo < c.spline.hi) || c.spline.grid_intervals < 1 || c.spline.order < 1) {
    fail(ErrorCode::InvalidParams, "config: bad spline grid");
  }
  if (c.train.batch < 1) fail(ErrorCode::InvalidParams, "config: batch must be >= 1");
  if (c.model.time_dim % 2 != 0) {
    fail(ErrorCode::InvalidParams, "config: time_dim must be even");
  }
}

}  // namespace splinediff
