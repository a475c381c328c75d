#include "splinediff/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "splinediff/tensor_io.hpp"

namespace splinediff {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'D', 'P', 'C', 'K'};

json dims_to_json(const ModelDims& d) {
  return json{{"frames", d.frames},
              {"height", d.height},
              {"width", d.width},
              {"channels", d.channels},
              {"blocks", d.blocks},
              {"patch", d.patch},
              {"time_dim", d.time_dim},
              {"style_dim", d.style_dim},
              {"depth_mid", d.depth_mid},
              {"style_mid", d.style_mid},
              {"grid_intervals", d.grid_intervals},
              {"spline_order", d.spline_order},
              {"spline_lo", d.spline_lo},
              {"spline_hi", d.spline_hi},
              {"use_asd", d.use_asd},
              {"use_pda", d.use_pda}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.frames = j.at("frames");
  d.height = j.at("height");
  d.width = j.at("width");
  d.channels = j.at("channels");
  d.blocks = j.at("blocks");
  d.patch = j.at("patch");
  d.time_dim = j.at("time_dim");
  d.style_dim = j.at("style_dim");
  d.depth_mid = j.at("depth_mid");
  d.style_mid = j.at("style_mid");
  d.grid_intervals = j.at("grid_intervals");
  d.spline_order = j.at("spline_order");
  d.spline_lo = j.at("spline_lo");
  d.spline_hi = j.at("spline_hi");
  d.use_asd = j.at("use_asd");
  d.use_pda = j.at("use_pda");
  return d;
}

std::string dpt_blob(const float* data, const std::vector<std::size_t>& shape,
                     std::size_t size) {
  std::ostringstream os(std::ios::binary);
  TensorF t(shape, std::vector<float>(data, data + size));
  write_dpt(os, t);
  return os.str();
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    unsigned char b = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) fail(ErrorCode::FormatError, "DPCK: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) fail(ErrorCode::FormatError, "DPCK: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

struct ParsedHeader {
  json header;
  std::uint64_t payload_base = 0;
};

ParsedHeader read_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::FormatError, "DPCK: bad magic");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch,
         "DPCK: checkpoint version " + std::to_string(version) + ", expected " +
             std::to_string(kCheckpointVersion));
  }
  const std::uint64_t hlen = get_u64(is);
  std::string text(hlen, '\0');
  is.read(text.data(), static_cast<std::streamsize>(hlen));
  if (!is) fail(ErrorCode::FormatError, "DPCK: truncated header");
  ParsedHeader out;
  out.header = json::parse(text, nullptr, false);
  if (out.header.is_discarded()) fail(ErrorCode::FormatError, "DPCK: malformed header JSON");
  out.payload_base = 4 + 4 + 8 + hlen;
  return out;
}

CheckpointMeta meta_from_header(const json& h) {
  CheckpointMeta meta;
  meta.stage = stage_from_string(h.at("stage").get<std::string>());
  meta.step = h.at("step").get<std::int64_t>();
  meta.stage_step = h.at("stage_step").get<std::int64_t>();
  meta.config_hash = h.at("config_hash").get<std::string>();
  meta.variant = h.at("variant").get<std::string>();
  meta.dims = dims_from_json(h.at("dims"));
  for (const auto& entry : h.at("tensors")) {
    if (entry.at("name").get<std::string>().rfind("ema.", 0) == 0) {
      meta.has_ema = true;
      break;
    }
  }
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const Denoiser<float>& model,
                     const TrainState& state, const LatentCodec& codec,
                     const std::string& config_hash, const std::string& variant) {
  const auto& params = model.params();
  json tensors = json::array();
  std::string payload;
  auto append = [&](const std::string& name, const float* data,
                    const std::vector<std::size_t>& shape, std::size_t size) {
    const std::string blob = dpt_blob(data, shape, size);
    tensors.push_back(json{{"name", name}, {"offset", payload.size()}, {"bytes", blob.size()}});
    payload += blob;
  };
  for (const auto& p : params) append(p.name, p.value, p.shape, p.size);
  for (std::size_t i = 0; i < params.size(); ++i) {
    append("optim.m." + params[i].name, state.m[i].data(), params[i].shape, params[i].size);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    append("optim.v." + params[i].name, state.v[i].data(), params[i].shape, params[i].size);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.ema_covered[i]) continue;
    append("ema." + params[i].name, state.ema[i].data(), params[i].shape, params[i].size);
  }
  if (!codec.empty()) {
    append("codec.mean", codec.mean().data(), codec.mean().shape(), codec.mean().numel());
    append("codec.scale", codec.scale().data(), codec.scale().shape(), codec.scale().numel());
  }

  json header;
  header["stage"] = to_string(state.stage);
  header["step"] = state.step;
  header["stage_step"] = state.stage_step;
  header["config_hash"] = config_hash;
  header["variant"] = variant;
  header["rng_seed"] = std::to_string(state.rng.seed());
  header["rng_counter"] = std::to_string(state.rng.counter());
  header["eval_losses"] = state.eval_losses;
  header["dims"] = dims_to_json(model.dims());
  header["tensors"] = tensors;
  const std::string htext = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open for write: " + path);
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u64(os, htext.size());
  os.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  os.flush();
  if (!os) fail(ErrorCode::IoError, "write failed: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, Denoiser<float>& model,
                               TrainState& state, LatentCodec& codec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open: " + path);
  ParsedHeader parsed = read_header(is);
  const json& h = parsed.header;
  CheckpointMeta meta = meta_from_header(h);

  const ModelDims& d = model.dims();
  const ModelDims& cd = meta.dims;
  if (cd.frames != d.frames || cd.height != d.height || cd.width != d.width ||
      cd.channels != d.channels || cd.blocks != d.blocks || cd.use_asd != d.use_asd ||
      cd.use_pda != d.use_pda || cd.grid_intervals != d.grid_intervals ||
      cd.spline_order != d.spline_order) {
    fail(ErrorCode::InvalidState, "checkpoint model dimensions do not match this config");
  }

  std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>> directory;
  for (const auto& entry : h.at("tensors")) {
    directory[entry.at("name").get<std::string>()] = {entry.at("offset").get<std::uint64_t>(),
                                                      entry.at("bytes").get<std::uint64_t>()};
  }
  auto read_tensor = [&](const std::string& name) -> TensorF {
    auto it = directory.find(name);
    if (it == directory.end()) fail(ErrorCode::FormatError, "DPCK: missing tensor " + name);
    is.clear();
    is.seekg(static_cast<std::streamoff>(parsed.payload_base + it->second.first));
    return read_dpt(is);
  };

  const auto& params = model.params();
  state.m.resize(params.size());
  state.v.resize(params.size());
  state.ema.resize(params.size());
  state.ema_covered.assign(params.size(), 0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorF value = read_tensor(params[i].name);
    if (value.numel() != params[i].size) {
      fail(ErrorCode::FormatError, "DPCK: size mismatch for " + params[i].name);
    }
    std::copy(value.data(), value.data() + value.numel(), params[i].value);
    TensorF m = read_tensor("optim.m." + params[i].name);
    TensorF v = read_tensor("optim.v." + params[i].name);
    state.m[i].assign(m.data(), m.data() + m.numel());
    state.v[i].assign(v.data(), v.data() + v.numel());
    if (directory.count("ema." + params[i].name)) {
      TensorF e = read_tensor("ema." + params[i].name);
      state.ema[i].assign(e.data(), e.data() + e.numel());
      state.ema_covered[i] = 1;
    } else {
      state.ema[i].assign(params[i].value, params[i].value + params[i].size);
    }
  }
  if (directory.count("codec.mean")) {
    codec = LatentCodec(read_tensor("codec.mean"), read_tensor("codec.scale"));
  }
  state.stage = meta.stage;
  state.step = meta.step;
  state.stage_step = meta.stage_step;
  state.rng = Rng(std::stoull(h.at("rng_seed").get<std::string>()),
                  std::stoull(h.at("rng_counter").get<std::string>()));
  state.eval_losses = h.at("eval_losses").get<std::vector<double>>();
  state.trainable.assign(params.size(), 0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.trainable[i] = trainable_in_stage(params[i].name, state.stage) ? 1 : 0;
  }
  return meta;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open: " + path);
  return meta_from_header(read_header(is).header);
}

}  // namespace splinediff
