#include "splinediff/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace splinediff {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) fail(ErrorCode::FormatError, "DPT1: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_dpt(std::ostream& os, const TensorF& t) {
  os.write(kMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
  static_assert(std::endian::native == std::endian::little,
                "f32 payload is written as native little-endian words");
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!os) fail(ErrorCode::IoError, "DPT1: write failed");
}

void write_dpt(const std::string& path, const TensorF& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open for write: " + path);
  write_dpt(os, t);
  os.flush();
  if (!os) fail(ErrorCode::IoError, "write failed: " + path);
}

TensorF read_dpt(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::FormatError, "DPT1: bad magic");
  }
  std::uint32_t ndim = get_u32(is);
  if (ndim > 8) fail(ErrorCode::FormatError, "DPT1: implausible ndim " + std::to_string(ndim));
  std::vector<std::size_t> shape(ndim);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(is);
    numel *= shape[i];
    if (numel > (1u << 30)) fail(ErrorCode::FormatError, "DPT1: implausible extent");
  }
  std::vector<float> data(numel);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(numel * sizeof(float)));
  if (!is) fail(ErrorCode::FormatError, "DPT1: truncated payload");
  TensorF t(std::move(shape), std::move(data));
  if (!t.all_finite()) fail(ErrorCode::FormatError, "DPT1: non-finite payload");
  return t;
}

TensorF read_dpt(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open: " + path);
  return read_dpt(is);
}

}  // namespace splinediff
