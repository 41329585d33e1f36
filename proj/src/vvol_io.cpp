#include "sasnet/vvol_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace sasnet {
namespace {

static_assert(std::endian::native == std::endian::little, "vvol I/O assumes a little-endian host");

template <typename T>
void append(std::vector<char>& buf, T value) {
  const auto* bytes = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read_at(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

}  // namespace

void save_vvol(const Volume3& v, const std::filesystem::path& path) {
  std::vector<char> buf;
  buf.reserve(kVvolHeaderBytes + 4 * static_cast<std::size_t>(v.size()));
  buf.insert(buf.end(), std::begin(kVvolMagic), std::end(kVvolMagic));
  append<std::uint64_t>(buf, static_cast<std::uint64_t>(v.dims().depth));
  append<std::uint64_t>(buf, static_cast<std::uint64_t>(v.dims().height));
  append<std::uint64_t>(buf, static_cast<std::uint64_t>(v.dims().width));
  append<double>(buf, v.spacing().z);
  append<double>(buf, v.spacing().y);
  append<double>(buf, v.spacing().x);
  const auto* payload = reinterpret_cast<const char*>(v.data().data());
  buf.insert(buf.end(), payload, payload + 4 * v.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

Volume3 load_vvol(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 8 || std::memcmp(buf.data(), kVvolMagic, 8) != 0) {
    fail(ErrorKind::format, path.string() + ": bad magic, not a vvol file");
  }
  if (buf.size() < kVvolHeaderBytes) {
    fail(ErrorKind::length_mismatch, path.string() + ": truncated header");
  }
  const Dims dims{static_cast<Index>(read_at<std::uint64_t>(buf, 8)),
                  static_cast<Index>(read_at<std::uint64_t>(buf, 16)),
                  static_cast<Index>(read_at<std::uint64_t>(buf, 24))};
  const Spacing spacing{read_at<double>(buf, 32), read_at<double>(buf, 40), read_at<double>(buf, 48)};

  const std::size_t payload = buf.size() - kVvolHeaderBytes;
  if (dims.count() <= 0 || payload != 4 * static_cast<std::size_t>(dims.count())) {
    fail(ErrorKind::length_mismatch, path.string() + ": dims " + dims.str() + " need " +
                                         std::to_string(dims.count()) + " floats, payload holds " +
                                         std::to_string(payload / 4) + (payload % 4 ? "+" : ""));
  }
  Volume3::Array data(dims.count());
  std::memcpy(data.data(), buf.data() + kVvolHeaderBytes, payload);
  if (!data.allFinite()) fail(ErrorKind::validation, path.string() + ": non-finite payload value");
  return Volume3(dims, std::move(data), spacing);
}

void save_mask(const BinaryMask& m, const std::filesystem::path& path) {
  save_vvol(m.to_volume<float>(), path);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  return BinaryMask::from_volume(load_vvol(path));
}

}  // namespace sasnet
