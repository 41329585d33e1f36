#include "sasnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace sasnet {

nlohmann::json to_json(const NetConfig& cfg) {
  return {{"levels", cfg.levels},
          {"base_channels", cfg.base_channels},
          {"in_channels", cfg.in_channels},
          {"leaky_slope", cfg.leaky_slope},
          {"seed", cfg.seed}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig cfg;
  cfg.levels = j.at("levels").get<int>();
  cfg.base_channels = j.at("base_channels").get<int>();
  cfg.in_channels = j.value("in_channels", 1);
  cfg.leaky_slope = j.value("leaky_slope", 0.01);
  cfg.seed = j.value("seed", std::uint64_t{0});
  return cfg;
}

template <typename Scalar>
void save_checkpoint(const DualBranchNet<Scalar>& net, int epoch, const std::filesystem::path& path,
                     const nlohmann::json& extra) {
  nlohmann::json header;
  header["net"] = to_json(net.config());
  header["epoch"] = epoch;
  header["extra"] = extra;
  header["params"] = nlohmann::json::array();
  for (const auto& p : net.parameters()) {
    header["params"].push_back(
        {{"name", p.name}, {"shape", {p.shape.channels, p.shape.depth, p.shape.height, p.shape.width}}});
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(kCkptMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : net.parameters()) {
    const Eigen::ArrayXf v = p.value.template cast<float>();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(4 * v.size()));
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

template void save_checkpoint(const DualBranchNet<float>&, int, const std::filesystem::path&, const nlohmann::json&);
template void save_checkpoint(const DualBranchNet<double>&, int, const std::filesystem::path&, const nlohmann::json&);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kCkptMagic, 8) != 0) {
    fail(ErrorKind::format, path.string() + ": bad magic, not a checkpoint");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, buf.data() + 8, 8);
  if (buf.size() < 16 + len) fail(ErrorKind::length_mismatch, path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }

  LoadedCheckpoint ck{DualBranchNet<float>(net_config_from_json(header.at("net"))), header.value("epoch", 0),
                      header.value("extra", nlohmann::json::object())};
  auto& params = ck.net.parameters();
  const auto& listed = header.at("params");
  if (listed.size() != params.size()) {
    fail(ErrorKind::format, path.string() + ": parameter list does not match the network layout");
  }
  std::size_t offset = 16 + len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (listed[i].at("name").get<std::string>() != params[i].name) {
      fail(ErrorKind::format, path.string() + ": unexpected parameter " + listed[i].at("name").get<std::string>());
    }
    const std::size_t bytes = 4 * static_cast<std::size_t>(params[i].value.size());
    if (offset + bytes > buf.size()) fail(ErrorKind::length_mismatch, path.string() + ": truncated parameters");
    std::memcpy(params[i].value.data(), buf.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != buf.size()) fail(ErrorKind::length_mismatch, path.string() + ": trailing bytes after parameters");
  for (const auto& p : params)
    if (!p.value.allFinite()) fail(ErrorKind::validation, path.string() + ": non-finite parameter in " + p.name);
  return ck;
}

}  // namespace sasnet
