#pragma once

#include <filesystem>

#include "json.hpp"
#include "sasnet/network.hpp"

namespace sasnet {

/// `.ckpt` layout: "VCKPT001", u64 little-endian header length, JSON header
/// {net config, epoch, parameter names and shapes, extra}, then every
/// parameter as little-endian f32 in header order.
inline constexpr char kCkptMagic[8] = {'V', 'C', 'K', 'P', 'T', '0', '0', '1'};

nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

template <typename Scalar>
void save_checkpoint(const DualBranchNet<Scalar>& net, int epoch, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  DualBranchNet<float> net;
  int epoch = 0;
  nlohmann::json extra;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sasnet
