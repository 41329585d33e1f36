#include "sasnet/sar.hpp"

#include <algorithm>
#include <regex>
#include <string>

#include "sasnet/vvol_io.hpp"

namespace sasnet {

void ConfidenceCache::push(int sample_id, Branch branch, int epoch, ConfidenceMap<double> map) {
  auto& ring = entries_[{sample_id, branch}];
  if (!ring.empty() && epoch <= ring.back().epoch) {
    fail(ErrorKind::contract, "confidence cache epochs must increase: got " + std::to_string(epoch) +
                                  " after " + std::to_string(ring.back().epoch));
  }
  ring.push_back({epoch, std::move(map)});
  while (ring.size() > kDepth) ring.pop_front();
}

std::vector<const ConfidenceCache::Entry*> ConfidenceCache::recent(int sample_id, Branch branch) const {
  std::vector<const Entry*> out;
  const auto it = entries_.find({sample_id, branch});
  if (it == entries_.end()) return out;
  for (auto e = it->second.rbegin(); e != it->second.rend(); ++e) out.push_back(&*e);
  return out;
}

ConfidenceMap<double> ConfidenceCache::history(int sample_id, Branch branch, std::size_t i, Dims dims) const {
  const auto entries = recent(sample_id, branch);
  if (i < entries.size()) {
    require_same_dims(entries[i]->map.dims(), dims, "confidence history");
    return entries[i]->map;
  }
  return ConfidenceMap<double>::zeros(dims);
}

std::size_t ConfidenceCache::size(int sample_id, Branch branch) const {
  const auto it = entries_.find({sample_id, branch});
  return it == entries_.end() ? 0 : it->second.size();
}

std::vector<int> ConfidenceCache::sample_ids() const {
  std::vector<int> ids;
  for (const auto& [key, ring] : entries_)
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  return ids;
}

void ConfidenceCache::spill(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, ring] : entries_)
    for (const auto& e : ring) {
      const auto name = std::to_string(key.first) + "_" + to_string(key.second) + "_" + std::to_string(e.epoch) + ".vvol";
      save_vvol(e.map.volume().cast<float>(), dir / name);
    }
}

ConfidenceCache ConfidenceCache::load(const std::filesystem::path& dir) {
  struct Found {
    int id;
    Branch branch;
    int epoch;
    std::filesystem::path path;
  };
  static const std::regex pattern(R"((\d+)_(low|high)_(\d+)\.vvol)");
  std::vector<Found> found;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = f.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    found.push_back({std::stoi(m[1]), m[2] == "low" ? Branch::low : Branch::high, std::stoi(m[3]), f.path()});
  }
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    return std::tie(a.id, a.branch, a.epoch) < std::tie(b.id, b.branch, b.epoch);
  });
  ConfidenceCache cache;
  for (const auto& f : found) {
    cache.push(f.id, f.branch, f.epoch, ConfidenceMap<double>(load_vvol(f.path).cast<double>()));
  }
  return cache;
}

namespace {

ConfidenceMap<double> to_view(const ConfidenceMap<double>& canonical, const ViewSpec& view) {
  return ConfidenceMap<double>(rotate_spatial(canonical.volume(), view));
}

ConfidenceMap<double> to_canonical(const ConfidenceMap<double>& in_view, const ViewSpec& view) {
  return ConfidenceMap<double>(rotate_spatial(in_view.volume(), view.inverse()));
}

}  // namespace

ProbVolume<double> sar_step_labeled(const ProbVolume<double>& p_low, const ProbVolume<double>& p_high,
                                    const BinaryMask& gt, ConfidenceCache& cache, int sample_id, int epoch,
                                    const SarConfig& cfg, const ViewSpec& view) {
  cfg.validate();
  const Dims dims = p_low.dims();
  require_same_dims(dims, p_high.dims(), "sar_step_labeled");
  require_same_dims(dims, gt.dims(), "sar_step_labeled");

  auto hist = [&](Branch b, std::size_t i) { return to_view(cache.history(sample_id, b, i, dims), view); };
  const Branch high_source = cfg.literal_high_weighting ? Branch::low : Branch::high;
  const auto w_low = reweight(p_low, hist(Branch::low, 0), hist(Branch::low, 1), cfg.alpha);
  const auto w_high = reweight(p_high, hist(high_source, 0), hist(high_source, 1), cfg.alpha);
  ProbVolume<double> fused = ensemble(w_low, w_high);

  cache.push(sample_id, Branch::low, epoch, to_canonical(confidence_map(p_low, gt), view));
  cache.push(sample_id, Branch::high, epoch, to_canonical(confidence_map(p_high, gt), view));
  return fused;
}

}  // namespace sasnet
