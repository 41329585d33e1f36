#include "sasnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "sasnet/vvol_io.hpp"

namespace sasnet {

bool Dataset::is_labeled(int id) const {
  return std::binary_search(labeled_ids.begin(), labeled_ids.end(), id);
}

BinaryMask rasterize(Dims dims, const std::vector<Ellipsoid>& shapes) {
  BinaryMask::Array data = BinaryMask::Array::Zero(dims.count());
  for (Index z = 0; z < dims.depth; ++z)
    for (Index y = 0; y < dims.height; ++y)
      for (Index x = 0; x < dims.width; ++x)
        for (const auto& e : shapes)
          if (e.contains(double(z), double(y), double(x))) {
            data[dims.index(z, y, x)] = 1;
            break;
          }
  return BinaryMask(dims, std::move(data));
}

namespace {

Sample make_sample(int id, Dims dims, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  std::mt19937_64 rng(seq);

  Sample s;
  s.id = id;
  const int n_shapes = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int k = 0; k < n_shapes; ++k) {
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
      const double extent = double(dims[a]);
      const double r_max = extent / 4.0;
      const double r_min = std::min(r_max, std::max(2.0, extent / 8.0));
      e.radii[a] = std::uniform_real_distribution<double>(r_min, r_max)(rng);
      // one voxel of margin keeps shapes clear of the array faces
      const double lo = e.radii[a] + 1.0;
      const double hi = std::max(lo, extent - 2.0 - e.radii[a]);
      e.center[a] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    s.shapes.push_back(e);
  }
  s.label = rasterize(dims, s.shapes);

  std::normal_distribution<double> noise(0.0, kIntensityNoise);
  Volume3::Array img(dims.count());
  for (Index i = 0; i < dims.count(); ++i) {
    const double mean = s.label[i] ? kForegroundMean : kBackgroundMean;
    img[i] = static_cast<float>(mean + noise(rng));
  }
  s.image = Volume3(dims, std::move(img));
  return s;
}

}  // namespace

Dataset synth_dataset(int n, Dims dims, double labeled_ratio, std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::configuration, "synth_dataset needs n >= 2");
  if (dims.depth < 8 || dims.height < 8 || dims.width < 8) {
    fail(ErrorKind::configuration, "synth_dataset dims must each be >= 8, got " + dims.str());
  }
  if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) {
    fail(ErrorKind::configuration, "labeled ratio must lie in (0, 1]");
  }
  const auto n_labeled = static_cast<int>(std::lround(labeled_ratio * n));
  if (n_labeled < 1) {
    fail(ErrorKind::configuration, "labeled ratio " + std::to_string(labeled_ratio) + " with n=" +
                                       std::to_string(n) + " yields no labeled samples");
  }

  Dataset ds;
  ds.seed = seed;
  for (int id = 0; id < n; ++id) ds.samples.push_back(make_sample(id, dims, seed));

  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ds.labeled_ids.assign(ids.begin(), ids.begin() + n_labeled);
  std::sort(ds.labeled_ids.begin(), ds.labeled_ids.end());
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["seed"] = ds.seed;
  manifest["labeled_ids"] = ds.labeled_ids;
  manifest["samples"] = nlohmann::json::array();
  for (const auto& s : ds.samples) {
    const std::string image = "sample_" + std::to_string(s.id) + "_image.vvol";
    const std::string label = "sample_" + std::to_string(s.id) + "_label.vvol";
    save_vvol(s.image, dir / image);
    save_mask(s.label, dir / label);
    manifest["samples"].push_back({{"id", s.id}, {"image", image}, {"label", label}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.labeled_ids = manifest.at("labeled_ids").get<std::vector<int>>();
    for (const auto& entry : manifest.at("samples")) {
      Sample s;
      s.id = entry.at("id").get<int>();
      auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : dir / fp;
      };
      s.image = load_vvol(resolve(entry.at("image").get<std::string>()));
      s.label = load_mask(resolve(entry.at("label").get<std::string>()));
      require_same_dims(s.image.dims(), s.label.dims(), "sample image/label");
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }

  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].id != static_cast<int>(i)) {
      fail(ErrorKind::validation, "sample ids must be unique and contiguous from 0");
    }
  }
  std::sort(ds.labeled_ids.begin(), ds.labeled_ids.end());
  for (int id : ds.labeled_ids) {
    if (id < 0 || id >= static_cast<int>(ds.samples.size())) {
      fail(ErrorKind::validation, "labeled id " + std::to_string(id) + " is not a sample id");
    }
  }
  return ds;
}

}  // namespace sasnet
