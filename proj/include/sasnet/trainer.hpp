#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sasnet/dataset.hpp"
#include "sasnet/fourier.hpp"
#include "sasnet/losses.hpp"
#include "sasnet/network.hpp"
#include "sasnet/sar.hpp"

namespace sasnet {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 4;
  double lr = 0.01;
  double alpha = 0.5;
  double beta = 0.5;
  RampConfig ramp;
  double sharpen_t = 0.1;
  double labeled_ratio = 0.2;  // recorded only; the dataset decides which ids are labeled
  std::uint64_t seed = 0;
  std::vector<ViewSpec> view_specs = default_view_specs();
  NetConfig net;

  /// Held-out samples, taken from the highest unlabeled ids. Negative means
  /// round(0.1 * n), at least 1 when unlabeled samples exist.
  int eval_count = -1;
  /// Evaluate every k epochs (always after the last one); 0 disables.
  int eval_every = 1;
  /// Checkpoint every k epochs in addition to the final one; 0 = final only.
  int checkpoint_every = 0;

  // objective switches for ablations
  bool use_plc = true;
  bool use_src = true;
  bool use_sar = true;
  std::optional<double> gamma_override;
  bool literal_high_weighting = false;
  /// Cross-supervise each branch against the sharpened ensemble instead of
  /// against the other branch.
  bool sharpened_plc_target = false;

  /// Run directory for config.json, log.csv, events.csv and checkpoints;
  /// empty disables file output.
  std::filesystem::path out_dir;

  void validate() const;
  double gamma_at(int epoch) const { return gamma_override ? *gamma_override : ramp_gamma(epoch, ramp); }
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EvalMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
  double hd95 = 0.0;  // mean over samples with a defined surface distance
  double asd = 0.0;
  int samples = 0;
  int surface_missing = 0;  // samples whose prediction or label was empty
};

struct EpochReport {
  int epoch = 0;
  int iterations = 0;
  LossBreakdown mean;  // per-sample average over the epoch
  std::optional<EvalMetrics> eval;
  int degenerate_sdm = 0;
  double wall_seconds = 0.0;  // excluded from reproducibility comparisons
};

/// Per-sample loss row, the log.csv schema.
struct IterationRecord {
  int epoch = 0;
  int iteration = 0;
  int sample_id = 0;
  bool labeled = false;
  LossBreakdown loss;
  bool src_skipped = false;
};

struct BatchResult {
  std::vector<IterationRecord> records;
  double batch_loss = 0.0;  // mean of per-sample totals
};

/// Forward on an unaugmented image; foreground where the branch-averaged
/// foreground probability strictly exceeds background.
BinaryMask predict_mask(const DualBranchNet<float>& net, const Volume3& image);

/// Mean Dice/Jaccard over all pairs; hd95/asd over pairs where both masks
/// are nonempty.
EvalMetrics aggregate_metrics(const std::vector<std::pair<BinaryMask, BinaryMask>>& pred_label);

/// Aggregate metrics over labeled samples. Images must already be normalised.
EvalMetrics evaluate(const DualBranchNet<float>& net, const std::vector<const Sample*>& samples);

/// Owns the network, the confidence cache and the data order of one run.
class Trainer {
 public:
  Trainer(const Dataset& dataset, TrainConfig cfg);

  /// One SGD step over `batch_ids` (sample ids) at `epoch`.
  BatchResult train_iteration(const std::vector<int>& batch_ids, int epoch);

  EpochReport run_epoch(int epoch);
  std::vector<EpochReport> run();

  EvalMetrics evaluate_heldout() const;

  DualBranchNet<float>& net() { return net_; }
  const DualBranchNet<float>& net() const { return net_; }
  const ConfidenceCache& cache() const { return cache_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<int>& train_ids() const { return train_ids_; }
  const std::vector<int>& eval_ids() const { return eval_ids_; }
  /// Normalised copy of a sample.
  const Sample& sample(int id) const { return samples_.at(std::size_t(id)); }
  bool is_labeled(int id) const;
  /// Views handed out so far; the next iteration uses view_specs[k % size].
  std::uint64_t iterations_done() const { return iteration_; }

 private:
  void open_outputs();
  void log_records(const std::vector<IterationRecord>& records);

  TrainConfig cfg_;
  std::vector<Sample> samples_;
  std::vector<int> labeled_ids_;
  std::vector<int> train_ids_;
  std::vector<int> eval_ids_;
  DualBranchNet<float> net_;
  ConfidenceCache cache_;
  std::mt19937_64 shuffle_rng_;
  std::uint64_t iteration_ = 0;
  int degenerate_in_epoch_ = 0;
  std::ofstream log_;
  std::ofstream events_;
};

struct TrainResult {
  DualBranchNet<float> net;
  std::vector<EpochReport> reports;
};

/// Full run: seeded shuffles, evaluation, logs and a final checkpoint.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

}  // namespace sasnet
