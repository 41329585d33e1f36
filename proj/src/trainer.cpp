#include "sasnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "sasnet/checkpoint.hpp"
#include "sasnet/distance.hpp"
#include "sasnet/metrics.hpp"
#include "sasnet/normalize.hpp"

namespace sasnet {

void TrainConfig::validate() const {
  if (epochs < 0) fail(ErrorKind::configuration, "epochs must be >= 0");
  if (batch_size < 1) fail(ErrorKind::configuration, "batch size must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::configuration, "learning rate must be positive");
  if (!(beta >= 0.0)) fail(ErrorKind::configuration, "beta must be >= 0");
  if (view_specs.empty()) fail(ErrorKind::configuration, "at least one view spec is required");
  for (const auto& v : view_specs) {
    if (v.quarter_turns() < 0) {
      fail(ErrorKind::configuration, "training views must be quarter turns so labels stay binary, got " + v.str());
    }
  }
  if (gamma_override && !(*gamma_override >= 0.0)) fail(ErrorKind::configuration, "gamma must be >= 0");
  SarConfig{alpha, sharpen_t, literal_high_weighting}.validate();
  ramp.validate();
  net.validate();
}

nlohmann::json to_json(const TrainConfig& cfg) {
  std::string views;
  for (const auto& v : cfg.view_specs) views += (views.empty() ? "" : ",") + v.str();
  nlohmann::json j{{"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"lr", cfg.lr},
                   {"alpha", cfg.alpha},
                   {"beta", cfg.beta},
                   {"gamma_max", cfg.ramp.gamma_max},
                   {"ramp_epochs", cfg.ramp.ramp_epochs},
                   {"sharpen_t", cfg.sharpen_t},
                   {"labeled_ratio", cfg.labeled_ratio},
                   {"seed", cfg.seed},
                   {"view_specs", views},
                   {"eval_count", cfg.eval_count},
                   {"use_plc", cfg.use_plc},
                   {"use_src", cfg.use_src},
                   {"use_sar", cfg.use_sar},
                   {"literal_high_weighting", cfg.literal_high_weighting},
                   {"sharpened_plc_target", cfg.sharpened_plc_target},
                   {"net", to_json(cfg.net)}};
  j["gamma_override"] = cfg.gamma_override ? nlohmann::json(*cfg.gamma_override) : nlohmann::json(nullptr);
  return j;
}

BinaryMask predict_mask(const DualBranchNet<float>& net, const Volume3& image) {
  const BranchOutputs<float> out = net.predict(image);
  const Eigen::ArrayXd fg =
      (out.p_lseg.foreground().cast<double>() + out.p_hseg.foreground().cast<double>()) / 2.0;
  const Eigen::ArrayXd bg =
      (out.p_lseg.background().cast<double>() + out.p_hseg.background().cast<double>()) / 2.0;
  return BinaryMask(image.dims(), (fg > bg).cast<std::uint8_t>());
}

EvalMetrics aggregate_metrics(const std::vector<std::pair<BinaryMask, BinaryMask>>& pred_label) {
  EvalMetrics m;
  int with_surface = 0;
  for (const auto& [pred, label] : pred_label) {
    const Overlap o = dice_jaccard(pred, label);
    m.dice += o.dice;
    m.jaccard += o.jaccard;
    ++m.samples;
    if (pred.empty() || label.empty()) {
      ++m.surface_missing;
      continue;
    }
    const SurfaceDistance sd = surface_distances(pred, label);
    m.hd95 += sd.hd95;
    m.asd += sd.asd;
    ++with_surface;
  }
  if (m.samples > 0) {
    m.dice /= m.samples;
    m.jaccard /= m.samples;
  }
  if (with_surface > 0) {
    m.hd95 /= with_surface;
    m.asd /= with_surface;
  } else {
    m.hd95 = m.asd = std::nan("");
  }
  return m;
}

EvalMetrics evaluate(const DualBranchNet<float>& net, const std::vector<const Sample*>& samples) {
  std::vector<std::pair<BinaryMask, BinaryMask>> pairs;
  pairs.reserve(samples.size());
  for (const Sample* s : samples) pairs.emplace_back(predict_mask(net, s->image), s->label);
  return aggregate_metrics(pairs);
}

Trainer::Trainer(const Dataset& dataset, TrainConfig cfg)
    : cfg_(std::move(cfg)),
      labeled_ids_(dataset.labeled_ids),
      net_([this] {
        NetConfig n = cfg_.net;
        n.seed = cfg_.seed;
        return n;
      }()),
      shuffle_rng_(cfg_.seed ^ 0x5A5A'0F0F'1234'5678ULL) {
  cfg_.net.seed = cfg_.seed;
  cfg_.validate();
  if (labeled_ids_.empty()) fail(ErrorKind::configuration, "training needs at least one labeled sample");

  samples_.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    cfg_.net.check_input(s.image.dims());
    Sample copy = s;
    copy.image = zscore_normalize(s.image);
    samples_.push_back(std::move(copy));
  }

  std::vector<int> unlabeled;
  for (const auto& s : samples_)
    if (!is_labeled(s.id)) unlabeled.push_back(s.id);
  int n_eval = cfg_.eval_count;
  if (n_eval < 0) {
    n_eval = static_cast<int>(std::lround(0.1 * double(samples_.size())));
    if (n_eval == 0 && !unlabeled.empty()) n_eval = 1;
  }
  n_eval = std::min<int>(n_eval, int(unlabeled.size()));
  eval_ids_.assign(unlabeled.end() - n_eval, unlabeled.end());
  for (const auto& s : samples_)
    if (std::find(eval_ids_.begin(), eval_ids_.end(), s.id) == eval_ids_.end()) train_ids_.push_back(s.id);

  open_outputs();
}

bool Trainer::is_labeled(int id) const {
  return std::binary_search(labeled_ids_.begin(), labeled_ids_.end(), id);
}

void Trainer::open_outputs() {
  if (cfg_.out_dir.empty()) return;
  std::filesystem::create_directories(cfg_.out_dir);
  {
    std::ofstream config(cfg_.out_dir / "config.json", std::ios::trunc);
    if (!config) fail(ErrorKind::io, "cannot write " + (cfg_.out_dir / "config.json").string());
    config << to_json(cfg_).dump(2) << '\n';
  }
  log_.open(cfg_.out_dir / "log.csv", std::ios::trunc);
  events_.open(cfg_.out_dir / "events.csv", std::ios::trunc);
  if (!log_ || !events_) fail(ErrorKind::io, "cannot open run logs under " + cfg_.out_dir.string());
  log_ << "epoch,iter,sample_id,labeled,l_dice,l_ce,l_plc,l_src,gamma,total\n";
  events_ << "epoch,degenerate_sdm\n";
}

void Trainer::log_records(const std::vector<IterationRecord>& records) {
  if (!log_.is_open()) return;
  char line[512];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.iteration,
                  r.sample_id, r.labeled ? 1 : 0, r.loss.l_dice, r.loss.l_ce, r.loss.l_plc, r.loss.l_src,
                  r.loss.gamma, r.loss.total);
    log_ << line;
  }
}

BatchResult Trainer::train_iteration(const std::vector<int>& batch_ids, int epoch) {
  if (batch_ids.empty()) fail(ErrorKind::contract, "train_iteration needs a non-empty batch");
  const ViewSpec view = cfg_.view_specs[iteration_ % cfg_.view_specs.size()];
  const double gamma = cfg_.gamma_at(epoch);
  const bool consistency = gamma > 0.0;
  const SarConfig sar{cfg_.use_sar ? cfg_.alpha : 0.0, cfg_.sharpen_t, cfg_.literal_high_weighting};

  Tape<float> tape = net_.begin();
  BatchResult result;
  std::vector<Var<float>> sample_losses;
  for (int id : batch_ids) {
    const Sample& s = sample(id);
    const bool labeled = is_labeled(id);
    const Volume3 image = view.quarter_turns() == 0 ? s.image : view_variance_views(s.image, {view}).front();
    const HeadVars<float> heads = net_.forward(tape, image);
    const BranchOutputs<float> out = head_values(heads, image.dims());
    const ProbVolume<double> p_low = out.p_lseg.cast<double>();
    const ProbVolume<double> p_high = out.p_hseg.cast<double>();

    IterationRecord rec;
    rec.epoch = epoch;
    rec.iteration = int(iteration_);
    rec.sample_id = id;
    rec.labeled = labeled;

    std::vector<Var<float>> terms;
    std::vector<float> weights;
    LossParts parts;
    parts.labeled = labeled;

    ProbVolume<double> fused;
    if (labeled) {
      const BinaryMask gt = rotate_spatial(s.label, view);
      fused = sar_step_labeled(p_low, p_high, gt, cache_, id, epoch, sar, view);
      for (const auto& p : {heads.p_low, heads.p_high}) {
        const Var<float> dice = soft_dice_loss(p, gt, kDiceSmooth);
        const Var<float> ce = cross_entropy(p, gt, kProbClamp);
        parts.l_dice += dice.item();
        parts.l_ce += ce.item();
        terms.insert(terms.end(), {dice, ce});
        weights.insert(weights.end(), {float(cfg_.beta), float(cfg_.beta)});
      }
    } else {
      fused = pseudo_ensemble(p_low, p_high, cfg_.sharpen_t);
    }

    if (consistency && cfg_.use_plc) {
      Var<float> plc;
      if (cfg_.sharpened_plc_target) {
        Tensor<float>::Array target(2 * fused.size());
        target << fused.background().cast<float>(), fused.foreground().cast<float>();
        plc = weighted_sum<float>({mse_to(heads.p_low, target), mse_to(heads.p_high, target)}, {0.5f, 0.5f});
      } else {
        plc = mse(heads.p_low, heads.p_high);
      }
      parts.l_plc = plc.item();
      terms.push_back(plc);
      weights.push_back(float(gamma));
    }

    if (consistency && cfg_.use_src) {
      const BinaryMask ensemble_mask(fused.dims(), (fused.foreground() > 0.5).cast<std::uint8_t>());
      const Index fg = ensemble_mask.count();
      if (fg == 0 || fg == ensemble_mask.size()) {
        rec.src_skipped = true;
        ++degenerate_in_epoch_;
      } else {
        const Tensor<float>::Array target = signed_distance_map(ensemble_mask).data().cast<float>();
        const Var<float> src = weighted_sum<float>({mse_to(heads.r_low, target), mse_to(heads.r_high, target)},
                                                   {1.0f, 1.0f});
        parts.l_src = src.item();
        terms.push_back(src);
        weights.push_back(float(gamma));
      }
    }

    rec.loss = total_loss(parts, cfg_.beta, gamma);
    result.records.push_back(rec);
    result.batch_loss += rec.loss.total / double(batch_ids.size());
    if (!terms.empty()) sample_losses.push_back(weighted_sum(terms, weights));
  }

  if (!sample_losses.empty()) {
    const std::vector<float> mean_weights(sample_losses.size(), 1.0f / float(batch_ids.size()));
    backward_and_step(net_, tape, weighted_sum(sample_losses, mean_weights), float(cfg_.lr));
  }
  ++iteration_;
  log_records(result.records);
  return result;
}

EvalMetrics Trainer::evaluate_heldout() const {
  std::vector<const Sample*> held;
  for (int id : eval_ids_) held.push_back(&sample(id));
  return evaluate(net_, held);
}

EpochReport Trainer::run_epoch(int epoch) {
  const auto start = std::chrono::steady_clock::now();
  degenerate_in_epoch_ = 0;
  std::vector<int> order = train_ids_;
  std::shuffle(order.begin(), order.end(), shuffle_rng_);

  EpochReport report;
  report.epoch = epoch;
  std::size_t n_records = 0;
  for (std::size_t first = 0; first < order.size(); first += std::size_t(cfg_.batch_size)) {
    const std::size_t last = std::min(order.size(), first + std::size_t(cfg_.batch_size));
    const BatchResult r = train_iteration({order.begin() + std::ptrdiff_t(first), order.begin() + std::ptrdiff_t(last)},
                                          epoch);
    ++report.iterations;
    for (const auto& rec : r.records) {
      report.mean.l_seg += rec.loss.l_seg;
      report.mean.l_dice += rec.loss.l_dice;
      report.mean.l_ce += rec.loss.l_ce;
      report.mean.l_plc += rec.loss.l_plc;
      report.mean.l_src += rec.loss.l_src;
      report.mean.total += rec.loss.total;
      ++n_records;
    }
  }
  if (n_records > 0) {
    const double n = double(n_records);
    report.mean.l_seg /= n;
    report.mean.l_dice /= n;
    report.mean.l_ce /= n;
    report.mean.l_plc /= n;
    report.mean.l_src /= n;
    report.mean.total /= n;
  }
  report.mean.gamma = cfg_.gamma_at(epoch);
  report.degenerate_sdm = degenerate_in_epoch_;

  const bool last_epoch = epoch + 1 == cfg_.epochs;
  if (!eval_ids_.empty() && cfg_.eval_every > 0 && ((epoch + 1) % cfg_.eval_every == 0 || last_epoch)) {
    report.eval = evaluate_heldout();
  }
  if (events_.is_open()) {
    events_ << epoch << ',' << report.degenerate_sdm << '\n';
    events_.flush();
    log_.flush();
  }
  if (!cfg_.out_dir.empty() && cfg_.checkpoint_every > 0 && (epoch + 1) % cfg_.checkpoint_every == 0 && !last_epoch) {
    save_checkpoint(net_, epoch, cfg_.out_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<EpochReport> Trainer::run() {
  std::vector<EpochReport> reports;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) reports.push_back(run_epoch(epoch));
  if (!cfg_.out_dir.empty()) {
    const int final_epoch = cfg_.epochs > 0 ? cfg_.epochs - 1 : 0;
    save_checkpoint(net_, final_epoch, cfg_.out_dir / ("epoch_" + std::to_string(final_epoch) + ".ckpt"),
                    {{"train", to_json(cfg_)}});
    std::ofstream summary(cfg_.out_dir / "epochs.csv", std::ios::trunc);
    summary << "epoch,iterations,l_dice,l_ce,l_plc,l_src,gamma,total,degenerate_sdm,dice,jaccard,hd95,asd,wall_s\n";
    char line[512];
    for (const auto& r : reports) {
      const EvalMetrics e = r.eval.value_or(EvalMetrics{std::nan(""), std::nan(""), std::nan(""), std::nan(""), 0, 0});
      std::snprintf(line, sizeof line, "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.6f,%.6f,%.6f,%.6f,%.3f\n", r.epoch,
                    r.iterations, r.mean.l_dice, r.mean.l_ce, r.mean.l_plc, r.mean.l_src, r.mean.gamma, r.mean.total,
                    r.degenerate_sdm, e.dice, e.jaccard, e.hd95, e.asd, r.wall_seconds);
      summary << line;
    }
  }
  return reports;
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  Trainer trainer(dataset, cfg);
  std::vector<EpochReport> reports = trainer.run();
  return {std::move(trainer.net()), std::move(reports)};
}

}  // namespace sasnet
