#include "sasnet/cli.hpp"

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sasnet/checkpoint.hpp"
#include "sasnet/dataset.hpp"
#include "sasnet/distance.hpp"
#include "sasnet/fourier.hpp"
#include "sasnet/metrics.hpp"
#include "sasnet/normalize.hpp"
#include "sasnet/trainer.hpp"
#include "sasnet/vvol_io.hpp"

namespace sasnet {
namespace {

// "32" or "32,32,32" (depth,height,width)
Dims parse_dims(const std::string& text) {
  std::vector<Index> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      parts.push_back(Index(v));
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--dims", "expected D or D,H,W, got '" + text + "'");
    }
  }
  if (parts.size() == 1) return {parts[0], parts[0], parts[0]};
  if (parts.size() == 3) return {parts[0], parts[1], parts[2]};
  throw CLI::ValidationError("--dims", "expected D or D,H,W, got '" + text + "'");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct SynthArgs {
  int n = 100;
  std::string dims = "32";
  double labeled_ratio = 0.2;
  std::uint64_t seed = 0;
  std::string out;
};

struct AugmentArgs {
  std::string in;
  std::string views = "z:0,z:90,y:90";
  std::string out;
};

struct SdmArgs {
  std::string mask, out;
};

struct MetricsArgs {
  std::string pred, gt;
};

struct TrainArgs {
  std::string data, out;
  TrainConfig cfg;
  std::string views = "z:0,z:90,y:90";
  bool no_plc = false, no_src = false, no_sar = false;
  double gamma = -1.0;
};

struct PredictArgs {
  std::string ckpt, in, out;
};

void add_train_options(CLI::App& cmd, TrainArgs& a) {
  TrainConfig& c = a.cfg;
  cmd.add_option("--data", a.data, "dataset directory written by `synth`")->required();
  cmd.add_option("--out", a.out, "run directory for config.json, log.csv, events.csv, checkpoints")->required();
  cmd.add_option("--epochs", c.epochs, "training epochs")->capture_default_str();
  cmd.add_option("--lr", c.lr, "SGD learning rate")->capture_default_str();
  cmd.add_option("--alpha", c.alpha, "adaptive reweighting residual coefficient")->capture_default_str();
  cmd.add_option("--beta", c.beta, "weight of the supervised segmentation loss")->capture_default_str();
  cmd.add_option("--gamma-max", c.ramp.gamma_max, "consistency weight after ramp-up")->capture_default_str();
  cmd.add_option("--ramp-epochs", c.ramp.ramp_epochs, "epochs until the consistency weight saturates")
      ->capture_default_str();
  cmd.add_option("--sharpen-t", c.sharpen_t, "pseudo-label sharpening temperature")->capture_default_str();
  cmd.add_option("--batch", c.batch_size, "samples per SGD step")->capture_default_str();
  cmd.add_option("--seed", c.seed, "seed for weights and data order")->capture_default_str();
  cmd.add_option("--views", a.views, "viewpoints cycled per iteration, axis:angle[,axis:angle...]")
      ->capture_default_str();
  cmd.add_option("--levels", c.net.levels, "encoder levels")->capture_default_str();
  cmd.add_option("--base-channels", c.net.base_channels, "channels at the first level")->capture_default_str();
  cmd.add_option("--eval-count", c.eval_count, "held-out unlabeled samples, -1 = 10% of the dataset")
      ->capture_default_str();
  cmd.add_option("--eval-every", c.eval_every, "evaluate every k epochs, 0 = never")->capture_default_str();
  cmd.add_option("--checkpoint-every", c.checkpoint_every, "extra checkpoint every k epochs, 0 = final only")
      ->capture_default_str();
  cmd.add_flag("--no-plc", a.no_plc, "drop the branch cross-supervision term");
  cmd.add_flag("--no-src", a.no_src, "drop the distance-map consistency term");
  cmd.add_flag("--no-sar", a.no_sar, "ensemble labeled samples without confidence reweighting");
  cmd.add_option("--gamma", a.gamma, "fixed consistency weight instead of the ramp (default: ramp)");
  cmd.add_flag("--literal-high-weighting", c.literal_high_weighting,
               "weight the deep branch with the shallow branch's confidence history");
  cmd.add_flag("--sharpened-plc-target", c.sharpened_plc_target,
               "supervise both branches with the sharpened ensemble");
}

int do_synth(const SynthArgs& a, std::ostream& out) {
  const Dataset ds = synth_dataset(a.n, parse_dims(a.dims), a.labeled_ratio, a.seed);
  save_dataset(ds, a.out);
  out << "wrote " << ds.samples.size() << " samples (" << ds.labeled_ids.size() << " labeled) to " << a.out << '\n';
  return 0;
}

int do_augment(const AugmentArgs& a, std::ostream& out) {
  const std::vector<ViewSpec> specs = parse_view_specs(a.views);
  const Volume3 v = load_vvol(a.in);
  const std::vector<Volume3> views = view_variance_views(v, specs);
  std::filesystem::create_directories(a.out);
  const std::string stem = std::filesystem::path(a.in).stem().string();
  for (std::size_t k = 0; k < views.size(); ++k) {
    const auto path = std::filesystem::path(a.out) / (stem + "_view" + std::to_string(k) + ".vvol");
    save_vvol(views[k], path);
    out << path.string() << ' ' << specs[k].str() << '\n';
  }
  return 0;
}

int do_sdm(const SdmArgs& a, std::ostream&) {
  const BinaryMask m = load_mask(a.mask);
  const Volume<double> sdm = signed_distance_map(m);
  save_vvol(sdm.cast<float>(), a.out);
  return 0;
}

int do_metrics(const MetricsArgs& a, std::ostream& out) {
  const BinaryMask pred = load_mask(a.pred);
  const BinaryMask gt = load_mask(a.gt);
  const Overlap o = dice_jaccard(pred, gt);
  const SurfaceDistance sd = surface_distances(pred, gt);
  out << fixed6(o.dice) << ',' << fixed6(o.jaccard) << ',' << fixed6(sd.hd95) << ',' << fixed6(sd.asd) << '\n';
  return 0;
}

int do_train(TrainArgs& a, std::ostream& out) {
  TrainConfig& c = a.cfg;
  c.view_specs = parse_view_specs(a.views);
  c.use_plc = !a.no_plc;
  c.use_src = !a.no_src;
  c.use_sar = !a.no_sar;
  if (a.gamma >= 0.0) c.gamma_override = a.gamma;
  c.out_dir = a.out;
  const Dataset ds = load_dataset(a.data);
  c.labeled_ratio = double(ds.labeled_ids.size()) / double(ds.samples.size());

  Trainer trainer(ds, c);
  out << "train " << trainer.train_ids().size() << " samples, held out " << trainer.eval_ids().size() << '\n';
  const std::vector<EpochReport> reports = trainer.run();
  for (const auto& r : reports) {
    out << "epoch " << r.epoch << " loss " << fixed6(r.mean.total) << " gamma " << fixed6(r.mean.gamma);
    if (r.eval) out << " dice " << fixed6(r.eval->dice) << " hd95 " << fixed6(r.eval->hd95);
    out << '\n';
  }
  return 0;
}

int do_predict(const PredictArgs& a, std::ostream&) {
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const Volume3 image = load_vvol(a.in);
  ck.net.config().check_input(image.dims());
  const BinaryMask mask = predict_mask(ck.net, zscore_normalize(image));
  save_mask(mask, a.out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised dual-branch volumetric segmentation toolkit", "sasnet"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a phantom dataset with a manifest");
  synth_cmd->add_option("--n", synth.n, "number of samples")->capture_default_str();
  synth_cmd->add_option("--dims", synth.dims, "volume size, D or D,H,W")->capture_default_str();
  synth_cmd->add_option("--labeled-ratio", synth.labeled_ratio, "fraction of samples with labels")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  AugmentArgs augment;
  CLI::App* augment_cmd = app.add_subcommand("augment", "write rotated-spectrum views of a volume");
  augment_cmd->add_option("--in", augment.in, "input .vvol")->required();
  augment_cmd->add_option("--views", augment.views, "axis:angle[,axis:angle...]")->capture_default_str();
  augment_cmd->add_option("--out", augment.out, "output directory, files named <stem>_view<k>.vvol")->required();

  SdmArgs sdm;
  CLI::App* sdm_cmd = app.add_subcommand("sdm", "normalised signed distance map of a binary mask");
  sdm_cmd->add_option("--mask", sdm.mask, "binary mask .vvol")->required();
  sdm_cmd->add_option("--out", sdm.out, "output .vvol")->required();

  MetricsArgs metrics;
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "print dice,jaccard,hd95,asd for two masks");
  metrics_cmd->add_option("--pred", metrics.pred, "predicted mask .vvol")->required();
  metrics_cmd->add_option("--gt", metrics.gt, "reference mask .vvol")->required();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the dual-branch network");
  add_train_options(*train_cmd, train_args);

  PredictArgs predict;
  CLI::App* predict_cmd = app.add_subcommand("predict", "segment a volume with a checkpoint");
  predict_cmd->add_option("--ckpt", predict.ckpt, "checkpoint file")->required();
  predict_cmd->add_option("--in", predict.in, "input image .vvol")->required();
  predict_cmd->add_option("--out", predict.out, "output mask .vvol")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return do_synth(synth, out);
    if (augment_cmd->parsed()) return do_augment(augment, out);
    if (sdm_cmd->parsed()) return do_sdm(sdm, out);
    if (metrics_cmd->parsed()) return do_metrics(metrics, out);
    if (train_cmd->parsed()) return do_train(train_args, out);
    if (predict_cmd->parsed()) return do_predict(predict, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: usage: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: io: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace sasnet
