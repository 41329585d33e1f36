// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>

#include "sasnet/distance.hpp"
#include "sasnet/fourier.hpp"
#include "sasnet/losses.hpp"
#include "sasnet/metrics.hpp"
#include "sasnet/network.hpp"
#include "sasnet/sar.hpp"
#include "sasnet/trainer.hpp"
#include "support.hpp"

using namespace sasnet;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

ProbVolume<double> random_prob(Dims d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::ArrayXd fg(d.count());
  for (Index i = 0; i < fg.size(); ++i) fg[i] = u(rng);
  return ProbVolume<double>::from_foreground(d, fg);
}

Outcome fft_correctness() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double dft = 0, trip = 0, parseval = 0;
  for (int t = 0; t < 100; ++t) {
    const Volume3 v = testing::random_volume({8, 8, 8}, rng);
    const ComplexVolume f = fft3(v);
    const auto ref = testing::naive_dft(v);
    for (Index i = 0; i < f.size(); ++i) dft = std::max(dft, std::abs(f.data()[i] - ref[std::size_t(i)]));
    trip = std::max(trip, double((ifft3(f).data() - v.data()).abs().maxCoeff()));
    const double space = v.data().cast<double>().square().sum();
    parseval = std::max(parseval, std::abs(space - f.data().abs2().sum() / 512.0) / space);
  }
  const double secs = seconds_since(start);
  o.require(dft < 1e-6, "dft " + fmt("%.3g", dft));
  o.require(trip < 1e-6, "round trip " + fmt("%.3g", trip));
  o.require(parseval < 1e-6, "parseval " + fmt("%.3g", parseval));
  o.require(secs < 10, "runtime " + fmt("%.1fs", secs));
  o.detail = "dft " + fmt("%.2e", dft) + " trip " + fmt("%.2e", trip) + " parseval " + fmt("%.2e", parseval) + " " +
             fmt("%.1fs", secs) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome frequency_rotation() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(102);
  const Axis axes[] = {Axis::x, Axis::y, Axis::z};
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const Volume3 v = testing::random_volume({16, 16, 16}, rng);
    const ViewSpec view{axes[t % 3], 90.0 * double(1 + t % 3)};
    const Volume3 a = ifft3(rotate_freq(fft3(v), view));
    const Volume3 b = rotate_spatial(v, view);
    worst = std::max(worst, double((a.data() - b.data()).abs().maxCoeff()));
  }
  const double secs = seconds_since(start);
  o.require(worst < 1e-6, "max abs " + fmt("%.3g", worst));
  o.require(secs < 30, "runtime " + fmt("%.1fs", secs));
  o.detail = "max abs " + fmt("%.2e", worst) + " " + fmt("%.1fs", secs) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome edt_exactness() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> density(0.3, 0.97);
  int checked = 0;
  Index mismatches = 0;
  while (checked < 100) {
    const BinaryMask m = testing::random_mask({8, 8, 8}, rng, density(rng));
    if (m.count() == m.size()) continue;
    const SquaredDistances fast = squared_edt(m);
    const auto slow = testing::brute_squared_edt(m);
    for (Index i = 0; i < m.size(); ++i) mismatches += fast[i] != slow[std::size_t(i)];
    ++checked;
  }
  const double secs = seconds_since(start);
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatched voxels");
  o.require(secs < 20, "runtime " + fmt("%.1fs", secs));
  o.detail = std::to_string(checked) + " masks, " + std::to_string(mismatches) + " mismatches " + fmt("%.1fs", secs);
  return o;
}

Outcome sdm_contract() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(104);
  int checked = 0;
  Index border_nonzero = 0, wrong_sign = 0, not_recovered = 0;
  double range = 0;
  while (checked < 100) {
    const Dims d{8, 8, 8};
    const BinaryMask m = checked % 2 ? testing::random_blob_mask(d, rng) : testing::random_mask(d, rng, 0.35);
    if (m.empty() || m.count() == m.size()) continue;
    const Volume<double> s = signed_distance_map(m);
    const BinaryMask border = find_boundaries(m, BoundaryEdge::outside_ignored);
    range = std::max(range, s.data().abs().maxCoeff());
    for (Index i = 0; i < m.size(); ++i) {
      if (border[i]) {
        border_nonzero += s[i] != 0.0;
        continue;
      }
      wrong_sign += m[i] ? !(s[i] < 0) : !(s[i] > 0);
      not_recovered += (s[i] <= 0) != bool(m[i]);
    }
    ++checked;
  }
  const double secs = seconds_since(start);
  o.require(border_nonzero == 0, "nonzero border voxels");
  o.require(wrong_sign == 0, "wrong sign off border");
  o.require(range <= 1.0, "range " + fmt("%.6g", range));
  o.require(not_recovered == 0, "threshold does not recover the mask");
  o.require(secs < 20, "runtime " + fmt("%.1fs", secs));
  o.detail = std::to_string(checked) + " masks, max |s| " + fmt("%.3f", range) + " " + fmt("%.1fs", secs) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome metrics_oracle() {
  Outcome o;
  std::mt19937_64 rng(105);
  double hd = 0, asd = 0, jac = 0;
  int pairs = 0;
  while (pairs < 50) {
    const Dims d{8, 8, 8};
    const BinaryMask a = testing::random_blob_mask(d, rng);
    const BinaryMask b = pairs % 2 ? testing::random_blob_mask(d, rng) : testing::random_mask(d, rng, 0.2);
    if (a.empty() || b.empty()) continue;
    const SurfaceDistance s = surface_distances(a, b);
    const auto pooled = testing::brute_surface_distances(a, b);
    double mean = 0;
    for (double v : pooled) mean += v;
    mean /= double(pooled.size());
    hd = std::max(hd, std::abs(s.hd95 - testing::brute_percentile(pooled, 0.95)));
    asd = std::max(asd, std::abs(s.asd - mean));
    const Overlap ov = dice_jaccard(a, b);
    jac = std::max(jac, std::abs(ov.jaccard - ov.dice / (2 - ov.dice)));
    ++pairs;
  }
  o.require(hd < 1e-9, "hd95 " + fmt("%.3g", hd));
  o.require(asd < 1e-9, "asd " + fmt("%.3g", asd));
  o.require(jac < 1e-12, "jaccard identity " + fmt("%.3g", jac));
  o.detail = "hd95 " + fmt("%.1e", hd) + " asd " + fmt("%.1e", asd) + " jaccard " + fmt("%.1e", jac) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome sar_algebra() {
  Outcome o;
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(0, 1);
  const Dims d{4, 4, 4};

  bool bounded = true;
  for (int t = 0; t < 100; ++t) {
    const double alpha = u(rng);
    Eigen::ArrayXd c1(d.count()), c2(d.count());
    for (Index i = 0; i < d.count(); ++i) c1[i] = u(rng), c2[i] = u(rng);
    const Eigen::ArrayXd f = reweight_factor(ConfidenceMap<double>(Volume<double>(d, c1)),
                                             ConfidenceMap<double>(Volume<double>(d, c2)), alpha);
    bounded = bounded && f.minCoeff() >= 1.0 && f.maxCoeff() <= 1.0 + alpha;
  }
  o.require(bounded, "factor outside [1, 1+alpha]");

  const BinaryMask gt = testing::random_mask(d, rng);
  const auto pl = random_prob(d, rng), ph = random_prob(d, rng);
  const auto plain = ensemble(WeightedLogits<double>{d, pl.background(), pl.foreground()},
                              WeightedLogits<double>{d, ph.background(), ph.foreground()});
  SarConfig off;
  off.alpha = 0.0;
  ConfidenceCache flat;
  bool alpha_zero = true;
  for (int e = 0; e < 3; ++e)
    alpha_zero = alpha_zero && (sar_step_labeled(pl, ph, gt, flat, 0, e, off).foreground() == plain.foreground()).all();
  o.require(alpha_zero, "alpha 0 differs from the plain ensemble");

  ConfidenceCache cold;
  o.require((sar_step_labeled(pl, ph, gt, cold, 0, 0, SarConfig{}).foreground() == plain.foreground()).all(),
            "cold start differs from the plain ensemble");

  const double alpha = 0.5;
  SarConfig cfg;
  cfg.alpha = alpha;
  std::vector<ProbVolume<double>> low, high;
  for (int e = 0; e < 3; ++e) low.push_back(random_prob(d, rng)), high.push_back(random_prob(d, rng));
  ConfidenceCache cache;
  ProbVolume<double> out;
  for (int e = 0; e < 3; ++e) out = sar_step_labeled(low[std::size_t(e)], high[std::size_t(e)], gt, cache, 1, e, cfg);
  double worst = 0;
  for (Index i = 0; i < d.count(); ++i) {
    auto truth = [&](const ProbVolume<double>& p) { return gt[i] ? p.foreground()[i] : p.background()[i]; };
    const double fl = 1 + alpha * (truth(low[1]) + truth(low[0])) / 2;
    const double fh = 1 + alpha * (truth(high[1]) + truth(high[0])) / 2;
    const double a0 = fl * low[2].background()[i] + fh * high[2].background()[i];
    const double a1 = fl * low[2].foreground()[i] + fh * high[2].foreground()[i];
    worst = std::max(worst, std::abs(out.foreground()[i] - std::exp(a1) / (std::exp(a0) + std::exp(a1))));
  }
  o.require(worst < 1e-12, "scripted sequence " + fmt("%.3g", worst));
  o.detail = "scripted sequence " + fmt("%.1e", worst) + (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome gradient_fidelity() {
  using testing::max_grad_error;
  using testing::random_tensor;
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(107);
  double prim = 0;
  auto target_of = [&](Index n) { return random_tensor(Shape{n, 1, 1, 1}, rng).data; };

  for (ConvGeometry geom : {ConvGeometry::same3(), ConvGeometry::pointwise(), ConvGeometry::down2()}) {
    const auto x = random_tensor(Shape{2, 4, 4, 4}, rng);
    const auto w = random_tensor(Shape{3, 2 * geom.taps(), 1, 1}, rng);
    const auto b = random_tensor(Shape{3, 1, 1, 1}, rng);
    const Index e = geom.out_extent(4);
    const auto target = target_of(3 * e * e * e);
    prim = std::max(prim, max_grad_error({x, w, b}, [&](Graph<double>&, const auto& v) {
                      return mse_to(conv3d(v[0], v[1], v[2], geom), target);
                    }, 10, rng));
  }
  {
    const auto x = random_tensor(Shape{3, 2, 2, 2}, rng);
    const auto w = random_tensor(Shape{16, 3, 1, 1}, rng);
    const auto b = random_tensor(Shape{2, 1, 1, 1}, rng);
    const auto target = target_of(128);
    prim = std::max(prim, max_grad_error({x, w, b}, [&](Graph<double>&, const auto& v) {
                      return mse_to(upconv3d(v[0], v[1], v[2]), target);
                    }, 10, rng));
  }
  const Shape s{2, 3, 3, 3};
  Tensor<double> a = random_tensor(s, rng, 0.05, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (Index i = 0; i < a.data.size(); ++i)
    if (flip(rng)) a.data[i] = -a.data[i];
  const auto b = random_tensor(s, rng);
  const auto target = target_of(s.count());
  const std::vector<testing::Builder> unary = {
      [&](Graph<double>&, const auto& v) { return mse_to(leaky_relu(v[0], 0.01), target); },
      [&](Graph<double>&, const auto& v) { return mse_to(sasnet::tanh(v[0]), target); },
      [&](Graph<double>&, const auto& v) { return mse_to(softmax_channels(v[0]), target); },
      [&](Graph<double>&, const auto& v) { return mse_to(v[0], target); },
  };
  for (const auto& f : unary) prim = std::max(prim, max_grad_error({a}, f, 10, rng));
  prim = std::max(prim, max_grad_error({a, b}, [&](Graph<double>&, const auto& v) { return mse_to(add(v[0], v[1]), target); },
                                       10, rng));
  prim = std::max(prim, max_grad_error({a, b}, [&](Graph<double>&, const auto& v) { return mse(v[0], v[1]); }, 10, rng));
  const Dims ld{3, 3, 3};
  const BinaryMask y = testing::random_mask(ld, rng, 0.4);
  prim = std::max(prim, max_grad_error({b}, [&](Graph<double>&, const auto& v) {
                    return soft_dice_loss(softmax_channels(v[0]), y);
                  }, 10, rng));
  prim = std::max(prim, max_grad_error({b}, [&](Graph<double>&, const auto& v) {
                    return cross_entropy(softmax_channels(v[0]), y);
                  }, 10, rng));
  const auto s1 = random_tensor(Shape::scalar(), rng), s2 = random_tensor(Shape::scalar(), rng);
  prim = std::max(prim, max_grad_error({s1, s2}, [&](Graph<double>&, const auto& v) {
                    return weighted_sum<double>({v[0], v[1]}, {0.5, -2.0});
                  }, 1, rng));
  o.require(prim < 1e-4, "primitive rel err " + fmt("%.3g", prim));

  // full objective through a 3-level net on 8^3
  NetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 2;
  cfg.seed = 108;
  DualBranchNet<double> net(cfg);
  const Dims d{8, 8, 8};
  const Volume3 img = testing::random_volume(d, rng);
  const BinaryMask gt = testing::random_blob_mask(d, rng);
  const Eigen::ArrayXd sdm = signed_distance_map(gt).data();
  auto loss_of = [&](Tape<double>& tape) {
    const HeadVars<double> h = net.forward(tape, img);
    std::vector<Var<double>> terms = {soft_dice_loss(h.p_low, gt), cross_entropy(h.p_low, gt),
                                      soft_dice_loss(h.p_high, gt), cross_entropy(h.p_high, gt),
                                      mse(h.p_low, h.p_high), mse_to(h.r_low, sdm), mse_to(h.r_high, sdm)};
    return weighted_sum<double>(terms, {0.5, 0.5, 0.5, 0.5, 0.7, 0.7, 0.7});
  };
  Tape<double> tape = net.begin();
  tape.graph->backward(loss_of(tape));
  auto& params = net.parameters();
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  double composed = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t p = pick_param(rng);
    std::uniform_int_distribution<Index> pick(0, params[p].value.size() - 1);
    const Index i = pick(rng);
    const double analytic = tape.graph->grad(tape.params[p].id)[i];
    const double saved = params[p].value[i], h = 1e-5;
    params[p].value[i] = saved + h;
    Tape<double> up = net.begin(false);
    const double lp = loss_of(up).item();
    params[p].value[i] = saved - h;
    Tape<double> down = net.begin(false);
    const double lm = loss_of(down).item();
    params[p].value[i] = saved;
    composed = std::max(composed, testing::rel_err(analytic, (lp - lm) / (2 * h)));
  }
  const double secs = seconds_since(start);
  o.require(composed < 1e-3, "composed rel err " + fmt("%.3g", composed));
  o.require(secs < 120, "runtime " + fmt("%.1fs", secs));
  o.detail = "primitives " + fmt("%.1e", prim) + " network " + fmt("%.1e", composed) + " " + fmt("%.1fs", secs) +
             (o.pass ? "" : " | " + o.detail);
  return o;
}

Outcome loss_identities() {
  Outcome o;
  std::mt19937_64 rng(109);
  const Dims d{8, 8, 8};
  const BinaryMask y = testing::random_blob_mask(d, rng);
  const double dice = dice_loss(ProbVolume<double>::one_hot(y), y);
  const double ce = ce_loss(ProbVolume<double>::from_foreground(d, Eigen::ArrayXd::Constant(d.count(), 0.5)), y);
  o.require(dice < 1e-4, "perfect dice loss " + fmt("%.3g", dice));
  o.require(std::abs(ce - std::log(2.0)) <= 1e-9, "uniform ce " + fmt("%.12f", ce));
  o.require(ramp_gamma(40) == 1.0, "ramp at 40 " + fmt("%.17g", ramp_gamma(40)));
  o.require(std::abs(ramp_gamma(0) - std::exp(-5.0)) <= 1e-12, "ramp at 0 " + fmt("%.17g", ramp_gamma(0)));
  o.detail = "dice " + fmt("%.1e", dice) + " ce-ln2 " + fmt("%.1e", ce - std::log(2.0)) + " ramp(0) " +
             fmt("%.6f", ramp_gamma(0));
  return o;
}

bool same_history(const std::vector<EpochReport>& a, const std::vector<EpochReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i].mean, &b[i].mean, sizeof(LossBreakdown)) != 0) return false;
    if (a[i].iterations != b[i].iterations || a[i].degenerate_sdm != b[i].degenerate_sdm) return false;
    if (a[i].eval.has_value() != b[i].eval.has_value()) return false;
    if (a[i].eval) {
      const EvalMetrics &x = *a[i].eval, &y = *b[i].eval;
      for (auto m : {&EvalMetrics::dice, &EvalMetrics::jaccard, &EvalMetrics::hd95, &EvalMetrics::asd})
        if (std::memcmp(&(x.*m), &(y.*m), sizeof(double)) != 0) return false;
    }
  }
  return true;
}

Outcome toy_training() {
  Outcome o;
  const Dataset ds = synth_dataset(100, {32, 32, 32}, 0.2, 7);
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 60;

  auto t0 = Clock::now();
  const TrainResult first = train(ds, cfg);
  const double secs_a = seconds_since(t0);
  t0 = Clock::now();
  const TrainResult second = train(ds, cfg);
  const double secs_b = seconds_since(t0);

  const auto& last = first.reports.back();
  const EvalMetrics e = last.eval.value_or(EvalMetrics{});
  bool weights_equal = first.net.parameters().size() == second.net.parameters().size();
  for (std::size_t k = 0; weights_equal && k < first.net.parameters().size(); ++k)
    weights_equal = (first.net.parameters()[k].value == second.net.parameters()[k].value).all();

  o.require(last.eval.has_value(), "no held-out evaluation");
  o.require(e.dice >= 0.85, "dice " + fmt("%.4f", e.dice));
  o.require(e.hd95 <= 3.0, "hd95 " + fmt("%.3f", e.hd95));
  o.require(std::max(secs_a, secs_b) <= 1800, "wall " + fmt("%.0fs", std::max(secs_a, secs_b)));
  o.require(same_history(first.reports, second.reports) && weights_equal, "runs differ");
  o.detail = "dice " + fmt("%.4f", e.dice) + " hd95 " + fmt("%.3f", e.hd95) + " held-out " +
             std::to_string(e.samples) + " wall " + fmt("%.0fs", secs_a) + "/" + fmt("%.0fs", secs_b) +
             (o.pass ? " identical" : " | " + o.detail);
  return o;
}

double best_dice(const std::vector<EpochReport>& reports) {
  double best = 0;
  for (const auto& r : reports)
    if (r.eval) best = std::max(best, r.eval->dice);
  return best;
}

Outcome ablation() {
  Outcome o;
  struct Variant {
    const char* name;
    bool plc, src, sar;
  };
  const Variant variants[] = {
      {"full", true, true, true}, {"seg+src", false, true, true}, {"seg", false, false, true}, {"sar-off", true, true, false}};
  double mean[4] = {0, 0, 0, 0};
  const int seeds[] = {1, 2, 3};
  for (int seed : seeds) {
    const Dataset ds = synth_dataset(100, {32, 32, 32}, 0.2, std::uint64_t(seed));
    for (int v = 0; v < 4; ++v) {
      TrainConfig cfg;
      cfg.seed = std::uint64_t(seed);
      cfg.epochs = 60;
      cfg.use_plc = variants[v].plc;
      cfg.use_src = variants[v].src;
      cfg.use_sar = variants[v].sar;
      const double best = best_dice(train(ds, cfg).reports);
      std::printf("  ablation seed %d %-8s best dice %.4f\n", seed, variants[v].name, best);
      std::fflush(stdout);
      mean[v] += best / 3.0;
    }
  }
  o.require(mean[0] >= mean[1], "full < seg+src");
  o.require(mean[1] >= mean[2], "seg+src < seg");
  o.require(mean[0] >= mean[3], "sar on < sar off");
  o.detail = "full " + fmt("%.4f", mean[0]) + " seg+src " + fmt("%.4f", mean[1]) + " seg " + fmt("%.4f", mean[2]) +
             " sar-off " + fmt("%.4f", mean[3]) + (o.pass ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"fft correctness", fft_correctness},
      {"frequency rotation", frequency_rotation},
      {"edt exactness", edt_exactness},
      {"sdm contract", sdm_contract},
      {"metrics oracle", metrics_oracle},
      {"reweighting algebra", sar_algebra},
      {"gradient fidelity", gradient_fidelity},
      {"loss identities", loss_identities},
      {"toy training", toy_training},
      {"directional ablation", ablation},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("AC%-2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
