// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <omp.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "l2h/assess.hpp"
#include "l2h/config.hpp"
#include "l2h/fusion.hpp"
#include "l2h/loss.hpp"
#include "l2h/net.hpp"
#include "l2h/render.hpp"
#include "l2h/synth.hpp"
#include "l2h/train.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace l2h::acceptance {
namespace {

using testing::random_tensor;
using testing::rel_err;

// ---- pinned tolerances and targets
constexpr double kOaPercent = 73.61, kOaTolPp = 0.01;
constexpr double kKappa = 0.6595, kKappaTol = 0.0005;
constexpr double kPaTcPercent = 79.53, kPaTcTolPp = 0.01;
constexpr double kMetricsSeconds = 1.0;

constexpr double kCeWorkedTol = 1e-9;
constexpr double kCeGradTol = 1e-6;
constexpr int kCeSeeds = 100;

constexpr double kDvaWorked = 0.1, kDvaWorkedTol = 1e-12;
constexpr double kDvaGradTol = 1e-5;
constexpr int kDvaSeeds = 20;

constexpr double kNetGradTol = 1e-4;
constexpr double kNetGradSeconds = 120.0;

constexpr double kFdStep = 1e-6;
constexpr double kRelFloor = 1e-6;

constexpr int kFusionTriplets = 200;
constexpr int kFusionSide = 32;
constexpr double kStableDelta = 0.3;
constexpr double kStableSigmas = 3.0;

constexpr int kSeamSide = 600;
constexpr int kSeamTile = 256;

constexpr double kMinOa = 0.90;
constexpr int kMaxEpochs = 20;
constexpr double kPipelineSeconds = 15.0 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs a shell command with stdout captured; stderr goes to `log`.
std::pair<int, std::string> run(const std::string& cmd, const fs::path& log) {
  const std::string full = cmd + " 2>>" + quote(log.string());
  FILE* p = popen(full.c_str(), "r");
  if (!p) return {-1, {}};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Context {
  std::string cli;
  fs::path matrix;
  fs::path config;
  fs::path work;
  fs::path self;
  fs::path log() const { return work / "subprocess.log"; }
};

// ---------------------------------------------------------------- 1

Outcome national_metrics(const Context& ctx) {
  const fs::path out = ctx.work / "metrics.json";
  fs::remove(out);
  const auto t0 = std::chrono::steady_clock::now();
  auto [code, text] = run(quote(ctx.cli) + " assess metrics --matrix " + quote(ctx.matrix.string()) + " --out " +
                              quote(out.string()),
                          ctx.log());
  const double secs = seconds_since(t0);
  if (code != 0 || !fs::exists(out)) return {false, "assess metrics exited " + std::to_string(code)};
  const auto j = json::parse(read_file(out));
  const double oa = j["overall_accuracy"].get<double>() * 100.0;
  const double kappa = j["kappa"].get<double>();
  double pa_tc = NAN;
  for (const auto& c : j["per_class"])
    if (c["class"] == "TC" && !c["map_accuracy"].is_null()) pa_tc = c["map_accuracy"].get<double>() * 100.0;
  const bool ok = std::abs(oa - kOaPercent) <= kOaTolPp && std::abs(kappa - kKappa) <= kKappaTol &&
                  std::abs(pa_tc - kPaTcPercent) <= kPaTcTolPp && secs < kMetricsSeconds;
  return {ok, "OA " + fmt_double("%.4f", oa) + "% kappa " + fmt_double("%.6f", kappa) + " PA(TC) " +
                  fmt_double("%.4f", pa_tc) + "% in " + fmt_double("%.3f", secs) + " s"};
}

// ---------------------------------------------------------------- 2

LabelPatch random_labels(int w, int h, int L, std::mt19937_64& rng) {
  LabelPatch p{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (auto& v : p.labels) v = static_cast<std::uint8_t>(1 + rng() % L);
  return p;
}

Tensor<double> softmax_of(const Tensor<double>& logits) {
  Tensor<double> cp;
  softmax_channels(logits, cp);
  return cp;
}

Outcome masked_ce_oracle(const Context&) {
  Tensor<double> cp(2, 1, 2);
  cp.at(0, 0, 0) = 0.8;
  cp.at(1, 0, 0) = 0.2;
  cp.at(0, 0, 1) = 0.6;
  cp.at(1, 0, 1) = 0.4;
  LabelPatch two{2, 1, {1, 1}};
  LossConfig wc;
  wc.tau = 0.7;  // first pixel confident, second vague
  const auto mask = cas_select(cp, two, wc);
  const double worked = masked_ce(cp, two, mask).loss;
  const double worked_err = std::abs(worked - -std::log(0.8));

  double worst = 0.0;
  for (int seed = 0; seed < kCeSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    auto logits = random_tensor<double>(2, 3, 3, 1000 + seed, -2, 2);
    const auto labels = random_labels(3, 3, 2, rng);
    LossConfig cfg;
    cfg.tau = 0.55;
    auto m = cas_select(softmax_of(logits), labels, cfg);
    if (m.confident == 0) m = all_labeled(labels);
    const auto r = masked_ce(softmax_of(logits), labels, m);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      auto up = logits, down = logits;
      up.data[i] += kFdStep;
      down.data[i] -= kFdStep;
      const double fd =
          (masked_ce(softmax_of(up), labels, m).loss - masked_ce(softmax_of(down), labels, m).loss) / (2 * kFdStep);
      worst = std::max(worst, rel_err(fd, r.grad_logits.data[i], kRelFloor));
    }
  }
  return {mask.confident == 1 && worked_err <= kCeWorkedTol && worst < kCeGradTol,
          "worked example err " + fmt_double("%.2e", worked_err) + ", worst gradient rel err " +
              fmt_double("%.2e", worst) + " over " + std::to_string(kCeSeeds) + " seeds"};
}

// ---------------------------------------------------------------- 3

Outcome dva_oracle(const Context&) {
  std::vector<Tensor<double>> f{Tensor<double>(2, 1, 2)};
  f[0].at(0, 0, 0) = 1.0;
  f[0].at(1, 0, 1) = 1.0;
  ConfidenceMask m;
  m.width = 2;
  m.height = 1;
  m.area = {Area::Confident, Area::Vague};
  m.assigned = {1, 1};
  m.confident = m.vague = 1;
  const double worked_err = std::abs(dva_loss(f, m, 1, LossConfig{}).loss - kDvaWorked);

  double worst = 0.0;
  for (int seed = 0; seed < kDvaSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor<double>> feats;
    for (int b = 0; b < 2; ++b) feats.push_back(random_tensor<double>(3 + b, 4, 4, rng()));
    ConfidenceMask mask;
    mask.width = mask.height = 4;
    mask.area.assign(16, Area::Excluded);
    mask.assigned.assign(16, 0);
    for (int p = 0; p < 16; ++p) {
      const int k = static_cast<int>(rng() % 5);
      if (k == 0) continue;
      mask.area[p] = k <= 2 ? Area::Confident : Area::Vague;
      mask.assigned[p] = static_cast<std::uint8_t>(1 + rng() % 3);
      (k <= 2 ? mask.confident : mask.vague)++;
    }
    const LossConfig cfg;
    const auto r = dva_loss(feats, mask, 3, cfg);
    for (std::size_t b = 0; b < feats.size(); ++b)
      for (std::size_t i = 0; i < feats[b].size(); ++i) {
        auto up = feats, down = feats;
        up[b].data[i] += kFdStep;
        down[b].data[i] -= kFdStep;
        const double fd = (dva_loss(up, mask, 3, cfg).loss - dva_loss(down, mask, 3, cfg).loss) / (2 * kFdStep);
        worst = std::max(worst, rel_err(fd, r.grad_features[b].data[i], kRelFloor));
      }
  }
  return {worked_err <= kDvaWorkedTol && worst < kDvaGradTol,
          "worked example err " + fmt_double("%.2e", worked_err) + ", worst gradient rel err " +
              fmt_double("%.2e", worst)};
}

// ---------------------------------------------------------------- 4

Outcome backbone_gradients(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  NetConfig net;
  net.blocks = 2;
  net.branch_channels = {4, 2, 2};
  net.input_channels = 3;
  net.num_classes = 3;
  auto params = init_params<double>(net, 21);
  for (auto& l : params.layers)
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.03 * static_cast<double>(static_cast<int>(i % 5) - 2);
  const auto image = random_tensor<double>(3, 8, 8, 22);
  std::mt19937_64 rng(23);
  LabelPatch labels{8, 8, std::vector<std::uint8_t>(64)};
  for (auto& v : labels.labels) v = rng() % 6 == 0 ? 0 : static_cast<std::uint8_t>(1 + rng() % 3);

  // Threshold at the median peak so CA and VA are both populated; the mask is
  // then frozen, which keeps the loss smooth under perturbation.
  auto base = forward(params, net, image);
  std::vector<double> peaks;
  for (std::size_t p = 0; p < 64; ++p) {
    if (!labels.labels[p]) continue;
    double peak = 0;
    for (int l = 0; l < 3; ++l) peak = std::max(peak, base.cp.data[l * 64 + p]);
    peaks.push_back(peak);
  }
  std::sort(peaks.begin(), peaks.end());
  LossConfig lc;
  lc.require_agreement = false;
  lc.tau = peaks[peaks.size() / 2];
  lc.gamma = 0.3;
  const auto mask = cas_select(base.cp, labels, lc);
  const auto res = l2h_loss_masked(base.cp, base.features, labels, mask, lc);
  const auto grads = backward(params, net, image, base, res.grad_logits, res.grad_features);

  std::vector<double*> ps;
  params.for_each([&](double& v) { ps.push_back(&v); });
  std::vector<double> gs;
  grads.for_each([&](const double& v) { gs.push_back(v); });
  auto loss_at = [&] {
    auto f = forward(params, net, image);
    return l2h_loss_masked(f.cp, f.features, labels, mask, lc).loss;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double saved = *ps[i];
    *ps[i] = saved + kFdStep;
    const double up = loss_at();
    *ps[i] = saved - kFdStep;
    const double down = loss_at();
    *ps[i] = saved;
    worst = std::max(worst, rel_err((up - down) / (2 * kFdStep), gs[i], kRelFloor));
  }
  const double secs = seconds_since(t0);
  const bool ok = ps.size() == gs.size() && res.dva > 0.0 && mask.confident > 0 && mask.vague > 0 &&
                  worst < kNetGradTol && secs < kNetGradSeconds;
  return {ok, std::to_string(ps.size()) + " parameters, worst rel err " + fmt_double("%.2e", worst) + " (CA " +
                  std::to_string(mask.confident) + ", VA " + std::to_string(mask.vague) + ") in " +
                  fmt_double("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 5

// Closed unit square of cell (cx, cy) against a segment (Liang-Barsky).
bool segment_meets_cell(double x0, double y0, double x1, double y1, int cx, int cy) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = x1 - x0, dy = y1 - y0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {x0 - cx, cx + 1 - x0, y0 - cy, cy + 1 - y0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
    if (t0 > t1) return false;
  }
  return true;
}

struct FusionCase {
  std::array<RasterGrid, 3> products;
  std::array<HarmonizationTable, 3> tables;
  VectorLines roads;
  int width_px = 1;
  RoadMode mode = RoadMode::Override;
};

FusionCase random_fusion_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = kFusionSide;
  const GeoRef geo{500.0, 900.0, 10.0, -10.0, "T"};
  FusionCase fc;
  for (int k = 0; k < 3; ++k) {
    // Each product has its own legend: source codes 40+, mapped onto a few
    // target classes so agreement is common.
    HarmonizationTable t{"p" + std::to_string(k), {}};
    const int codes = 3 + static_cast<int>(rng() % 4);
    for (int s = 0; s < codes; ++s) t.mapping[40 + s] = static_cast<std::uint8_t>(rng() % 4);
    fc.tables[k] = t;
    fc.products[k] = RasterGrid::make_classes(n, n, geo, 0, 255.0);
    for (auto& v : fc.products[k].classes()) v = rng() % 9 == 0 ? 255 : static_cast<std::uint8_t>(40 + rng() % codes);
  }
  std::uniform_real_distribution<double> ux(geo.origin_x - 40.0, geo.origin_x + 10.0 * n + 40.0);
  std::uniform_real_distribution<double> uy(geo.origin_y - 10.0 * n - 40.0, geo.origin_y + 40.0);
  const int lines = static_cast<int>(rng() % 4);
  for (int l = 0; l < lines; ++l) {
    Polyline pl;
    const int pts = 2 + static_cast<int>(rng() % 3);
    for (int i = 0; i < pts; ++i) pl.points.push_back({ux(rng), uy(rng)});
    fc.roads.lines.push_back(pl);
  }
  fc.width_px = 1 + static_cast<int>(rng() % 4);
  fc.mode = rng() % 2 ? RoadMode::Override : RoadMode::FillOnly;
  return fc;
}

// Per-pixel reimplementation of harmonize -> intersect -> road overlay.
std::vector<std::uint8_t> brute_force_fuse(const FusionCase& fc) {
  const int n = kFusionSide;
  const auto& geo = fc.products[0].georef();
  const int r = fc.width_px / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int v[3];
      for (int k = 0; k < 3; ++k) {
        const int raw = fc.products[k].class_at(x, y);
        v[k] = raw == 255 ? 0 : fc.tables[k].mapping.at(raw);
      }
      int label = v[0] == v[1] && v[1] == v[2] ? v[0] : 0;
      bool road = false;
      for (const auto& pl : fc.roads.lines)
        for (std::size_t i = 0; i + 1 < pl.points.size() && !road; ++i) {
          const double ax = (pl.points[i][0] - geo.origin_x) / geo.pixel_size_x;
          const double ay = (pl.points[i][1] - geo.origin_y) / geo.pixel_size_y;
          const double bx = (pl.points[i + 1][0] - geo.origin_x) / geo.pixel_size_x;
          const double by = (pl.points[i + 1][1] - geo.origin_y) / geo.pixel_size_y;
          for (int cy = std::max(0, y - r); cy <= std::min(n - 1, y + r) && !road; ++cy)
            for (int cx = std::max(0, x - r); cx <= std::min(n - 1, x + r) && !road; ++cx)
              road = segment_meets_cell(ax, ay, bx, by, cx, cy);
        }
      if (road && (fc.mode == RoadMode::Override || label == 0)) label = cls::kTR;
      out[static_cast<std::size_t>(y) * n + x] = static_cast<std::uint8_t>(label);
    }
  return out;
}

ordered_json fusion_result() {
  std::size_t mismatched = 0, cases_with_roads = 0;
  std::string digest;
  std::uint64_t stable = 0, total = 0;
  for (int t = 0; t < kFusionTriplets; ++t) {
    const auto fc = random_fusion_case(7000 + t);
    const auto got = fuse(fc.products[0], fc.products[1], fc.products[2], fc.tables, fc.roads, fc.width_px, fc.mode);
    const auto want = brute_force_fuse(fc);
    const auto px = got.labels.classes();
    for (std::size_t i = 0; i < want.size(); ++i) mismatched += px[i] != want[i];
    cases_with_roads += got.report.road_pixels > 0;
    stable += got.report.stable_pixels;
    total += got.report.total_pixels;
    digest = sha256_hex(digest + sha256_hex(px));
  }

  SceneSpec spec;
  spec.label_noise = kStableDelta;
  spec.seed = 11;
  const auto scene = generate(spec);
  const auto pre = intersect_products(scene.products[0], scene.products[1], scene.products[2]);
  std::size_t kept = 0;
  for (auto v : pre.classes()) kept += v != cls::kUnlabeled;
  const double d = spec.label_noise, K = spec.num_classes;
  const double p = std::pow(1 - d, 3) + std::pow(d, 3) / ((K - 1) * (K - 1));
  const double n = static_cast<double>(pre.pixel_count());
  const double se = std::sqrt(p * (1 - p) / n);

  ordered_json j;
  j["triplets"] = kFusionTriplets;
  j["mismatched_pixels"] = mismatched;
  j["cases_with_roads"] = cases_with_roads;
  j["labeled_pixels"] = stable;
  j["total_pixels"] = total;
  j["labels_sha256"] = digest;
  j["stable_fraction"] = static_cast<double>(kept) / n;
  j["expected_fraction"] = p;
  j["standard_error"] = se;
  return j;
}

Outcome fusion_oracle(const Context&) {
  const auto j = fusion_result();
  const double z = (j["stable_fraction"].get<double>() - j["expected_fraction"].get<double>()) /
                   j["standard_error"].get<double>();
  const bool ok = j["mismatched_pixels"] == 0 && std::abs(z) <= kStableSigmas;
  return {ok, std::to_string(j["mismatched_pixels"].get<std::size_t>()) + " mismatched pixels over " +
                  std::to_string(kFusionTriplets) + " triplets; stable fraction " +
                  fmt_double("%.5f", j["stable_fraction"].get<double>()) + " vs " +
                  fmt_double("%.5f", j["expected_fraction"].get<double>()) + " (z = " + fmt_double("%+.2f", z) + ")"};
}

// ---------------------------------------------------------------- 6

ordered_json seam_result() {
  SceneSpec spec;
  spec.width = spec.height = kSeamSide;
  spec.seed = 3;
  const auto scene = generate(spec);
  NetConfig net;
  net.num_classes = spec.num_classes;
  const auto params = init_params<float>(net, 5);
  const int R = receptive_field(net);

  const auto whole = infer(params, net, to_tensor(scene.image));
  const auto tiled = predict_tiled(params, net, scene.image, MosaicPolicy{kSeamTile, 2 * R, Blend::CropCenter});
  const std::size_t plane = whole.plane_size();
  std::size_t checked = 0, differing = 0;
  for (int y = R; y < kSeamSide - R; ++y)
    for (int x = R; x < kSeamSide - R; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * kSeamSide + x;
      int best = 0;
      float peak = whole.data[p];
      for (int l = 1; l < net.num_classes; ++l)
        if (whole.data[l * plane + p] > peak) {
          peak = whole.data[l * plane + p];
          best = l;
        }
      ++checked;
      differing += tiled.classes.class_at(x, y) != best + 1 || tiled.confidence.value_at(0, x, y) != peak;
    }
  const auto conf = tiled.confidence.values();
  ordered_json j;
  j["receptive_field"] = R;
  j["overlap"] = 2 * R;
  j["checked_pixels"] = checked;
  j["differing_pixels"] = differing;
  j["classes_sha256"] = sha256_hex(tiled.classes.classes());
  j["confidence_sha256"] = sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(conf.data()), conf.size() * sizeof(float)));
  return j;
}

Outcome seam_exactness(const Context&) {
  const auto j = seam_result();
  return {j["differing_pixels"] == 0 && j["checked_pixels"].get<std::size_t>() > 0,
          std::to_string(j["differing_pixels"].get<std::size_t>()) + " of " +
              std::to_string(j["checked_pixels"].get<std::size_t>()) + " interior pixels differ (tile " +
              std::to_string(kSeamTile) + ", overlap " + std::to_string(j["overlap"].get<int>()) + ")"};
}

// ---------------------------------------------------------------- 7

Outcome pipeline_run(const Context& ctx) {
  const auto cfg = KeyValueConfig::load(ctx.config);
  const bool scene_ok = cfg.get_int("width", 0) == 1000 && cfg.get_int("height", 0) == 1000 &&
                        cfg.get_int("num_classes", 0) == 5 && cfg.get_double("label_noise", 0) == 0.2 &&
                        cfg.get_double("separation", 3.0) >= 3.0 && cfg.get_int("epochs", 99) <= kMaxEpochs;
  if (!scene_ok) return {false, "config does not describe the easy scene within the epoch budget"};

  std::array<std::string, 2> hashes;
  std::array<double, 2> secs{};
  ordered_json summary;
  for (int i = 0; i < 2; ++i) {
    const fs::path out = ctx.work / ("pipeline_" + std::to_string(i));
    fs::remove_all(out);
    const auto t0 = std::chrono::steady_clock::now();
    auto [code, text] = run(quote(ctx.cli) + " pipeline --config " + quote(ctx.config.string()) + " --out " +
                                quote(out.string()),
                            ctx.log());
    secs[i] = seconds_since(t0);
    if (code != 0) return {false, "pipeline run " + std::to_string(i + 1) + " exited " + std::to_string(code)};
    hashes[i] = json::parse(read_file(out / "run_manifest.json"))["content_hash"].get<std::string>();
    if (i == 0) summary = ordered_json::parse(read_file(out / "summary.json"));
  }
  const double oa = summary["overall_accuracy"].get<double>();
  const double first = summary["first_epoch_ce"].get<double>();
  const double last = summary["last_epoch_ce"].get<double>();
  const int epochs = summary["epochs"].get<int>();
  const bool ok = oa >= kMinOa && last < first && epochs <= kMaxEpochs && secs[0] < kPipelineSeconds &&
                  secs[1] < kPipelineSeconds && hashes[0] == hashes[1];
  return {ok, "OA " + fmt_double("%.4f", oa) + ", CE " + fmt_double("%.4f", first) + " -> " + fmt_double("%.4f", last) +
                  " over " + std::to_string(epochs) + " epochs, runs " + fmt_double("%.0f", secs[0]) + " s / " +
                  fmt_double("%.0f", secs[1]) + " s, content hash " + (hashes[0] == hashes[1] ? "identical" : "differs")};
}

// ---------------------------------------------------------------- 8

Outcome thread_determinism(const Context& ctx) {
  std::vector<std::string> differs;
  // Metrics through the CLI.
  std::array<std::string, 2> metrics;
  const int threads[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const fs::path out = ctx.work / ("metrics_t" + std::to_string(threads[i]) + ".json");
    auto [code, text] = run(quote(ctx.cli) + " --threads " + std::to_string(threads[i]) + " assess metrics --matrix " +
                                quote(ctx.matrix.string()) + " --out " + quote(out.string()) + " >/dev/null",
                            ctx.log());
    if (code != 0) return {false, "assess metrics exited " + std::to_string(code)};
    metrics[i] = read_file(out);
  }
  if (metrics[0] != metrics[1]) differs.push_back("metrics");
  // Fusion and seam results from this binary at each thread count.
  for (int c : {5, 6}) {
    std::array<std::string, 2> out;
    for (int i = 0; i < 2; ++i) {
      auto [code, text] = run(quote(ctx.self.string()) + " --emit " + std::to_string(c) + " --threads " +
                                  std::to_string(threads[i]),
                              ctx.log());
      if (code != 0 || text.empty()) return {false, "emit " + std::to_string(c) + " failed"};
      out[i] = text;
    }
    if (out[0] != out[1]) differs.push_back(c == 5 ? "fusion" : "seams");
  }
  std::string detail = differs.empty() ? "metrics, fusion and seam JSON identical at 1 and 8 threads" : "differs:";
  for (const auto& d : differs) detail += " " + d;
  return {differs.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const Context&)> run;
};

}  // namespace
}  // namespace l2h::acceptance

int main(int argc, char** argv) {
  using namespace l2h::acceptance;
  CLI::App app{"Acceptance suite", "l2h_acceptance"};
  Context ctx;
  std::vector<int> only;
  int emit = 0, threads = 0;
  app.add_option("--cli", ctx.cli, "Path to the l2h executable");
  app.add_option("--matrix", ctx.matrix, "National confusion counts CSV");
  app.add_option("--config", ctx.config, "Easy-scene pipeline config");
  app.add_option("--work", ctx.work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--emit", emit, "Print the JSON result of criterion 5 or 6 and exit")->check(CLI::IsMember({5, 6}));
  app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (emit == 5) {
      std::cout << fusion_result().dump() << "\n";
      return 0;
    }
    if (emit == 6) {
      std::cout << seam_result().dump() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  if (ctx.cli.empty() || ctx.matrix.empty() || ctx.config.empty() || ctx.work.empty()) {
    std::cerr << "--cli, --matrix, --config and --work are required\n";
    return 2;
  }
  fs::create_directories(ctx.work);
  ctx.work = fs::absolute(ctx.work);
  ctx.self = fs::read_symlink("/proc/self/exe");
  fs::remove(ctx.log());

  const std::vector<Criterion> criteria{
      {1, "confusion-matrix metrics", national_metrics},
      {2, "masked cross-entropy", masked_ce_oracle},
      {3, "vague-area loss", dva_oracle},
      {4, "backbone gradients", backbone_gradients},
      {5, "label fusion", fusion_oracle},
      {6, "tile seams", seam_exactness},
      {7, "end-to-end pipeline", pipeline_run},
      {8, "thread determinism", thread_determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %d  %-26s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
