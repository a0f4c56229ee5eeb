#include <omp.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "l2h/assess.hpp"
#include "l2h/fusion.hpp"
#include "l2h/render.hpp"
#include "l2h/synth.hpp"
#include "l2h/train.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace l2h::cli {
namespace {

struct Scene3 {
  std::string a, b, c;
};

std::string report_json(const FusionReport& r, const ClassScheme& scheme) {
  ordered_json j;
  j["total_pixels"] = r.total_pixels;
  j["stable_pixels"] = r.stable_pixels;
  j["unlabeled_pixels"] = r.unlabeled_pixels;
  j["road_pixels"] = r.road_pixels;
  ordered_json counts;
  counts["UNLABELED"] = r.class_counts[0];
  for (const auto& c : scheme.classes()) counts[c.name] = r.class_counts[c.id];
  j["class_counts"] = std::move(counts);
  return j.dump(2) + "\n";
}

// Infers the legend from a confusion CSV header: the first n standard
// classes when the header lists exactly those, else the full legend.
ClassScheme scheme_for_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos && line[0] != '#') break;
  const int cols = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (cols >= 1 && cols <= ClassScheme::standard().size()) {
    auto scheme = ClassScheme::first(cols);
    if (format_confusion_csv(ConfusionMatrix(scheme)).substr(0, line.size()) ==
        line.substr(0, line.find_last_not_of(" \r") + 1))
      return scheme;
  }
  return ClassScheme::standard();
}

int max_class(const RasterGrid& g) {
  int m = 0;
  for (auto v : g.classes())
    if (v != g.nodata()) m = std::max<int>(m, v);
  return m;
}

MosaicPolicy mosaic_from(const KeyValueConfig& cfg) {
  MosaicPolicy p;
  p.tile = static_cast<int>(cfg.get_int("tile", p.tile));
  p.overlap = static_cast<int>(cfg.get_int("overlap", p.overlap));
  const auto blend = cfg.get_string("blend", "crop-center");
  if (blend == "crop-center")
    p.blend = Blend::CropCenter;
  else if (blend == "prob-average")
    p.blend = Blend::ProbAverage;
  else
    throw ConfigError("blend must be crop-center or prob-average");
  return p;
}

RoadMode road_mode_from(const KeyValueConfig& cfg) {
  const auto mode = cfg.get_string("road_mode", "override");
  if (mode == "override") return RoadMode::Override;
  if (mode == "fill-only") return RoadMode::FillOnly;
  throw ConfigError("road_mode must be override or fill-only");
}

struct EpochCe {
  double first = 0.0;
  double last = 0.0;
};

EpochCe epoch_ce(const std::vector<StepLog>& log) {
  std::map<int, std::pair<double, int>> by_epoch;
  for (const auto& s : log) {
    auto& e = by_epoch[s.epoch];
    e.first += s.ce;
    ++e.second;
  }
  if (by_epoch.empty()) return {};
  auto mean = [](const std::pair<double, int>& e) { return e.first / e.second; };
  return {mean(by_epoch.begin()->second), mean(by_epoch.rbegin()->second)};
}

TrainResult run_training(const std::vector<TrainingPair>& pairs, const NetConfig& net, const TrainConfig& tc,
                         const fs::path& log_path) {
  spdlog::info("training {} patches of {} px, {} epochs", pairs.size(), tc.patch_size, tc.epochs);
  std::string jsonl;
  int current_epoch = -1;
  auto result = train(pairs, net, tc, [&](const StepLog& s) {
    jsonl += to_jsonl(s) + "\n";
    if (s.epoch != current_epoch) {
      current_epoch = s.epoch;
      spdlog::info("epoch {}/{}", s.epoch + 1, tc.epochs);
    }
    spdlog::debug("step {} ce {:.5f} dva {:.5f} ca {:.3f}", s.step, s.ce, s.dva, s.ca_fraction);
  });
  write_text(log_path, jsonl);
  return result;
}

void write_prediction(const Prediction& pred, int num_classes, const fs::path& map_path,
                      const std::optional<fs::path>& confidence_path, const fs::path& png_path,
                      const fs::path& legend_path, Manifest& manifest) {
  const auto scheme = ClassScheme::first(num_classes);
  write_grid(map_path, pred.classes);
  manifest.output(map_path.filename().string(), map_path);
  if (confidence_path) {
    write_grid(*confidence_path, pred.confidence);
    manifest.output(confidence_path->filename().string(), *confidence_path);
  }
  write_class_png(png_path, pred.classes, scheme);
  manifest.output(png_path.filename().string(), png_path);
  write_text(legend_path, legend_json(scheme) + "\n");
  manifest.output(legend_path.filename().string(), legend_path);
}

// ------------------------------------------------------------------ commands

int cmd_synth(const std::string& spec_path, const std::vector<std::string>& sets, const fs::path& out) {
  auto cfg = spec_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(spec_path);
  apply_overrides(cfg, sets);
  const auto spec = SceneSpec::from_config(cfg);
  Manifest manifest("synth", cfg);
  manifest.seed("scene", spec.seed);
  if (!spec_path.empty()) manifest.input("spec", spec_path);
  spdlog::info("generating {}x{} scene with {} classes", spec.width, spec.height, spec.num_classes);
  const auto scene = generate(spec);
  fs::create_directories(out);
  auto put = [&](const std::string& name, const RasterGrid& g) {
    write_grid(out / name, g);
    manifest.output(name, out / name);
  };
  put("image.lcr", scene.image);
  put("truth.lcr", scene.truth);
  put("product_a.lcr", scene.products[0]);
  put("product_b.lcr", scene.products[1]);
  put("product_c.lcr", scene.products[2]);
  write_vector_lines(out / "roads.txt", scene.roads);
  manifest.output("roads.txt", out / "roads.txt");
  manifest.write(out, omp_get_max_threads());
  return 0;
}

int cmd_fuse(const Scene3& products, const Scene3& tables, const std::string& roads, int width_px,
             bool fill_only, const fs::path& out, const std::string& report) {
  KeyValueConfig cfg;
  cfg.set("width_px", std::to_string(width_px));
  cfg.set("road_mode", fill_only ? "fill-only" : "override");
  Manifest manifest("fuse", cfg);
  const std::array<std::string, 3> paths{products.a, products.b, products.c};
  const std::array<std::string, 3> table_paths{tables.a, tables.b, tables.c};
  std::array<RasterGrid, 3> grids;
  std::array<HarmonizationTable, 3> tabs;
  const char* names[] = {"a", "b", "c"};
  for (int i = 0; i < 3; ++i) {
    grids[i] = read_grid(paths[i]);
    manifest.input(std::string("product_") + names[i], paths[i]);
    if (table_paths[i].empty()) {
      tabs[i] = HarmonizationTable::identity(ClassScheme::standard().size());
    } else {
      tabs[i] = read_harmonization_table(table_paths[i]);
      manifest.input(std::string("table_") + names[i], table_paths[i]);
    }
  }
  VectorLines lines;
  if (!roads.empty()) {
    lines = read_vector_lines(roads);
    manifest.input("roads", roads);
  }
  auto result = fuse(grids[0], grids[1], grids[2], tabs, lines, width_px, fill_only ? RoadMode::FillOnly : RoadMode::Override);
  spdlog::info("stable {} / {} pixels, {} road pixels", result.report.stable_pixels, result.report.total_pixels,
               result.report.road_pixels);
  write_grid(out, result.labels);
  manifest.output(out.filename().string(), out);
  const fs::path report_path = report.empty() ? out.parent_path() / "fusion_report.json" : fs::path(report);
  write_text(report_path, report_json(result.report, ClassScheme::standard()));
  manifest.output(report_path.filename().string(), report_path);
  manifest.write(out.parent_path().empty() ? fs::path(".") : out.parent_path(), omp_get_max_threads());
  return 0;
}

int cmd_train(const std::string& image_path, const std::string& labels_path, const std::string& config_path,
              const std::vector<std::string>& sets, const fs::path& out, const std::string& log) {
  auto cfg = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
  apply_overrides(cfg, sets);
  const auto tc = TrainConfig::from_config(cfg);
  Manifest manifest("train", cfg);
  manifest.seed("train", tc.seed);
  if (!config_path.empty()) manifest.input("config", config_path);
  const auto image = read_grid(image_path);
  const auto labels = read_grid(labels_path);
  manifest.input("image", image_path);
  manifest.input("labels", labels_path);
  auto net = net_config_from(cfg, std::max(2, max_class(labels)));
  net.input_channels = image.bands();
  validate_classes(labels, ClassScheme::first(net.num_classes));
  const auto pairs = make_pairs(image, labels, tc);
  const fs::path log_path = log.empty() ? out.parent_path() / "train_log.jsonl" : fs::path(log);
  auto result = run_training(pairs, net, tc, log_path);
  save_checkpoint(out, net, result.params);
  manifest.output(out.filename().string(), out);
  manifest.output(log_path.filename().string(), log_path);
  manifest.write(out.parent_path().empty() ? fs::path(".") : out.parent_path(), omp_get_max_threads());
  return 0;
}

int cmd_predict(const std::string& model, const std::string& image_path, const fs::path& out,
                const std::string& confidence, const std::string& png, const std::string& legend,
                const std::vector<std::string>& sets) {
  KeyValueConfig cfg;
  apply_overrides(cfg, sets);
  const auto policy = mosaic_from(cfg);
  Manifest manifest("predict", cfg);
  const auto ck = load_checkpoint(model);
  const auto image = read_grid(image_path);
  manifest.input("model", model);
  manifest.input("image", image_path);
  spdlog::info("predicting {}x{} with tile {}", image.width(), image.height(), policy.tile);
  const auto pred = predict_tiled(ck.params, ck.config, image, policy);
  const fs::path stem = out.parent_path() / out.stem();
  write_prediction(pred, ck.config.num_classes, out,
                   confidence.empty() ? std::nullopt : std::optional<fs::path>(confidence),
                   png.empty() ? fs::path(stem.string() + ".png") : fs::path(png),
                   legend.empty() ? fs::path(stem.string() + ".legend.json") : fs::path(legend), manifest);
  manifest.write(out.parent_path().empty() ? fs::path(".") : out.parent_path(), omp_get_max_threads());
  return 0;
}

int cmd_assess_matrix(const std::string& map_path, const std::string& ref_path, int points, std::uint64_t seed,
                      const std::string& strategy, int classes, const std::string& out) {
  const auto map = read_grid(map_path);
  const auto ref = read_grid(ref_path);
  const int L = classes > 0 ? classes : std::max(max_class(map), max_class(ref));
  const auto scheme = ClassScheme::first(std::max(1, L));
  ConfusionMatrix cm(scheme);
  if (points > 0) {
    SampleStrategy s;
    if (strategy == "uniform")
      s = SampleStrategy::Uniform;
    else if (strategy == "stratified")
      s = SampleStrategy::StratifiedByClass;
    else
      throw ConfigError("strategy must be uniform or stratified");
    auto pts = sample_points(map, points, seed, s);
    evaluate_points(pts, map, ref);
    std::erase_if(pts, [&](const SamplePoint& p) { return p.reference_class == cls::kUnlabeled || p.reference_class == ref.nodata(); });
    cm = confusion(pts, scheme);
  } else {
    cm = confusion_from_grids(map, ref, scheme);
  }
  const auto csv = format_confusion_csv(cm);
  if (out.empty())
    std::cout << csv;
  else
    write_text(out, csv);
  return 0;
}

int cmd_assess_metrics(const std::string& matrix, const std::string& out) {
  const auto text = read_text(matrix);
  const auto scheme = scheme_for_matrix(text);
  const auto m = metrics(parse_confusion_csv(text, scheme));
  const auto json = metrics_json(m, scheme) + "\n";
  if (!out.empty()) write_text(out, json);
  std::printf("OA %.2f%%\nKappa %.4f\n", m.overall_accuracy * 100.0, m.kappa);
  for (int k = 0; k < scheme.size(); ++k) {
    auto pct = [](const std::optional<double>& v) {
      return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("n/a");
    };
    std::printf("%-6s map %s  reference %s\n", scheme.info(k + 1).name.c_str(), pct(m.map_accuracy[k]).c_str(),
                pct(m.reference_accuracy[k]).c_str());
  }
  return 0;
}

int cmd_assess_areas(const std::string& map_path, const std::string& regions_path, const std::string& ref_csv,
                     const std::string& out) {
  const auto map = read_grid(map_path);
  const auto regions = read_grid(regions_path);
  const auto& scheme = ClassScheme::standard();
  const auto ref = ref_csv.empty() ? ReferenceFractions{} : parse_reference_csv(read_text(ref_csv), scheme);
  const auto csv = format_misestimation_csv(area_misestimation(map, regions, ref, scheme), scheme);
  if (out.empty())
    std::cout << csv;
  else
    write_text(out, csv);
  return 0;
}

int cmd_net_inspect(const std::string& model, const std::string& config_path, int classes) {
  NetConfig net;
  if (!model.empty()) {
    net = load_checkpoint(model).config;
  } else {
    const auto cfg = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
    net = net_config_from(cfg, classes);
  }
  std::cout << describe(net);
  return 0;
}

int cmd_pipeline(const std::string& config_path, const std::vector<std::string>& sets, const fs::path& out) {
  auto cfg = KeyValueConfig::load(config_path);
  apply_overrides(cfg, sets);
  // `seed` drives training; the scene takes `scene_seed`.
  auto spec = SceneSpec::from_config(cfg);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("scene_seed", static_cast<long long>(spec.seed)));
  const auto tc = TrainConfig::from_config(cfg);
  const auto policy = mosaic_from(cfg);
  auto net = net_config_from(cfg, spec.num_classes);
  if (net.num_classes != spec.num_classes) throw ConfigError("num_classes must match the scene");
  const int width_px = static_cast<int>(cfg.get_int("road_width_px", 1));
  const auto mode = road_mode_from(cfg);

  Manifest manifest("pipeline", cfg);
  manifest.input("config", config_path);
  manifest.seed("scene", spec.seed);
  manifest.seed("train", tc.seed);
  fs::create_directories(out / "scene");

  spdlog::info("synth: {}x{}, {} classes, label noise {}", spec.width, spec.height, spec.num_classes, spec.label_noise);
  const auto scene = generate(spec);
  auto put = [&](const std::string& name, const RasterGrid& g) {
    write_grid(out / name, g);
    manifest.output(name, out / name);
  };
  put("scene/image.lcr", scene.image);
  put("scene/truth.lcr", scene.truth);
  put("scene/product_a.lcr", scene.products[0]);
  put("scene/product_b.lcr", scene.products[1]);
  put("scene/product_c.lcr", scene.products[2]);
  write_vector_lines(out / "scene/roads.txt", scene.roads);
  manifest.output("scene/roads.txt", out / "scene/roads.txt");

  const auto id = HarmonizationTable::identity(ClassScheme::standard().size());
  const auto fused = fuse(scene.products[0], scene.products[1], scene.products[2], {id, id, id}, scene.roads,
                          width_px, mode);
  spdlog::info("fuse: stable {} / {} label pixels", fused.report.stable_pixels, fused.report.total_pixels);
  put("labels.lcr", fused.labels);
  write_text(out / "fusion_report.json", report_json(fused.report, ClassScheme::first(spec.num_classes)));
  manifest.output("fusion_report.json", out / "fusion_report.json");

  const auto pairs = make_pairs(scene.image, fused.labels, tc);
  const auto result = run_training(pairs, net, tc, out / "train_log.jsonl");
  manifest.output("train_log.jsonl", out / "train_log.jsonl");
  save_checkpoint(out / "model.ckpt", net, result.params);
  manifest.output("model.ckpt", out / "model.ckpt");

  spdlog::info("predict: tile {}", policy.tile);
  const auto pred = predict_tiled(result.params, net, scene.image, policy);
  write_prediction(pred, net.num_classes, out / "map.lcr", out / "confidence.lcr", out / "map.png",
                   out / "legend.json", manifest);

  const auto scheme = ClassScheme::first(spec.num_classes);
  const auto cm = confusion_from_grids(pred.classes, scene.truth, scheme);
  const auto m = metrics(cm);
  write_text(out / "confusion.csv", format_confusion_csv(cm));
  manifest.output("confusion.csv", out / "confusion.csv");
  write_text(out / "metrics.json", metrics_json(m, scheme) + "\n");
  manifest.output("metrics.json", out / "metrics.json");

  const auto ce = epoch_ce(result.log);
  ordered_json summary;
  summary["overall_accuracy"] = m.overall_accuracy;
  summary["kappa"] = m.kappa;
  summary["training_patches"] = pairs.size();
  summary["epochs"] = tc.epochs;
  summary["steps"] = result.log.size();
  summary["first_epoch_ce"] = ce.first;
  summary["last_epoch_ce"] = ce.last;
  summary["stable_fraction"] = static_cast<double>(fused.report.stable_pixels) /
                               static_cast<double>(std::max<std::uint64_t>(1, fused.report.total_pixels));
  write_text(out / "summary.json", summary.dump(2) + "\n");
  manifest.output("summary.json", out / "summary.json");
  manifest.write(out, omp_get_max_threads());
  spdlog::info("OA {:.4f}  Kappa {:.4f}  (content hash {})", m.overall_accuracy, m.kappa,
               manifest.content_hash().substr(0, 16));
  return 0;
}

}  // namespace
}  // namespace l2h::cli

int main(int argc, char** argv) {
  using namespace l2h::cli;
  CLI::App app{"Weakly supervised 1-m land-cover mapping from coarse label products", "l2h"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);

  std::vector<std::string> sets;
  std::string config, out, image, labels, model, log, report, roads, confidence, png, legend;
  Scene3 products, tables;
  int width_px = 1, points = 0, classes = 0;
  bool fill_only = false;
  std::uint64_t seed = 1;
  std::string strategy = "stratified", map_path, reference, matrix, regions, reference_csv;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("--spec", config, "Scene spec file (key = value)");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--set", sets, "Override a spec key (key=value)");

  auto* fuse = app.add_subcommand("fuse", "Harmonize, intersect and overlay roads");
  fuse->add_option("--a", products.a, "First product (.lcr)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--b", products.b, "Second product (.lcr)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--c", products.c, "Third product (.lcr)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--table-a", tables.a, "Crosswalk for the first product")->check(CLI::ExistingFile);
  fuse->add_option("--table-b", tables.b, "Crosswalk for the second product")->check(CLI::ExistingFile);
  fuse->add_option("--table-c", tables.c, "Crosswalk for the third product")->check(CLI::ExistingFile);
  fuse->add_option("--roads", roads, "Road polylines")->check(CLI::ExistingFile);
  fuse->add_option("--width-px", width_px, "Road width in label pixels")->check(CLI::PositiveNumber);
  fuse->add_flag("--fill-only", fill_only, "Roads only fill unlabeled pixels");
  fuse->add_option("--out", out, "Output labels (.lcr)")->required();
  fuse->add_option("--report", report, "Fusion report JSON");

  auto* trn = app.add_subcommand("train", "Train the backbone on fused labels");
  trn->add_option("--image", image, "1-m image (.lcr)")->required()->check(CLI::ExistingFile);
  trn->add_option("--labels", labels, "10-m labels (.lcr)")->required()->check(CLI::ExistingFile);
  trn->add_option("--config", config, "Training config")->check(CLI::ExistingFile);
  trn->add_option("--set", sets, "Override a config key (key=value)");
  trn->add_option("--out", out, "Checkpoint path")->required();
  trn->add_option("--log", log, "Training log (JSONL)");

  auto* pred = app.add_subcommand("predict", "Tiled prediction with a trained checkpoint");
  pred->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  pred->add_option("--image", image, "1-m image (.lcr)")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", out, "Class map (.lcr)")->required();
  pred->add_option("--confidence", confidence, "Max-probability map (.lcr)");
  pred->add_option("--png", png, "Rendered class map");
  pred->add_option("--legend", legend, "Legend JSON");
  pred->add_option("--set", sets, "Mosaic settings: tile, overlap, blend");

  auto* assess = app.add_subcommand("assess", "Accuracy assessment");
  assess->require_subcommand(1);
  auto* am = assess->add_subcommand("matrix", "Confusion matrix of a map against a reference");
  am->add_option("--map", map_path, "Class map (.lcr)")->required()->check(CLI::ExistingFile);
  am->add_option("--reference", reference, "Reference classes (.lcr)")->required()->check(CLI::ExistingFile);
  am->add_option("--points", points, "Sample this many points instead of every pixel");
  am->add_option("--seed", seed, "Sampling seed");
  am->add_option("--strategy", strategy, "uniform or stratified");
  am->add_option("--classes", classes, "Legend size (default: largest class present)");
  am->add_option("--out", out, "Matrix CSV (default: stdout)");
  auto* amet = assess->add_subcommand("metrics", "OA, Kappa and per-class accuracies");
  amet->add_option("--matrix", matrix, "Confusion CSV")->required()->check(CLI::ExistingFile);
  amet->add_option("--out", out, "Metrics JSON");
  auto* aareas = assess->add_subcommand("areas", "Per-region area misestimation");
  aareas->add_option("--map", map_path, "Class map (.lcr)")->required()->check(CLI::ExistingFile);
  aareas->add_option("--regions", regions, "Region IDs (.lcr)")->required()->check(CLI::ExistingFile);
  aareas->add_option("--reference", reference_csv, "Reference fractions CSV")->check(CLI::ExistingFile);
  aareas->add_option("--out", out, "Misestimation CSV (default: stdout)");

  auto* pipe = app.add_subcommand("pipeline", "synth, fuse, train, predict and assess in one run");
  pipe->add_option("--config", config, "Pipeline config")->required()->check(CLI::ExistingFile);
  pipe->add_option("--set", sets, "Override a config key (key=value)");
  pipe->add_option("--out", out, "Output directory")->required();

  auto* net = app.add_subcommand("net", "Network utilities");
  net->require_subcommand(1);
  auto* inspect = net->add_subcommand("inspect", "Print the layer table");
  inspect->add_option("--model", model, "Checkpoint")->check(CLI::ExistingFile);
  inspect->add_option("--config", config, "Config with blocks, branch_channels, num_classes")->check(CLI::ExistingFile);
  inspect->add_option("--classes", classes, "Class count when no config sets it")->default_val(11);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  setup_logging();
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*synth) return cmd_synth(config, sets, out);
    if (*fuse) return cmd_fuse(products, tables, roads, width_px, fill_only, out, report);
    if (*trn) return cmd_train(image, labels, config, sets, out, log);
    if (*pred) return cmd_predict(model, image, out, confidence, png, legend, sets);
    if (*am) return cmd_assess_matrix(map_path, reference, points, seed, strategy, classes, out);
    if (*amet) return cmd_assess_metrics(matrix, out);
    if (*aareas) return cmd_assess_areas(map_path, regions, reference_csv, out);
    if (*pipe) return cmd_pipeline(config, sets, out);
    if (*inspect) return cmd_net_inspect(model, config, classes);
  } catch (const l2h::Error& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
