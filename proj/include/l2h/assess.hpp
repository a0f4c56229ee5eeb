#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "l2h/grid.hpp"

namespace l2h {

// counts[map][ref] with rows = map (predicted) classes and columns =
// reference classes, both indexed from 0 for class ID 1.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(ClassScheme scheme);

  int size() const { return scheme_.size(); }
  const ClassScheme& scheme() const { return scheme_; }
  std::uint64_t& at(int map_class, int ref_class);
  std::uint64_t at(int map_class, int ref_class) const;
  std::uint64_t total() const;
  std::uint64_t row_total(int map_class) const;
  std::uint64_t col_total(int ref_class) const;

  bool operator==(const ConfusionMatrix& o) const { return counts_ == o.counts_; }

 private:
  ClassScheme scheme_;
  std::vector<std::uint64_t> counts_;
};

struct SamplePoint {
  double x = 0.0;  // map units, pixel centre
  double y = 0.0;
  int col = 0;
  int row = 0;
  std::uint8_t reference_class = 0;  // 0 = not yet interpreted
  std::uint8_t map_class = 0;
};

enum class SampleStrategy { Uniform, StratifiedByClass };

// Without replacement. Stratified mode splits n over map classes in
// proportion to their pixel counts (largest remainder, ties to the lower ID).
std::vector<SamplePoint> sample_points(const RasterGrid& map, int n, std::uint64_t seed,
                                       SampleStrategy strategy);

// Largest-remainder apportionment of n over the given weights.
std::vector<int> largest_remainder(const std::vector<double>& weights, int n);

// Fills map_class and reference_class from grids sharing the map's frame.
void evaluate_points(std::vector<SamplePoint>& points, const RasterGrid& map, const RasterGrid& reference);

ConfusionMatrix confusion(const std::vector<SamplePoint>& points, const ClassScheme& scheme);

// Every pixel where the reference is labeled.
ConfusionMatrix confusion_from_grids(const RasterGrid& map, const RasterGrid& reference,
                                     const ClassScheme& scheme);

struct Metrics {
  double overall_accuracy = 0.0;
  double kappa = 0.0;
  // diagonal / row total (the map-side ratio printed as "P.A." in the
  // reference table layout)
  std::vector<std::optional<double>> map_accuracy;
  // diagonal / column total (printed as "U.A.")
  std::vector<std::optional<double>> reference_accuracy;
  std::uint64_t total = 0;
};

Metrics metrics(const ConfusionMatrix& cm);

struct AreaStats {
  int region = 0;
  std::vector<double> map_fraction;                 // index = class ID - 1
  std::optional<std::vector<double>> ref_fraction;  // absent when the reference lacks the region
  std::vector<double> delta() const;                // map - reference
};

// region -> class ID -> fraction
using ReferenceFractions = std::map<int, std::map<int, double>>;

std::vector<AreaStats> area_misestimation(const RasterGrid& map, const RasterGrid& regions,
                                          const ReferenceFractions& reference, const ClassScheme& scheme);

// CSV forms. The matrix CSV has a header row of class names.
std::string format_confusion_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_csv(const std::string& text, const ClassScheme& scheme);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path, const ClassScheme& scheme);
std::string metrics_json(const Metrics& m, const ClassScheme& scheme);
// region,class,fraction
ReferenceFractions parse_reference_csv(const std::string& text, const ClassScheme& scheme);
// region,class,map_fraction,ref_fraction,delta
std::string format_misestimation_csv(const std::vector<AreaStats>& stats, const ClassScheme& scheme);

}  // namespace l2h
