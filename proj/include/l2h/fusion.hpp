#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "l2h/grid.hpp"

namespace l2h {

// Crosswalk from one product's legend into the unified scheme. Values map to
// a unified class ID or to cls::kUnlabeled.
struct HarmonizationTable {
  std::string product_name;
  std::map<int, std::uint8_t> mapping;

  static HarmonizationTable identity(int num_classes, std::string name = "identity");
};

// Text form: `source_id -> unified_id` per line, `#` starts a comment.
HarmonizationTable parse_harmonization_table(const std::string& text, std::string name = {});
HarmonizationTable read_harmonization_table(const std::filesystem::path& path);

struct FusionReport {
  std::uint64_t total_pixels = 0;
  std::uint64_t stable_pixels = 0;
  std::uint64_t unlabeled_pixels = 0;
  std::uint64_t road_pixels = 0;
  // Indexed by class ID (0 unused). Counts pixels of the final labels.
  std::array<std::uint64_t, 12> class_counts{};
};

enum class RoadMode {
  Override,  // TR replaces any pre-label
  FillOnly,  // TR only fills UNLABELED pixels
};

RasterGrid harmonize(const RasterGrid& product, const HarmonizationTable& table);

// Pixels where all three products agree on a labeled class keep it; the rest
// become UNLABELED.
RasterGrid intersect_products(const RasterGrid& a, const RasterGrid& b, const RasterGrid& c);

// Binary mask on the template's frame. A cell is set when it lies within
// floor(width_px / 2) cells (Chebyshev) of a cell crossed by a polyline.
RasterGrid rasterize_roads(const VectorLines& lines, const RasterGrid& templ, int width_px);

// Cells crossed by a segment given in fractional pixel coordinates: every
// cell whose closed square intersects the segment. Exposed for testing.
void trace_segment(double x0, double y0, double x1, double y1, int width, int height,
                   std::span<std::uint8_t> mask);

RasterGrid overlay_roads(const RasterGrid& prelabels, const RasterGrid& road_mask,
                         RoadMode mode = RoadMode::Override);

struct FusionResult {
  RasterGrid labels;
  FusionReport report;
};

FusionResult fuse(const RasterGrid& a, const RasterGrid& b, const RasterGrid& c,
                  const std::array<HarmonizationTable, 3>& tables, const VectorLines& roads,
                  int width_px = 1, RoadMode mode = RoadMode::Override);

}  // namespace l2h
