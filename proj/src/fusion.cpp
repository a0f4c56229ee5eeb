#include "l2h/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "l2h/errors.hpp"

namespace l2h {

HarmonizationTable HarmonizationTable::identity(int num_classes, std::string name) {
  HarmonizationTable t{std::move(name), {}};
  t.mapping[0] = cls::kUnlabeled;
  for (int i = 1; i <= num_classes; ++i) t.mapping[i] = static_cast<std::uint8_t>(i);
  return t;
}

HarmonizationTable parse_harmonization_table(const std::string& text, std::string name) {
  HarmonizationTable t{std::move(name), {}};
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto arrow = line.find("->");
    if (arrow == std::string::npos)
      throw ConfigError("table line " + std::to_string(line_no) + ": expected 'src -> dst'");
    int src = 0, dst = 0;
    try {
      src = std::stoi(line.substr(0, arrow));
      dst = std::stoi(line.substr(arrow + 2));
    } catch (const std::exception&) {
      throw ConfigError("table line " + std::to_string(line_no) + ": non-integer class id");
    }
    if (dst < 0 || dst > ClassScheme::standard().size())
      throw ConfigError("table line " + std::to_string(line_no) + ": unified id out of range");
    if (!t.mapping.emplace(src, static_cast<std::uint8_t>(dst)).second)
      throw ConfigError("table line " + std::to_string(line_no) + ": duplicate source id " +
                        std::to_string(src));
  }
  return t;
}

HarmonizationTable read_harmonization_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_harmonization_table(ss.str(), path.stem().string());
}

RasterGrid harmonize(const RasterGrid& product, const HarmonizationTable& table) {
  if (product.dtype() != DType::ClassU8) throw FormatError("harmonize expects a u8-class grid");
  // Dense lookup; -1 marks values absent from the table.
  std::array<int, 256> lut;
  lut.fill(-1);
  for (auto [src, dst] : table.mapping)
    if (src >= 0 && src < 256) lut[src] = dst;
  const int nodata = product.nodata() >= 0 && product.nodata() < 256 &&
                             product.nodata() == std::floor(product.nodata())
                         ? static_cast<int>(product.nodata())
                         : -1;

  auto out = RasterGrid::make_classes(product.width(), product.height(), product.georef(),
                                      cls::kUnlabeled, 255.0);
  auto src = product.classes();
  auto dst = out.classes();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int v = src[i];
    if (v == nodata) {
      dst[i] = cls::kUnlabeled;
    } else if (lut[v] < 0) {
      throw UnknownClassError(v);
    } else {
      dst[i] = static_cast<std::uint8_t>(lut[v]);
    }
  }
  return out;
}

RasterGrid intersect_products(const RasterGrid& a, const RasterGrid& b, const RasterGrid& c) {
  if (!a.same_frame(b) || !a.same_frame(c))
    throw AlignmentError("products differ in shape or georef");
  if (a.dtype() != DType::ClassU8 || b.dtype() != DType::ClassU8 || c.dtype() != DType::ClassU8)
    throw FormatError("intersect_products expects u8-class grids");
  auto out = RasterGrid::make_classes(a.width(), a.height(), a.georef(), cls::kUnlabeled, 255.0);
  auto pa = a.classes(), pb = b.classes(), pc = c.classes();
  auto po = out.classes();
  for (std::size_t i = 0; i < po.size(); ++i)
    po[i] = (pa[i] == pb[i] && pb[i] == pc[i]) ? pa[i] : cls::kUnlabeled;
  return out;
}

void trace_segment(double x0, double y0, double x1, double y1, int width, int height,
                   std::span<std::uint8_t> mask) {
  auto mark_column = [&](int col, double ylo, double yhi) {
    if (col < 0 || col >= width) return;
    if (ylo > yhi) std::swap(ylo, yhi);
    // Closed cells: a segment touching the line y = k belongs to rows k-1 and k.
    const int r0 = std::max(0, static_cast<int>(std::ceil(ylo)) - 1);
    const int r1 = std::min(height - 1, static_cast<int>(std::floor(yhi)));
    for (int r = r0; r <= r1; ++r) mask[static_cast<std::size_t>(r) * width + col] = 1;
  };

  if (x0 > x1) {
    std::swap(x0, x1);
    std::swap(y0, y1);
  }
  const int c0 = static_cast<int>(std::ceil(x0)) - 1;
  const int c1 = static_cast<int>(std::floor(x1));
  if (x0 == x1) {
    for (int c = std::max(c0, 0); c <= std::min(c1, width - 1); ++c) mark_column(c, y0, y1);
    return;
  }
  const double slope = (y1 - y0) / (x1 - x0);
  for (int c = std::max(c0, 0); c <= std::min(c1, width - 1); ++c) {
    const double xa = std::max(x0, static_cast<double>(c));
    const double xb = std::min(x1, static_cast<double>(c + 1));
    if (xa > xb) continue;
    const double ya = xa == x0 ? y0 : y0 + (xa - x0) * slope;
    const double yb = xb == x1 ? y1 : y0 + (xb - x0) * slope;
    mark_column(c, ya, yb);
  }
}

RasterGrid rasterize_roads(const VectorLines& lines, const RasterGrid& templ, int width_px) {
  if (width_px < 1) throw ConfigError("road width must be >= 1 pixel");
  const int w = templ.width(), h = templ.height();
  auto traced = RasterGrid::make_classes(w, h, templ.georef(), 0, 255.0);
  const auto& geo = templ.georef();
  for (const auto& pl : lines.lines) {
    for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
      auto [ax, ay] = geo.world_to_pixel(pl.points[i][0], pl.points[i][1]);
      auto [bx, by] = geo.world_to_pixel(pl.points[i + 1][0], pl.points[i + 1][1]);
      trace_segment(ax, ay, bx, by, w, h, traced.classes());
    }
  }
  const int radius = width_px / 2;
  if (radius == 0) return traced;

  // Separable Chebyshev dilation, clipped at the border.
  std::vector<std::uint8_t> rows(traced.pixel_count(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!traced.class_at(x, y)) continue;
      for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx)
        rows[static_cast<std::size_t>(y) * w + xx] = 1;
    }
  auto out = RasterGrid::make_classes(w, h, templ.georef(), 0, 255.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!rows[static_cast<std::size_t>(y) * w + x]) continue;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy)
        out.class_at(x, yy) = 1;
    }
  return out;
}

RasterGrid overlay_roads(const RasterGrid& prelabels, const RasterGrid& road_mask, RoadMode mode) {
  if (!prelabels.same_frame(road_mask)) throw AlignmentError("road mask differs in shape or georef");
  RasterGrid out = prelabels;
  auto dst = out.classes();
  auto mask = road_mask.classes();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!mask[i]) continue;
    if (mode == RoadMode::Override || dst[i] == cls::kUnlabeled) dst[i] = cls::kTR;
  }
  return out;
}

FusionResult fuse(const RasterGrid& a, const RasterGrid& b, const RasterGrid& c,
                  const std::array<HarmonizationTable, 3>& tables, const VectorLines& roads,
                  int width_px, RoadMode mode) {
  auto ha = harmonize(a, tables[0]);
  auto hb = harmonize(b, tables[1]);
  auto hc = harmonize(c, tables[2]);
  auto pre = intersect_products(ha, hb, hc);
  auto mask = rasterize_roads(roads, pre, width_px);
  FusionResult result{overlay_roads(pre, mask, mode), {}};

  auto& rep = result.report;
  rep.total_pixels = pre.pixel_count();
  auto pre_px = pre.classes();
  auto mask_px = mask.classes();
  auto out_px = result.labels.classes();
  for (std::size_t i = 0; i < out_px.size(); ++i) {
    if (mask_px[i] && out_px[i] == cls::kTR && (mode == RoadMode::Override || pre_px[i] == cls::kUnlabeled))
      ++rep.road_pixels;
    if (out_px[i] == cls::kUnlabeled)
      ++rep.unlabeled_pixels;
    else
      ++rep.stable_pixels;
    if (out_px[i] < rep.class_counts.size()) ++rep.class_counts[out_px[i]];
  }
  return result;
}

}  // namespace l2h
