#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "l2h/errors.hpp"

namespace l2h {

// Affine pixel<->map transform. Pixel (col, row) refers to the pixel's
// top-left corner; centers sit at (col + 0.5, row + 0.5).
struct GeoRef {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_size_x = 1.0;
  double pixel_size_y = -1.0;
  std::string crs_tag;

  std::array<double, 2> pixel_to_world(double col, double row) const {
    return {origin_x + col * pixel_size_x, origin_y + row * pixel_size_y};
  }
  std::array<double, 2> world_to_pixel(double x, double y) const {
    return {(x - origin_x) / pixel_size_x, (y - origin_y) / pixel_size_y};
  }
  // Same origin, pixel sizes multiplied by `factor`.
  GeoRef scaled(double factor) const;
  // Georef of the sub-window starting at pixel (col, row).
  GeoRef shifted(int col, int row) const;
  void validate() const;

  bool operator==(const GeoRef&) const = default;
};

enum class DType : std::uint8_t { ClassU8 = 0, BandF32 = 1 };

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  int x_end() const { return x + width; }
  int y_end() const { return y + height; }
  bool operator==(const PixelRect&) const = default;
};

// Georeferenced raster, row-major and band-sequential. Class grids hold u8
// class IDs in a single band; band grids hold f32 values.
class RasterGrid {
 public:
  RasterGrid() = default;

  static RasterGrid make_classes(int width, int height, GeoRef georef,
                                 std::uint8_t fill = 0, double nodata = 255.0);
  static RasterGrid make_bands(int width, int height, int bands, GeoRef georef,
                               double nodata = -9999.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int bands() const { return bands_; }
  DType dtype() const { return dtype_; }
  double nodata() const { return nodata_; }
  const GeoRef& georef() const { return georef_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  void set_georef(GeoRef g) { georef_ = std::move(g); }
  void set_nodata(double v) { nodata_ = v; }

  std::span<const std::uint8_t> classes() const { return u8_; }
  std::span<std::uint8_t> classes() { return u8_; }
  std::span<const float> values() const { return f32_; }
  std::span<float> values() { return f32_; }

  std::uint8_t class_at(int x, int y) const {
    return u8_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t& class_at(int x, int y) {
    return u8_[static_cast<std::size_t>(y) * width_ + x];
  }
  float value_at(int band, int x, int y) const {
    return f32_[(static_cast<std::size_t>(band) * height_ + y) * width_ + x];
  }
  float& value_at(int band, int x, int y) {
    return f32_[(static_cast<std::size_t>(band) * height_ + y) * width_ + x];
  }

  bool same_frame(const RasterGrid& other) const {
    return width_ == other.width_ && height_ == other.height_ && georef_ == other.georef_;
  }

  // Copy of a sub-window with its georef shifted accordingly.
  RasterGrid crop(const PixelRect& window) const;

  bool operator==(const RasterGrid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int bands_ = 0;
  DType dtype_ = DType::ClassU8;
  double nodata_ = 0.0;
  GeoRef georef_;
  std::vector<std::uint8_t> u8_;
  std::vector<float> f32_;
};

namespace cls {
inline constexpr std::uint8_t kUnlabeled = 0;
inline constexpr std::uint8_t kTR = 1;
inline constexpr std::uint8_t kTC = 2;
inline constexpr std::uint8_t kSL = 3;
inline constexpr std::uint8_t kGL = 4;
inline constexpr std::uint8_t kCL = 5;
inline constexpr std::uint8_t kBD = 6;
inline constexpr std::uint8_t kBLSV = 7;
inline constexpr std::uint8_t kSI = 8;
inline constexpr std::uint8_t kWT = 9;
inline constexpr std::uint8_t kWL = 10;
inline constexpr std::uint8_t kML = 11;
}  // namespace cls

struct ClassInfo {
  std::uint8_t id;
  std::string name;
  std::array<std::uint8_t, 3> rgb;
};

// Ordered legend with IDs 1..L; ID 0 is always UNLABELED.
class ClassScheme {
 public:
  explicit ClassScheme(std::vector<ClassInfo> classes);

  // The eleven-class legend (TR, TC, SL, GL, CL, BD, BL&SV, S&I, WT, WL, M&L).
  static const ClassScheme& standard();
  // The first `count` classes of the standard legend.
  static ClassScheme first(int count);

  int size() const { return static_cast<int>(classes_.size()); }
  bool contains(int id) const { return id >= 1 && id <= size(); }
  const ClassInfo& info(int id) const;
  const std::vector<ClassInfo>& classes() const { return classes_; }
  // Throws UnknownClassError for names not in the legend.
  std::uint8_t id_of(const std::string& name) const;

 private:
  std::vector<ClassInfo> classes_;
};

struct Polyline {
  std::vector<std::array<double, 2>> points;
  std::map<std::string, std::string> attributes;
};

struct VectorLines {
  std::vector<Polyline> lines;
};

// LCR binary format.
void write_grid(const std::filesystem::path& path, const RasterGrid& grid);
RasterGrid read_grid(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_grid(const RasterGrid& grid);
RasterGrid decode_grid(std::span<const std::uint8_t> bytes);

// Checks the u8-class value invariant against `scheme` (nodata exempt).
void validate_classes(const RasterGrid& grid, const ClassScheme& scheme);

// Line-delimited polyline text: `x1,y1 x2,y2 ... | key=value;key=value`.
VectorLines parse_vector_lines(const std::string& text);
std::string format_vector_lines(const VectorLines& lines);
VectorLines read_vector_lines(const std::filesystem::path& path);
void write_vector_lines(const std::filesystem::path& path, const VectorLines& lines);

enum class Resample { Up, Down };

// Nearest-neighbour only: `Up` replicates each pixel into a factor x factor
// block, `Down` keeps the top-left sample of each block.
RasterGrid resample_nearest(const RasterGrid& src, int factor, Resample direction);

// Windows of size `tile` stepping by tile - overlap in row-major order. The
// last window on each axis is clamped to the grid edge; a tile larger than an
// axis collapses to the full axis.
std::vector<PixelRect> tile_windows(int width, int height, int tile, int overlap);
std::vector<std::pair<PixelRect, RasterGrid>> tile_iter(const RasterGrid& grid, int tile,
                                                        int overlap);

}  // namespace l2h
