#include "l2h/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "l2h/errors.hpp"

namespace l2h {

static_assert(std::endian::native == std::endian::little,
              "LCR I/O assumes a little-endian host");

GeoRef GeoRef::scaled(double factor) const {
  GeoRef g = *this;
  g.pixel_size_x *= factor;
  g.pixel_size_y *= factor;
  return g;
}

GeoRef GeoRef::shifted(int col, int row) const {
  GeoRef g = *this;
  auto [x, y] = pixel_to_world(col, row);
  g.origin_x = x;
  g.origin_y = y;
  return g;
}

void GeoRef::validate() const {
  if (!(pixel_size_x > 0.0)) throw FormatError("pixel_size_x must be positive");
  if (pixel_size_y == 0.0 || std::isnan(pixel_size_y)) throw FormatError("pixel_size_y must be non-zero");
}

RasterGrid RasterGrid::make_classes(int width, int height, GeoRef georef, std::uint8_t fill,
                                    double nodata) {
  if (width <= 0 || height <= 0) throw ShapeError("grid dimensions must be positive");
  RasterGrid g;
  g.width_ = width;
  g.height_ = height;
  g.bands_ = 1;
  g.dtype_ = DType::ClassU8;
  g.nodata_ = nodata;
  g.georef_ = std::move(georef);
  g.u8_.assign(g.pixel_count(), fill);
  return g;
}

RasterGrid RasterGrid::make_bands(int width, int height, int bands, GeoRef georef,
                                  double nodata) {
  if (width <= 0 || height <= 0 || bands <= 0) throw ShapeError("grid dimensions must be positive");
  RasterGrid g;
  g.width_ = width;
  g.height_ = height;
  g.bands_ = bands;
  g.dtype_ = DType::BandF32;
  g.nodata_ = nodata;
  g.georef_ = std::move(georef);
  g.f32_.assign(g.pixel_count() * static_cast<std::size_t>(bands), 0.0f);
  return g;
}

RasterGrid RasterGrid::crop(const PixelRect& w) const {
  if (w.x < 0 || w.y < 0 || w.width <= 0 || w.height <= 0 || w.x_end() > width_ ||
      w.y_end() > height_)
    throw ShapeError("crop window outside grid");
  RasterGrid out;
  out.width_ = w.width;
  out.height_ = w.height;
  out.bands_ = bands_;
  out.dtype_ = dtype_;
  out.nodata_ = nodata_;
  out.georef_ = georef_.shifted(w.x, w.y);
  if (dtype_ == DType::ClassU8) {
    out.u8_.resize(out.pixel_count());
    for (int y = 0; y < w.height; ++y)
      std::copy_n(&u8_[static_cast<std::size_t>(w.y + y) * width_ + w.x], w.width,
                  &out.u8_[static_cast<std::size_t>(y) * w.width]);
  } else {
    out.f32_.resize(out.pixel_count() * bands_);
    for (int b = 0; b < bands_; ++b)
      for (int y = 0; y < w.height; ++y)
        std::copy_n(&f32_[(static_cast<std::size_t>(b) * height_ + w.y + y) * width_ + w.x],
                    w.width, &out.f32_[(static_cast<std::size_t>(b) * w.height + y) * w.width]);
  }
  return out;
}

// ---------------------------------------------------------------- classes

ClassScheme::ClassScheme(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != i + 1)
      throw ConfigError("class IDs must be unique and contiguous from 1");
  }
}

const ClassScheme& ClassScheme::standard() {
  static const ClassScheme scheme({
      {cls::kTR, "TR", {60, 60, 60}},
      {cls::kTC, "TC", {0, 100, 0}},
      {cls::kSL, "SL", {255, 187, 34}},
      {cls::kGL, "GL", {255, 255, 76}},
      {cls::kCL, "CL", {240, 150, 255}},
      {cls::kBD, "BD", {250, 0, 0}},
      {cls::kBLSV, "BL&SV", {180, 180, 180}},
      {cls::kSI, "S&I", {240, 240, 240}},
      {cls::kWT, "WT", {0, 100, 200}},
      {cls::kWL, "WL", {0, 150, 160}},
      {cls::kML, "M&L", {250, 230, 160}},
  });
  return scheme;
}

ClassScheme ClassScheme::first(int count) {
  const auto& all = standard().classes();
  if (count < 1 || count > static_cast<int>(all.size()))
    throw ConfigError("class count must be in 1..11");
  return ClassScheme({all.begin(), all.begin() + count});
}

const ClassInfo& ClassScheme::info(int id) const {
  if (!contains(id)) throw UnknownClassError(id);
  return classes_[id - 1];
}

std::uint8_t ClassScheme::id_of(const std::string& name) const {
  for (const auto& c : classes_)
    if (c.name == name) return c.id;
  throw UnknownClassError(-1);
}

void validate_classes(const RasterGrid& grid, const ClassScheme& scheme) {
  if (grid.dtype() != DType::ClassU8) throw FormatError("expected a u8-class grid");
  for (auto v : grid.classes()) {
    if (v == grid.nodata() || v == cls::kUnlabeled) continue;
    if (!scheme.contains(v)) throw UnknownClassError(v);
  }
}

// ---------------------------------------------------------------- LCR

namespace {

constexpr char kMagic[4] = {'L', 'C', 'R', '1'};

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    auto p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void raw(const void* data, std::size_t n) {
    auto p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  void raw(void* out, std::size_t n) {
    if (n > bytes_.size() - pos_) throw FormatError("LCR stream truncated");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_grid(const RasterGrid& g) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.put<std::uint32_t>(g.width());
  w.put<std::uint32_t>(g.height());
  w.put<std::uint16_t>(static_cast<std::uint16_t>(g.bands()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(g.dtype()));
  w.put<double>(g.nodata());
  const auto& r = g.georef();
  w.put<double>(r.origin_x);
  w.put<double>(r.origin_y);
  w.put<double>(r.pixel_size_x);
  w.put<double>(r.pixel_size_y);
  if (r.crs_tag.size() > 0xFFFF) throw FormatError("crs_tag too long");
  w.put<std::uint16_t>(static_cast<std::uint16_t>(r.crs_tag.size()));
  w.raw(r.crs_tag.data(), r.crs_tag.size());
  if (g.dtype() == DType::ClassU8)
    w.raw(g.classes().data(), g.classes().size());
  else
    w.raw(g.values().data(), g.values().size_bytes());
  return std::move(w.bytes);
}

RasterGrid decode_grid(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("missing LCR1 magic");
  auto width = r.get<std::uint32_t>();
  auto height = r.get<std::uint32_t>();
  auto bands = r.get<std::uint16_t>();
  auto dtype = r.get<std::uint8_t>();
  double nodata = r.get<double>();
  GeoRef geo;
  geo.origin_x = r.get<double>();
  geo.origin_y = r.get<double>();
  geo.pixel_size_x = r.get<double>();
  geo.pixel_size_y = r.get<double>();
  auto tag_len = r.get<std::uint16_t>();
  geo.crs_tag.resize(tag_len);
  r.raw(geo.crs_tag.data(), tag_len);
  geo.validate();

  if (width == 0 || height == 0 || bands == 0 || width > (1u << 30) || height > (1u << 30))
    throw FormatError("invalid LCR dimensions");
  const std::size_t pixels = std::size_t{width} * height * bands;
  RasterGrid g;
  if (dtype == static_cast<std::uint8_t>(DType::ClassU8)) {
    if (bands != 1) throw FormatError("u8-class grids must have one band");
    if (r.remaining() != pixels) throw FormatError("LCR payload size mismatch");
    g = RasterGrid::make_classes(width, height, geo, 0, nodata);
    r.raw(g.classes().data(), pixels);
  } else if (dtype == static_cast<std::uint8_t>(DType::BandF32)) {
    if (r.remaining() != pixels * sizeof(float)) throw FormatError("LCR payload size mismatch");
    g = RasterGrid::make_bands(width, height, bands, geo, nodata);
    r.raw(g.values().data(), pixels * sizeof(float));
  } else {
    throw FormatError("unknown LCR dtype " + std::to_string(dtype));
  }
  return g;
}

void write_grid(const std::filesystem::path& path, const RasterGrid& grid) {
  auto bytes = encode_grid(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RasterGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_grid(bytes);
}

// ---------------------------------------------------------------- vectors

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": bad coordinate '" + s + "'");
  }
}

}  // namespace

VectorLines parse_vector_lines(const std::string& text) {
  VectorLines out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    Polyline pl;
    std::string coords = body;
    if (auto bar = body.find('|'); bar != std::string::npos) {
      coords = body.substr(0, bar);
      std::istringstream attrs(body.substr(bar + 1));
      std::string kv;
      while (std::getline(attrs, kv, ';')) {
        kv = trim(kv);
        if (kv.empty()) continue;
        auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw FormatError("line " + std::to_string(line_no) + ": attribute without '='");
        pl.attributes[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
      }
    }
    std::istringstream pts(coords);
    std::string tok;
    while (pts >> tok) {
      auto comma = tok.find(',');
      if (comma == std::string::npos)
        throw FormatError("line " + std::to_string(line_no) + ": vertex without ','");
      pl.points.push_back({parse_double(tok.substr(0, comma), line_no),
                           parse_double(tok.substr(comma + 1), line_no)});
    }
    if (pl.points.size() < 2)
      throw FormatError("line " + std::to_string(line_no) + ": polyline needs >= 2 vertices");
    out.lines.push_back(std::move(pl));
  }
  return out;
}

std::string format_vector_lines(const VectorLines& lines) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& pl : lines.lines) {
    for (std::size_t i = 0; i < pl.points.size(); ++i)
      out << (i ? " " : "") << pl.points[i][0] << ',' << pl.points[i][1];
    if (!pl.attributes.empty()) {
      out << " |";
      bool first = true;
      for (const auto& [k, v] : pl.attributes) {
        out << (first ? " " : ";") << k << '=' << v;
        first = false;
      }
    }
    out << '\n';
  }
  return out.str();
}

VectorLines read_vector_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_vector_lines(ss.str());
}

void write_vector_lines(const std::filesystem::path& path, const VectorLines& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_vector_lines(lines);
}

// ---------------------------------------------------------------- resampling

RasterGrid resample_nearest(const RasterGrid& src, int factor, Resample direction) {
  if (factor < 1) throw ConfigError("resample factor must be positive");
  const int bands = src.bands();
  if (direction == Resample::Up) {
    const int w = src.width() * factor, h = src.height() * factor;
    GeoRef geo = src.georef().scaled(1.0 / factor);
    if (src.dtype() == DType::ClassU8) {
      auto out = RasterGrid::make_classes(w, h, geo, 0, src.nodata());
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.class_at(x, y) = src.class_at(x / factor, y / factor);
      return out;
    }
    auto out = RasterGrid::make_bands(w, h, bands, geo, src.nodata());
    for (int b = 0; b < bands; ++b)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.value_at(b, x, y) = src.value_at(b, x / factor, y / factor);
    return out;
  }
  if (src.width() % factor != 0 || src.height() % factor != 0)
    throw ShapeError("grid size not divisible by downsample factor " + std::to_string(factor));
  const int w = src.width() / factor, h = src.height() / factor;
  GeoRef geo = src.georef().scaled(factor);
  if (src.dtype() == DType::ClassU8) {
    auto out = RasterGrid::make_classes(w, h, geo, 0, src.nodata());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.class_at(x, y) = src.class_at(x * factor, y * factor);
    return out;
  }
  auto out = RasterGrid::make_bands(w, h, bands, geo, src.nodata());
  for (int b = 0; b < bands; ++b)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.value_at(b, x, y) = src.value_at(b, x * factor, y * factor);
  return out;
}

// ---------------------------------------------------------------- tiling

namespace {

std::vector<int> axis_starts(int extent, int tile, int overlap) {
  if (tile >= extent) return {0};
  std::vector<int> starts;
  const int step = tile - overlap;
  for (int s = 0;; s += step) {
    if (s + tile >= extent) {
      starts.push_back(extent - tile);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

}  // namespace

std::vector<PixelRect> tile_windows(int width, int height, int tile, int overlap) {
  if (tile <= 0) throw ConfigError("tile size must be positive");
  if (overlap < 0 || overlap >= tile) throw ConfigError("tile overlap must satisfy 0 <= overlap < tile");
  if (width <= 0 || height <= 0) throw ShapeError("grid dimensions must be positive");
  const auto xs = axis_starts(width, tile, overlap);
  const auto ys = axis_starts(height, tile, overlap);
  std::vector<PixelRect> out;
  out.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) out.push_back({x, y, std::min(tile, width), std::min(tile, height)});
  return out;
}

std::vector<std::pair<PixelRect, RasterGrid>> tile_iter(const RasterGrid& grid, int tile,
                                                        int overlap) {
  std::vector<std::pair<PixelRect, RasterGrid>> out;
  for (const auto& w : tile_windows(grid.width(), grid.height(), tile, overlap))
    out.emplace_back(w, grid.crop(w));
  return out;
}

}  // namespace l2h
