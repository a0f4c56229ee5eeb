#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "l2h/grid.hpp"

namespace l2h {
namespace {

const GeoRef kGeo{500.0, 1000.0, 1.0, -1.0, "LOCAL_1M"};

RasterGrid random_classes(int w, int h, std::uint64_t seed, int max_id = 11) {
  auto g = RasterGrid::make_classes(w, h, kGeo);
  std::mt19937_64 rng(seed);
  for (auto& v : g.classes()) v = static_cast<std::uint8_t>(rng() % (max_id + 1));
  return g;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("l2h_grid_test_" + name);
}

TEST(GeoRef, TransformsInvertOnPixelCenters) {
  GeoRef g{123.5, 987.25, 0.5, -0.5, "X"};
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) {
      auto w = g.pixel_to_world(c + 0.5, r + 0.5);
      auto p = g.world_to_pixel(w[0], w[1]);
      EXPECT_DOUBLE_EQ(p[0], c + 0.5);
      EXPECT_DOUBLE_EQ(p[1], r + 0.5);
    }
}

TEST(GeoRef, ValidateRejectsDegenerateSizes) {
  EXPECT_THROW((GeoRef{0, 0, 0.0, -1.0, ""}.validate()), FormatError);
  EXPECT_THROW((GeoRef{0, 0, 1.0, 0.0, ""}.validate()), FormatError);
  EXPECT_NO_THROW(kGeo.validate());
}

TEST(Grid, RowMajorLayout) {
  auto g = RasterGrid::make_classes(3, 2, kGeo);
  for (int i = 0; i < 6; ++i) g.classes()[i] = static_cast<std::uint8_t>(i + 1);
  auto back = decode_grid(encode_grid(g));
  EXPECT_EQ(std::vector<std::uint8_t>(back.classes().begin(), back.classes().end()),
            (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(back.class_at(0, 1), 4);
}

TEST(Grid, FileRoundTripU8AndF32) {
  auto g = random_classes(17, 9, 1);
  g.set_georef({1.0, 2.0, 10.0, -10.0, "LOCAL_10M"});
  const auto p = temp_file("u8.lcr");
  write_grid(p, g);
  EXPECT_EQ(read_grid(p), g);

  auto f = RasterGrid::make_bands(5, 4, 3, kGeo, -1.5);
  std::mt19937 rng(2);
  std::normal_distribution<float> n;
  for (auto& v : f.values()) v = n(rng);
  write_grid(p, f);
  EXPECT_EQ(read_grid(p), f);
  std::filesystem::remove(p);
}

TEST(Grid, RoundTripIsByteExact) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
    auto g = random_classes(w, h, rng());
    const auto bytes = encode_grid(g);
    auto back = decode_grid(bytes);
    ASSERT_EQ(back, g);
    ASSERT_EQ(encode_grid(back), bytes);
  }
}

TEST(Grid, TruncatedFileIsFormatError) {
  auto bytes = encode_grid(random_classes(8, 8, 4));
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{3}}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_grid(part), FormatError) << cut;
  }
  auto bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_grid(bad), FormatError);
  bytes.push_back(0);
  EXPECT_THROW(decode_grid(bytes), FormatError);
}

TEST(Grid, MissingFileIsIoError) {
  EXPECT_THROW(read_grid(temp_file("does_not_exist.lcr")), IoError);
}

TEST(Grid, ValidateClasses) {
  auto g = random_classes(6, 6, 5, 5);
  EXPECT_NO_THROW(validate_classes(g, ClassScheme::standard()));
  g.classes()[3] = 255;  // nodata is exempt
  EXPECT_NO_THROW(validate_classes(g, ClassScheme::standard()));
  g.classes()[4] = 12;
  EXPECT_THROW(validate_classes(g, ClassScheme::standard()), UnknownClassError);
}

TEST(ClassSchemeTest, StandardLegend) {
  const auto& s = ClassScheme::standard();
  ASSERT_EQ(s.size(), 11);
  EXPECT_EQ(s.info(cls::kTR).name, "TR");
  EXPECT_EQ(s.info(cls::kML).name, "M&L");
  EXPECT_EQ(s.id_of("BL&SV"), cls::kBLSV);
  EXPECT_FALSE(s.contains(0));
  EXPECT_TRUE(s.contains(11));
  EXPECT_THROW(s.id_of("XX"), UnknownClassError);
  EXPECT_EQ(ClassScheme::first(5).size(), 5);
}

TEST(Resample, UpReplicates) {
  auto g = RasterGrid::make_classes(1, 1, kGeo, 7);
  auto up = resample_nearest(g, 10, Resample::Up);
  ASSERT_EQ(up.width(), 10);
  ASSERT_EQ(up.height(), 10);
  for (auto v : up.classes()) EXPECT_EQ(v, 7);
  EXPECT_DOUBLE_EQ(up.georef().pixel_size_x, 0.1);
  EXPECT_DOUBLE_EQ(up.georef().pixel_size_y, -0.1);
}

TEST(Resample, DownTakesTopLeft) {
  auto g = RasterGrid::make_classes(2, 2, kGeo);
  g.classes()[0] = 1;
  g.classes()[1] = 2;
  g.classes()[2] = 3;
  g.classes()[3] = 4;
  auto d = resample_nearest(g, 2, Resample::Down);
  ASSERT_EQ(d.pixel_count(), 1u);
  EXPECT_EQ(d.classes()[0], 1);
  EXPECT_DOUBLE_EQ(d.georef().pixel_size_x, 2.0);
}

TEST(Resample, DownMatchesPerPixelOracle) {
  auto g = random_classes(20, 15, 6);
  auto d = resample_nearest(g, 5, Resample::Down);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(d.class_at(x, y), g.class_at(5 * x, 5 * y));
}

TEST(Resample, UpThenDownIsIdentity) {
  std::mt19937_64 rng(7);
  for (int f : {2, 5, 10})
    for (int trial = 0; trial < 5; ++trial) {
      auto g = random_classes(1 + static_cast<int>(rng() % 12), 1 + static_cast<int>(rng() % 12), rng());
      auto back = resample_nearest(resample_nearest(g, f, Resample::Up), f, Resample::Down);
      EXPECT_EQ(back, g);
    }
}

TEST(Resample, NonDivisibleDownIsShapeError) {
  auto g = RasterGrid::make_classes(7, 10, kGeo);
  EXPECT_THROW(resample_nearest(g, 2, Resample::Down), ShapeError);
  EXPECT_THROW(resample_nearest(g, 0, Resample::Up), ConfigError);
}

TEST(Tiles, SingleWindow) {
  auto w = tile_windows(256, 256, 256, 0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0], (PixelRect{0, 0, 256, 256}));
}

TEST(Tiles, NineWindowsCoverGrid) {
  auto w = tile_windows(500, 500, 256, 32);
  ASSERT_EQ(w.size(), 9u);
  std::vector<int> seen(500 * 500, 0);
  for (const auto& r : w) {
    EXPECT_EQ(r.width, 256);
    for (int y = r.y; y < r.y_end(); ++y)
      for (int x = r.x; x < r.x_end(); ++x) seen[y * 500 + x]++;
  }
  for (int v : seen) ASSERT_GE(v, 1);
  EXPECT_EQ(w[1].x, 224);
  EXPECT_EQ(w[2].x, 244);  // clamped to the edge
}

TEST(Tiles, OverlapNotBelowTileIsConfigError) {
  EXPECT_THROW(tile_windows(10, 10, 4, 4), ConfigError);
  EXPECT_THROW(tile_windows(10, 10, 4, -1), ConfigError);
}

TEST(Tiles, CoveragePropertyOverRandomSizes) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int W = 1 + static_cast<int>(rng() % 90), H = 1 + static_cast<int>(rng() % 90);
    const int tile = 1 + static_cast<int>(rng() % 40);
    const int overlap = static_cast<int>(rng() % tile);
    auto windows = tile_windows(W, H, tile, overlap);
    std::vector<char> seen(static_cast<std::size_t>(W) * H, 0);
    for (const auto& r : windows) {
      ASSERT_GE(r.x, 0);
      ASSERT_GE(r.y, 0);
      ASSERT_LE(r.x_end(), W);
      ASSERT_LE(r.y_end(), H);
      for (int y = r.y; y < r.y_end(); ++y)
        for (int x = r.x; x < r.x_end(); ++x) seen[static_cast<std::size_t>(y) * W + x] = 1;
    }
    for (char s : seen) ASSERT_TRUE(s) << W << "x" << H << " tile " << tile << " overlap " << overlap;
  }
}

TEST(Tiles, IterYieldsMatchingSubGrids) {
  auto g = random_classes(30, 20, 9);
  for (const auto& [rect, sub] : tile_iter(g, 12, 3)) {
    ASSERT_EQ(sub.width(), rect.width);
    EXPECT_EQ(sub.georef(), g.georef().shifted(rect.x, rect.y));
    for (int y = 0; y < rect.height; ++y)
      for (int x = 0; x < rect.width; ++x) ASSERT_EQ(sub.class_at(x, y), g.class_at(rect.x + x, rect.y + y));
  }
}

TEST(VectorText, ParseFormatRoundTrip) {
  const std::string text = "0.5,0.5 9.5,0.5 | highway=primary;name=a\n1,2 3,4 5,6\n";
  auto lines = parse_vector_lines(text);
  ASSERT_EQ(lines.lines.size(), 2u);
  EXPECT_EQ(lines.lines[0].attributes.at("highway"), "primary");
  EXPECT_EQ(lines.lines[1].points.size(), 3u);
  auto again = parse_vector_lines(format_vector_lines(lines));
  ASSERT_EQ(again.lines.size(), 2u);
  EXPECT_EQ(again.lines[1].points, lines.lines[1].points);
  EXPECT_EQ(again.lines[0].attributes, lines.lines[0].attributes);
}

TEST(VectorText, RejectsSingleVertexAndGarbage) {
  EXPECT_THROW(parse_vector_lines("1,2\n"), FormatError);
  EXPECT_THROW(parse_vector_lines("1,2 abc\n"), FormatError);
}

}  // namespace
}  // namespace l2h
