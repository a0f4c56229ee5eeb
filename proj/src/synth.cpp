#include "l2h/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "l2h/errors.hpp"
#include "l2h/fusion.hpp"

namespace l2h {

namespace {

// Stream separation for the independent random draws of one scene.
std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::mt19937_64 rng(seq);
  return rng();
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0 || width % 10 || height % 10)
    throw ConfigError("scene width and height must be positive multiples of 10");
  if (num_classes < 3 || num_classes > 11) throw ConfigError("num_classes must be in 3..11");
  if (!class_fractions.empty()) {
    if (class_fractions.size() != static_cast<std::size_t>(num_classes - 1))
      throw ConfigError("class_fractions needs one entry per parcel class (num_classes - 1)");
    double s = 0;
    for (double f : class_fractions) {
      if (f < 0) throw ConfigError("class_fractions must be non-negative");
      s += f;
    }
    if (std::abs(s - 1.0) > 1e-6) throw ConfigError("class_fractions must sum to 1");
  }
  if (cell_size < 4) throw ConfigError("cell_size must be >= 4");
  if (warp < 0) throw ConfigError("warp must be non-negative");
  if (!(noise_sigma > 0)) throw ConfigError("noise_sigma must be positive");
  if (!(label_noise >= 0.0 && label_noise < 1.0)) throw ConfigError("label_noise must lie in [0, 1)");
  if (num_roads < 0 || road_width < 1) throw ConfigError("bad road settings");
}

SceneSpec SceneSpec::from_config(const KeyValueConfig& cfg) {
  SceneSpec s;
  s.width = static_cast<int>(cfg.get_int("width", s.width));
  s.height = static_cast<int>(cfg.get_int("height", s.height));
  s.num_classes = static_cast<int>(cfg.get_int("num_classes", s.num_classes));
  s.class_fractions = cfg.get_doubles("class_fractions");
  s.cell_size = static_cast<int>(cfg.get_int("cell_size", s.cell_size));
  s.warp = cfg.get_double("warp", s.warp);
  s.noise_sigma = cfg.get_double("noise_sigma", s.noise_sigma);
  s.separation = cfg.get_double("separation", s.separation);
  s.num_roads = static_cast<int>(cfg.get_int("num_roads", s.num_roads));
  s.road_width = static_cast<int>(cfg.get_int("road_width", s.road_width));
  s.label_noise = cfg.get_double("label_noise", s.label_noise);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(s.seed)));
  s.validate();
  return s;
}

RasterGrid majority_downsample(const RasterGrid& grid, int factor) {
  if (grid.width() % factor || grid.height() % factor)
    throw ShapeError("grid size not divisible by " + std::to_string(factor));
  const int w = grid.width() / factor, h = grid.height() / factor;
  auto out = RasterGrid::make_classes(w, h, grid.georef().scaled(factor), 0, grid.nodata());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::array<int, 256> votes{};
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) ++votes[grid.class_at(x * factor + dx, y * factor + dy)];
      // max_element returns the first maximum, i.e. the lowest ID.
      out.class_at(x, y) = static_cast<std::uint8_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  return out;
}

RasterGrid corrupt_labels(const RasterGrid& grid, int num_classes, double rate, std::uint64_t seed) {
  RasterGrid out = grid;
  std::mt19937_64 rng(seed);
  for (auto& v : out.classes()) {
    const double u = unit(rng);
    const int pick = static_cast<int>(unit(rng) * (num_classes - 1));  // 0..num_classes-2
    if (u < rate) {
      int other = 1 + pick;
      if (other >= v) ++other;  // skip the current class
      v = static_cast<std::uint8_t>(other);
    }
  }
  return out;
}

Scene generate(const SceneSpec& spec) {
  spec.validate();
  const int W = spec.width, H = spec.height;
  GeoRef geo{0.0, static_cast<double>(H), 1.0, -1.0, "LOCAL_1M"};
  Scene scene;

  // Class colour means, rejection-sampled for pairwise separation.
  {
    std::mt19937_64 rng(substream(spec.seed, 1));
    const double min_dist = spec.separation * spec.noise_sigma;
    std::vector<std::array<float, 3>> means(spec.num_classes + 1, {0.f, 0.f, 0.f});
    for (int c = 1; c <= spec.num_classes; ++c) {
      int attempts = 0;
      for (;;) {
        std::array<float, 3> m;
        for (auto& v : m) v = static_cast<float>(0.1 + 0.8 * unit(rng));
        bool ok = true;
        for (int o = 1; o < c && ok; ++o) {
          double d2 = 0;
          for (int k = 0; k < 3; ++k) d2 += (m[k] - means[o][k]) * (m[k] - means[o][k]);
          ok = std::sqrt(d2) >= min_dist;
        }
        if (ok) {
          means[c] = m;
          break;
        }
        if (++attempts > 100000)
          throw ConfigError("cannot place class means with the requested separation");
      }
    }
    scene.class_means = std::move(means);
  }

  // Warped Voronoi parcels on a jittered seed grid.
  std::vector<int> owner(static_cast<std::size_t>(W) * H);
  int cells_x = std::max(1, W / spec.cell_size), cells_y = std::max(1, H / spec.cell_size);
  std::vector<std::array<double, 2>> seeds(static_cast<std::size_t>(cells_x) * cells_y);
  {
    std::mt19937_64 rng(substream(spec.seed, 2));
    const double sx = static_cast<double>(W) / cells_x, sy = static_cast<double>(H) / cells_y;
    for (int gy = 0; gy < cells_y; ++gy)
      for (int gx = 0; gx < cells_x; ++gx)
        seeds[static_cast<std::size_t>(gy) * cells_x + gx] = {(gx + unit(rng)) * sx, (gy + unit(rng)) * sy};

    struct Wave {
      double fx, fy, phase, amp;
    };
    std::array<std::vector<Wave>, 2> waves;
    for (auto& axis : waves)
      for (int i = 0; i < 4; ++i) {
        const double wavelength = spec.cell_size * (1.5 + 2.0 * unit(rng));
        const double angle = 2.0 * std::numbers::pi * unit(rng);
        axis.push_back({std::cos(angle) / wavelength, std::sin(angle) / wavelength,
                        2.0 * std::numbers::pi * unit(rng), spec.warp / 2.0});
      }
    const int reach = 2 + static_cast<int>(std::ceil(spec.warp / std::min(sx, sy)));
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double px = x + 0.5, py = y + 0.5;
        for (const auto& wv : waves[0]) px += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
        for (const auto& wv : waves[1]) py += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
        const int gx = std::clamp(static_cast<int>(px / sx), 0, cells_x - 1);
        const int gy = std::clamp(static_cast<int>(py / sy), 0, cells_y - 1);
        double best = 1e300;
        int best_i = 0;
        for (int ny = std::max(0, gy - reach); ny <= std::min(cells_y - 1, gy + reach); ++ny)
          for (int nx = std::max(0, gx - reach); nx <= std::min(cells_x - 1, gx + reach); ++nx) {
            const int i = ny * cells_x + nx;
            const double dx = px - seeds[i][0], dy = py - seeds[i][1];
            const double d = dx * dx + dy * dy;
            if (d < best) {
              best = d;
              best_i = i;
            }
          }
        owner[static_cast<std::size_t>(y) * W + x] = best_i;
      }
  }

  // Assign parcels to classes in random order, each to the class furthest
  // below its target area.
  const int parcel_classes = spec.num_classes - 1;
  std::vector<double> fractions = spec.class_fractions;
  if (fractions.empty()) fractions.assign(parcel_classes, 1.0 / parcel_classes);
  std::vector<std::size_t> cell_area(seeds.size(), 0);
  for (int o : owner) ++cell_area[o];
  std::vector<std::uint8_t> cell_class(seeds.size(), 0);
  {
    std::mt19937_64 rng(substream(spec.seed, 3));
    std::vector<int> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    std::vector<double> deficit(parcel_classes);
    for (int k = 0; k < parcel_classes; ++k) deficit[k] = fractions[k] * static_cast<double>(W) * H;
    for (int cell : order) {
      const int k = static_cast<int>(std::max_element(deficit.begin(), deficit.end()) - deficit.begin());
      cell_class[cell] = static_cast<std::uint8_t>(k + 2);
      deficit[k] -= static_cast<double>(cell_area[cell]);
    }
  }
  scene.truth = RasterGrid::make_classes(W, H, geo, 0, 255.0);
  {
    auto t = scene.truth.classes();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = cell_class[owner[i]];
  }

  // Roads: edge-to-edge polylines with a jittered midpoint.
  {
    std::mt19937_64 rng(substream(spec.seed, 4));
    for (int r = 0; r < spec.num_roads; ++r) {
      Polyline pl;
      const bool horizontal = r % 2 == 0;
      const double a = 0.1 + 0.8 * unit(rng), b = 0.1 + 0.8 * unit(rng), m = 0.1 + 0.8 * unit(rng);
      std::array<double, 2> p0, p1, p2;
      if (horizontal) {
        p0 = {0.0, a * H};
        p1 = {W * (0.3 + 0.4 * unit(rng)), m * H};
        p2 = {static_cast<double>(W), b * H};
      } else {
        p0 = {a * W, 0.0};
        p1 = {m * W, H * (0.3 + 0.4 * unit(rng))};
        p2 = {b * W, static_cast<double>(H)};
      }
      // pixel -> map coordinates (north-up)
      for (auto p : {p0, p1, p2}) pl.points.push_back(geo.pixel_to_world(p[0], p[1]));
      pl.attributes["highway"] = "primary";
      scene.roads.lines.push_back(std::move(pl));
    }
    if (!scene.roads.lines.empty()) {
      auto mask = rasterize_roads(scene.roads, scene.truth, spec.road_width);
      scene.truth = overlay_roads(scene.truth, mask, RoadMode::Override);
    }
  }

  // Imagery: class mean plus Gaussian noise per band.
  scene.image = RasterGrid::make_bands(W, H, 3, geo);
  {
    std::mt19937_64 rng(substream(spec.seed, 5));
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    auto truth = scene.truth.classes();
    auto img = scene.image.values();
    const std::size_t plane = scene.truth.pixel_count();
    for (std::size_t p = 0; p < plane; ++p)
      for (int b = 0; b < 3; ++b)
        img[b * plane + p] = static_cast<float>(scene.class_means[truth[p]][b] + noise(rng));
  }

  const auto coarse = majority_downsample(scene.truth, 10);
  for (int k = 0; k < 3; ++k)
    scene.products[k] = corrupt_labels(coarse, spec.num_classes, spec.label_noise, substream(spec.seed, 10 + k));
  return scene;
}

}  // namespace l2h
