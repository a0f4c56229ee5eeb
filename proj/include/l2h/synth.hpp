#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "l2h/config.hpp"
#include "l2h/grid.hpp"

namespace l2h {

// Synthetic scene: a warped Voronoi partition of land-cover classes with
// straight-ish roads, Gaussian colour textures, and three coarse products
// derived from the truth by majority aggregation plus random relabeling.
struct SceneSpec {
  int width = 1000;   // 1-m pixels, multiple of 10
  int height = 1000;  // 1-m pixels, multiple of 10
  // Scene classes are IDs 1..num_classes of the standard legend. Class 1 (TR)
  // is reserved for roads; parcels use 2..num_classes.
  int num_classes = 5;
  // Parcel area fractions for classes 2..num_classes (empty = equal).
  std::vector<double> class_fractions;
  int cell_size = 50;     // mean parcel diameter, pixels
  double warp = 12.0;     // boundary displacement amplitude, pixels
  double noise_sigma = 0.05;
  double separation = 3.0;  // minimum pairwise class-mean distance, in sigmas
  int num_roads = 3;
  int road_width = 3;  // pixels on the 1-m grid
  double label_noise = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
  static SceneSpec from_config(const KeyValueConfig& cfg);
};

struct Scene {
  RasterGrid image;                   // 3 x f32 bands
  RasterGrid truth;                   // 1-m class IDs
  std::array<RasterGrid, 3> products; // 10-m class IDs
  VectorLines roads;
  std::vector<std::array<float, 3>> class_means;  // index = class ID
};

Scene generate(const SceneSpec& spec);

// Majority vote over factor x factor blocks, ties to the lowest class ID.
RasterGrid majority_downsample(const RasterGrid& grid, int factor);

// Replaces each pixel by a uniformly drawn different class in 1..num_classes
// with probability `rate`.
RasterGrid corrupt_labels(const RasterGrid& grid, int num_classes, double rate, std::uint64_t seed);

}  // namespace l2h
