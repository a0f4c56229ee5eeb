#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "l2h/config.hpp"
#include "l2h/grid.hpp"
#include "l2h/loss.hpp"
#include "l2h/net.hpp"

namespace l2h {

struct TrainConfig {
  int patch_size = 250;  // 1-m pixels, multiple of 10
  int batch_size = 4;
  int epochs = 10;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  // Epochs at the start that treat every labeled pixel as confident. CAS
  // needs a network whose CP map already carries some confidence.
  int warmup_epochs = 1;
  // Cap on training patches after filtering (0 = all).
  int max_patches = 0;
  LossConfig loss;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& cfg);
};

struct TrainingPair {
  PixelRect window;  // on the 1-m grid
  Tensor<float> image;
  LabelPatch labels;
};

// Cuts aligned patch_size x patch_size patches from a 1-m image and its
// 10-m labels (nearest-upsampled x10), in a seeded shuffled order, dropping
// patches without any labeled pixel.
std::vector<TrainingPair> make_pairs(const RasterGrid& image_1m, const RasterGrid& labels_10m,
                                     const TrainConfig& cfg);

struct StepLog {
  int step = 0;
  int epoch = 0;
  double ce = 0.0;
  double dva = 0.0;
  double ca_fraction = 0.0;  // |CA| / labeled pixels over the batch
};

std::string to_jsonl(const StepLog& s);

class DivergenceError : public Error {
 public:
  DivergenceError(std::string what, NetParams<float> last_good)
      : Error(std::move(what)), last_good_(std::move(last_good)) {}
  const char* name() const noexcept override { return "DivergenceError"; }
  const NetParams<float>& last_good() const { return last_good_; }

 private:
  NetParams<float> last_good_;
};

struct TrainResult {
  NetParams<float> params;
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&)>;

// SGD with momentum over `cfg.epochs` passes of `pairs`, minimising the
// masked-CE + DVA objective. Deterministic for a fixed seed.
TrainResult train(const std::vector<TrainingPair>& pairs, const NetConfig& net, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

// Same, continuing from `initial`.
TrainResult train_from(NetParams<float> initial, const std::vector<TrainingPair>& pairs,
                       const NetConfig& net, const TrainConfig& cfg, const StepCallback& on_step = {});

enum class Blend { CropCenter, ProbAverage };

struct MosaicPolicy {
  int tile = 512;
  int overlap = -1;  // < 0: 2 * receptive field
  Blend blend = Blend::CropCenter;
};

struct Prediction {
  RasterGrid classes;     // 1..L
  RasterGrid confidence;  // max CP, one f32 band
};

// Image grid -> C x H x W tensor.
Tensor<float> to_tensor(const RasterGrid& image);

// CP map only, without retaining intermediate features.
Tensor<float> infer(const NetParams<float>& params, const NetConfig& config, const Tensor<float>& image);

Prediction predict_tiled(const NetParams<float>& params, const NetConfig& config, const RasterGrid& image,
                         const MosaicPolicy& policy);

// Per-axis ownership boundaries for crop-center blending: window i along
// the axis owns [bounds[i], bounds[i + 1]).
std::vector<int> ownership_bounds(const std::vector<int>& starts, int tile, int extent);

}  // namespace l2h
