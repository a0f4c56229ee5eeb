#include "l2h/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "l2h/kernels.hpp"

namespace l2h {

void TrainConfig::validate() const {
  if (patch_size <= 0 || patch_size % 10) throw ConfigError("patch_size must be a positive multiple of 10");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (warmup_epochs < 0 || max_patches < 0) throw ConfigError("warmup_epochs and max_patches must be >= 0");
  loss.validate();
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& c) {
  TrainConfig t;
  t.patch_size = static_cast<int>(c.get_int("patch_size", t.patch_size));
  t.batch_size = static_cast<int>(c.get_int("batch_size", t.batch_size));
  t.epochs = static_cast<int>(c.get_int("epochs", t.epochs));
  t.learning_rate = c.get_double("learning_rate", t.learning_rate);
  t.momentum = c.get_double("momentum", t.momentum);
  t.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<long long>(t.seed)));
  t.warmup_epochs = static_cast<int>(c.get_int("warmup_epochs", t.warmup_epochs));
  t.max_patches = static_cast<int>(c.get_int("max_patches", t.max_patches));
  t.loss.tau = c.get_double("tau", t.loss.tau);
  t.loss.gamma = c.get_double("gamma", t.loss.gamma);
  const auto form = c.get_string("variance_form", "squared-2-norm");
  if (form == "squared-2-norm" || form == "squared")
    t.loss.variance_form = VarianceForm::SquaredNorm;
  else if (form == "2-norm" || form == "norm")
    t.loss.variance_form = VarianceForm::Norm;
  else
    throw ConfigError("variance_form must be squared-2-norm or 2-norm");
  const auto va = c.get_string("vague_assignment", "predicted");
  if (va == "predicted")
    t.loss.vague_assignment = VagueAssignment::Predicted;
  else if (va == "label")
    t.loss.vague_assignment = VagueAssignment::Label;
  else
    throw ConfigError("vague_assignment must be predicted or label");
  t.loss.require_agreement = c.get_bool("require_agreement", t.loss.require_agreement);
  t.validate();
  return t;
}

Tensor<float> to_tensor(const RasterGrid& image) {
  if (image.dtype() != DType::BandF32) throw FormatError("expected an f32-band image");
  Tensor<float> t(image.bands(), image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), t.data.begin());
  return t;
}

std::vector<TrainingPair> make_pairs(const RasterGrid& image, const RasterGrid& labels, const TrainConfig& cfg) {
  cfg.validate();
  if (labels.dtype() != DType::ClassU8) throw FormatError("labels must be a u8-class grid");
  if (image.dtype() != DType::BandF32) throw FormatError("image must be an f32-band grid");
  if (image.width() != 10 * labels.width() || image.height() != 10 * labels.height())
    throw AlignmentError("image extent must be exactly 10x the label extent");
  const auto& gi = image.georef();
  const auto& gl = labels.georef();
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  if (!close(gi.origin_x, gl.origin_x) || !close(gi.origin_y, gl.origin_y) ||
      !close(gi.pixel_size_x * 10, gl.pixel_size_x) || !close(gi.pixel_size_y * 10, gl.pixel_size_y))
    throw AlignmentError("image and label georefs are not aligned at a 10x ratio");

  const auto up = resample_nearest(labels, 10, Resample::Up);
  const int ps = cfg.patch_size;
  std::vector<PixelRect> candidates;
  for (int y = 0; y + ps <= image.height(); y += ps)
    for (int x = 0; x + ps <= image.width(); x += ps) candidates.push_back({x, y, ps, ps});
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng() % i]);

  std::vector<TrainingPair> pairs;
  for (const auto& w : candidates) {
    TrainingPair pair;
    pair.window = w;
    pair.labels.width = ps;
    pair.labels.height = ps;
    pair.labels.labels.resize(static_cast<std::size_t>(ps) * ps);
    bool any = false;
    for (int y = 0; y < ps; ++y)
      for (int x = 0; x < ps; ++x) {
        const std::uint8_t v = up.class_at(w.x + x, w.y + y);
        const std::uint8_t label = v == labels.nodata() ? cls::kUnlabeled : v;
        pair.labels.labels[static_cast<std::size_t>(y) * ps + x] = label;
        any |= label != cls::kUnlabeled;
      }
    if (!any) continue;
    pair.image = to_tensor(image.crop(w));
    pairs.push_back(std::move(pair));
    if (cfg.max_patches > 0 && static_cast<int>(pairs.size()) == cfg.max_patches) break;
  }
  return pairs;
}

std::string to_jsonl(const StepLog& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "{\"step\":%d,\"epoch\":%d,\"ce\":%.9g,\"dva\":%.9g,\"ca_fraction\":%.9g}", s.step,
                s.epoch, s.ce, s.dva, s.ca_fraction);
  return buf;
}

TrainResult train(const std::vector<TrainingPair>& pairs, const NetConfig& net, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  return train_from(init_params<float>(net, cfg.seed), pairs, net, cfg, on_step);
}

TrainResult train_from(NetParams<float> params, const std::vector<TrainingPair>& pairs, const NetConfig& net,
                       const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("no training pairs");
  TrainResult result;
  auto velocity = params.zeros_like();
  NetParams<float> last_good = params;
  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(pairs.size());
  int step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    const bool warmup = epoch < cfg.warmup_epochs;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      NetParams<float> grads = params.zeros_like();
      StepLog entry{step, epoch, 0.0, 0.0, 0.0};
      std::size_t confident = 0, labeled = 0;
      // Batch items run one after another; kernels parallelise internally,
      // so gradient summation order is fixed.
      for (std::size_t k = b0; k < b1; ++k) {
        const auto& pair = pairs[order[k]];
        auto fwd = forward(params, net, pair.image);
        auto mask = warmup ? all_labeled(pair.labels) : cas_select(fwd.cp, pair.labels, cfg.loss);
        auto loss = l2h_loss_masked(fwd.cp, fwd.features, pair.labels, mask, cfg.loss);
        auto g = backward(params, net, pair.image, fwd, loss.grad_logits, loss.grad_features);
        for (std::size_t l = 0; l < grads.layers.size(); ++l) {
          auto& dst = grads.layers[l];
          const auto& src = g.layers[l];
          for (std::size_t i = 0; i < dst.weight.size(); ++i) dst.weight[i] += src.weight[i];
          for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
        }
        entry.ce += loss.ce;
        entry.dva += loss.dva;
        confident += mask.confident;
        labeled += mask.confident + mask.vague;
      }
      const double n = static_cast<double>(b1 - b0);
      entry.ce /= n;
      entry.dva /= n;
      entry.ca_fraction = labeled ? static_cast<double>(confident) / static_cast<double>(labeled) : 0.0;
      if (!std::isfinite(entry.ce) || !std::isfinite(entry.dva))
        throw DivergenceError("loss became non-finite at step " + std::to_string(step), std::move(last_good));

      last_good = params;
      const float lr = static_cast<float>(cfg.learning_rate);
      const float mu = static_cast<float>(cfg.momentum);
      const float scale = static_cast<float>(1.0 / n);
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto update = [&](std::vector<float>& p, std::vector<float>& v, const std::vector<float>& g) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = mu * v[i] - lr * (g[i] * scale);
            p[i] += v[i];
          }
        };
        update(params.layers[l].weight, velocity.layers[l].weight, grads.layers[l].weight);
        update(params.layers[l].bias, velocity.layers[l].bias, grads.layers[l].bias);
      }
      bool finite = true;
      params.for_each([&](float v) { finite &= std::isfinite(v); });
      if (!finite)
        throw DivergenceError("parameters became non-finite at step " + std::to_string(step), std::move(last_good));

      result.log.push_back(entry);
      if (on_step) on_step(entry);
      ++step;
    }
  }
  result.params = std::move(params);
  return result;
}

Tensor<float> infer(const NetParams<float>& params, const NetConfig& config, const Tensor<float>& image) {
  if (image.channels != config.input_channels) throw ShapeError("infer: channel mismatch");
  const int H = image.height, W = image.width, C = config.block_channels();
  Tensor<float> current;
  const Tensor<float>* input = &image;
  for (int b = 0; b < config.blocks; ++b) {
    Tensor<float> feat(C, H, W);
    int off = 0;
    for (int i = 0; i < 3; ++i) {
      const auto& layer = params.branch(b, i);
      kernels::conv2d_forward<float>(*input, layer.weight, layer.bias, layer.out_channels, layer.ksize, feat, off);
      off += layer.out_channels;
    }
    float* d = feat.data.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(feat.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > 0.f ? d[i] : 0.f;
    current = std::move(feat);
    input = &current;
  }
  const auto& head = params.head();
  Tensor<float> logits(head.out_channels, H, W);
  kernels::conv2d_forward<float>(*input, head.weight, head.bias, head.out_channels, 1, logits, 0);
  Tensor<float> cp;
  softmax_channels(logits, cp);
  return cp;
}

std::vector<int> ownership_bounds(const std::vector<int>& starts, int tile, int extent) {
  std::vector<int> bounds{0};
  for (std::size_t i = 1; i < starts.size(); ++i) {
    const int prev_end = starts[i - 1] + tile;
    bounds.push_back(starts[i] + (prev_end - starts[i]) / 2);
  }
  bounds.push_back(extent);
  return bounds;
}

Prediction predict_tiled(const NetParams<float>& params, const NetConfig& config, const RasterGrid& image,
                         const MosaicPolicy& policy) {
  if (image.dtype() != DType::BandF32 || image.bands() != config.input_channels)
    throw FormatError("predict_tiled: image must be f32 with the trained channel count");
  const int R = receptive_field(config);
  const int overlap = policy.overlap < 0 ? 2 * R : policy.overlap;
  if (policy.tile < 2 * R + 1)
    throw ConfigError("tile must be at least 2R+1 = " + std::to_string(2 * R + 1) + " pixels");
  if (overlap < 2 * R)
    throw ConfigError("overlap must be at least 2R = " + std::to_string(2 * R) + " pixels");
  const int W = image.width(), H = image.height(), L = config.num_classes;
  const auto windows = tile_windows(W, H, policy.tile, overlap);

  std::vector<int> xs, ys;
  for (const auto& w : windows) {
    if (xs.empty() || w.x > xs.back()) xs.push_back(w.x);
    if (ys.empty() || w.y > ys.back()) ys.push_back(w.y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const auto bx = ownership_bounds(xs, std::min(policy.tile, W), W);
  const auto by = ownership_bounds(ys, std::min(policy.tile, H), H);

  Prediction out{RasterGrid::make_classes(W, H, image.georef(), 0, 255.0),
                 RasterGrid::make_bands(W, H, 1, image.georef(), -1.0)};
  std::vector<float> sum;
  std::vector<std::uint16_t> hits;
  if (policy.blend == Blend::ProbAverage) {
    sum.assign(static_cast<std::size_t>(L) * W * H, 0.f);
    hits.assign(static_cast<std::size_t>(W) * H, 0);
  }

  for (const auto& w : windows) {
    const auto cp = infer(params, config, to_tensor(image.crop(w)));
    const std::size_t tp = cp.plane_size();
    if (policy.blend == Blend::CropCenter) {
      const auto ix = std::find(xs.begin(), xs.end(), w.x) - xs.begin();
      const auto iy = std::find(ys.begin(), ys.end(), w.y) - ys.begin();
      for (int y = by[iy]; y < by[iy + 1]; ++y)
        for (int x = bx[ix]; x < bx[ix + 1]; ++x) {
          const std::size_t p = static_cast<std::size_t>(y - w.y) * w.width + (x - w.x);
          int best = 0;
          float peak = cp.data[p];
          for (int l = 1; l < L; ++l)
            if (cp.data[l * tp + p] > peak) {
              peak = cp.data[l * tp + p];
              best = l;
            }
          out.classes.class_at(x, y) = static_cast<std::uint8_t>(best + 1);
          out.confidence.value_at(0, x, y) = peak;
        }
    } else {
      for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w.width + x;
          const std::size_t q = static_cast<std::size_t>(w.y + y) * W + (w.x + x);
          for (int l = 0; l < L; ++l) sum[l * static_cast<std::size_t>(W) * H + q] += cp.data[l * tp + p];
          ++hits[q];
        }
    }
  }
  if (policy.blend == Blend::ProbAverage) {
    const std::size_t plane = static_cast<std::size_t>(W) * H;
    for (std::size_t q = 0; q < plane; ++q) {
      int best = 0;
      float peak = sum[q];
      for (int l = 1; l < L; ++l)
        if (sum[l * plane + q] > peak) {
          peak = sum[l * plane + q];
          best = l;
        }
      out.classes.classes()[q] = static_cast<std::uint8_t>(best + 1);
      out.confidence.values()[q] = peak / static_cast<float>(hits[q]);
    }
  }
  return out;
}

}  // namespace l2h
