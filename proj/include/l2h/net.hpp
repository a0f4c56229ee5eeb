#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2h/tensor.hpp"

namespace l2h {

// Resolution-preserving backbone: `blocks` blocks, each running parallel
// 1x1 / 3x3 / 5x5 branches on the block input, concatenating them and
// applying ReLU. A 1x1 head maps the last block to class logits.
struct NetConfig {
  int blocks = 5;
  std::array<int, 3> kernels{1, 3, 5};
  std::array<int, 3> branch_channels{64, 32, 16};
  int input_channels = 3;
  int num_classes = 11;

  int block_channels() const { return branch_channels[0] + branch_channels[1] + branch_channels[2]; }
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

template <typename T>
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int ksize = 1;
  std::vector<T> weight;  // [out][in][k][k]
  std::vector<T> bias;    // [out]

  bool operator==(const ConvLayer&) const = default;
};

// Layers in declaration order: block 0 branches 0..2, block 1 branches 0..2,
// ..., then the head.
template <typename T>
struct NetParams {
  std::vector<ConvLayer<T>> layers;
  std::uint64_t seed = 0;

  std::size_t count() const;
  ConvLayer<T>& branch(int block, int i) { return layers[block * 3 + i]; }
  const ConvLayer<T>& branch(int block, int i) const { return layers[block * 3 + i]; }
  ConvLayer<T>& head() { return layers.back(); }
  const ConvLayer<T>& head() const { return layers.back(); }

  NetParams zeros_like() const;
  template <typename U>
  NetParams<U> cast() const {
    NetParams<U> out;
    out.seed = seed;
    for (const auto& l : layers)
      out.layers.push_back({l.in_channels, l.out_channels, l.ksize,
                            std::vector<U>(l.weight.begin(), l.weight.end()),
                            std::vector<U>(l.bias.begin(), l.bias.end())});
    return out;
  }

  // Visits every scalar parameter in declaration order (weights, then bias,
  // per layer).
  template <typename F>
  void for_each(F&& f) {
    for (auto& l : layers) {
      for (auto& w : l.weight) f(w);
      for (auto& b : l.bias) f(b);
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& l : layers) {
      for (const auto& w : l.weight) f(w);
      for (const auto& b : l.bias) f(b);
    }
  }

  bool operator==(const NetParams&) const = default;
};

// Zero-initialized parameters with the shapes implied by `config`.
template <typename T>
NetParams<T> make_params(const NetConfig& config);

// He-style uniform weights (bound sqrt(6 / fan_in)), zero biases.
template <typename T = float>
NetParams<T> init_params(const NetConfig& config, std::uint64_t seed);

template <typename T>
struct ForwardResult {
  Tensor<T> logits;                 // L x H x W
  std::vector<Tensor<T>> features;  // one post-ReLU map per block
  Tensor<T> cp;                     // softmax(logits) over classes
};

template <typename T>
ForwardResult<T> forward(const NetParams<T>& params, const NetConfig& config, const Tensor<T>& image);

// Gradients of a scalar loss given dL/dlogits and, optionally, dL/dfeatures
// for any subset of blocks (empty tensors are skipped). `cache` must be the
// forward result for `image`.
template <typename T>
NetParams<T> backward(const NetParams<T>& params, const NetConfig& config, const Tensor<T>& image,
                      const ForwardResult<T>& cache, const Tensor<T>& grad_logits,
                      const std::vector<Tensor<T>>& grad_features);

// Radius of the theoretical receptive field, sum over layers of (k - 1) / 2.
int receptive_field(const NetConfig& config);

template <typename T>
void softmax_channels(const Tensor<T>& logits, Tensor<T>& cp);

// Checkpoint: "L2HP", config echo, seed, then little-endian f32 tensors in
// declaration order.
void save_checkpoint(const std::filesystem::path& path, const NetConfig& config,
                     const NetParams<float>& params);
std::vector<std::uint8_t> encode_checkpoint(const NetConfig& config, const NetParams<float>& params);
struct Checkpoint {
  NetConfig config;
  NetParams<float> params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Human-readable layer table used by `net inspect`.
std::string describe(const NetConfig& config);

}  // namespace l2h
