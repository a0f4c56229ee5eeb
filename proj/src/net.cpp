#include "l2h/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "l2h/kernels.hpp"

namespace l2h {

void NetConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (blocks < 1) throw ConfigError("at least one block is required");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  for (int i = 0; i < 3; ++i) {
    if (kernels[i] < 1 || kernels[i] % 2 == 0) throw ConfigError("branch kernels must be odd");
    if (branch_channels[i] < 1) throw ConfigError("branch channels must be >= 1");
  }
}

template <typename T>
std::size_t NetParams<T>::count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
NetParams<T> NetParams<T>::zeros_like() const {
  NetParams<T> out;
  out.seed = seed;
  for (const auto& l : layers)
    out.layers.push_back({l.in_channels, l.out_channels, l.ksize, std::vector<T>(l.weight.size(), T(0)),
                          std::vector<T>(l.bias.size(), T(0))});
  return out;
}

template <typename T>
NetParams<T> make_params(const NetConfig& config) {
  config.validate();
  NetParams<T> p;
  int in = config.input_channels;
  auto add = [&](int cin, int cout, int k) {
    p.layers.push_back({cin, cout, k, std::vector<T>(static_cast<std::size_t>(cout) * cin * k * k, T(0)),
                        std::vector<T>(cout, T(0))});
  };
  for (int b = 0; b < config.blocks; ++b) {
    for (int i = 0; i < 3; ++i) add(in, config.branch_channels[i], config.kernels[i]);
    in = config.block_channels();
  }
  add(in, config.num_classes, 1);
  return p;
}

template <typename T>
NetParams<T> init_params(const NetConfig& config, std::uint64_t seed) {
  auto p = make_params<T>(config);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  // Explicit 53-bit mapping keeps draws identical across standard libraries.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (auto& l : p.layers) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(l.in_channels) * l.ksize * l.ksize));
    for (auto& w : l.weight) w = static_cast<T>((2.0 * uniform() - 1.0) * bound);
  }
  return p;
}

int receptive_field(const NetConfig& config) {
  const int widest = *std::max_element(config.kernels.begin(), config.kernels.end());
  return config.blocks * ((widest - 1) / 2);
}

template <typename T>
void softmax_channels(const Tensor<T>& logits, Tensor<T>& cp) {
  const int L = logits.channels;
  const std::size_t HW = logits.plane_size();
  cp = Tensor<T>(L, logits.height, logits.width);
  const T* in = logits.data.data();
  T* out = cp.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(HW); ++p) {
    T m = in[p];
    for (int l = 1; l < L; ++l) m = std::max(m, in[l * HW + p]);
    T s = 0;
    for (int l = 0; l < L; ++l) {
      const T e = std::exp(in[l * HW + p] - m);
      out[l * HW + p] = e;
      s += e;
    }
    for (int l = 0; l < L; ++l) out[l * HW + p] /= s;
  }
}

template <typename T>
ForwardResult<T> forward(const NetParams<T>& params, const NetConfig& config, const Tensor<T>& image) {
  if (image.channels != config.input_channels)
    throw ShapeError("forward: image has " + std::to_string(image.channels) + " channels, expected " +
                     std::to_string(config.input_channels));
  if (params.layers.size() != static_cast<std::size_t>(config.blocks) * 3 + 1)
    throw ShapeError("forward: parameters do not match config");
  const int H = image.height, W = image.width, C = config.block_channels();
  ForwardResult<T> r;
  r.features.reserve(config.blocks);
  const Tensor<T>* input = &image;
  for (int b = 0; b < config.blocks; ++b) {
    Tensor<T> feat(C, H, W);
    int off = 0;
    for (int i = 0; i < 3; ++i) {
      const auto& layer = params.branch(b, i);
      kernels::conv2d_forward<T>(*input, layer.weight, layer.bias, layer.out_channels, layer.ksize, feat, off);
      off += layer.out_channels;
    }
    T* d = feat.data.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(feat.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > T(0) ? d[i] : T(0);
    r.features.push_back(std::move(feat));
    input = &r.features.back();
  }
  const auto& head = params.head();
  r.logits = Tensor<T>(head.out_channels, H, W);
  kernels::conv2d_forward<T>(*input, head.weight, head.bias, head.out_channels, 1, r.logits, 0);
  softmax_channels(r.logits, r.cp);
  return r;
}

template <typename T>
NetParams<T> backward(const NetParams<T>& params, const NetConfig& config, const Tensor<T>& image,
                      const ForwardResult<T>& cache, const Tensor<T>& grad_logits,
                      const std::vector<Tensor<T>>& grad_features) {
  if (cache.features.size() != static_cast<std::size_t>(config.blocks) || cache.logits.empty())
    throw StateError("backward: forward activations are missing");
  const int H = image.height, W = image.width, C = config.block_channels();
  for (const auto& f : cache.features)
    if (f.channels != C || f.height != H || f.width != W)
      throw StateError("backward: cached activations do not match the image");
  grad_logits.require_shape(config.num_classes, H, W, "backward grad_logits");
  if (!grad_features.empty() && grad_features.size() != static_cast<std::size_t>(config.blocks))
    throw ShapeError("backward: expected one feature gradient per block");

  NetParams<T> grads = params.zeros_like();
  const auto& head = params.head();
  auto& ghead = grads.head();
  kernels::conv2d_backward_params<T>(cache.features.back(), grad_logits, 0, head.out_channels, 1,
                                     ghead.weight, ghead.bias);
  Tensor<T> dfeat(C, H, W);
  kernels::conv2d_backward_input<T>(grad_logits, 0, head.out_channels, head.weight, 1, dfeat);

  for (int b = config.blocks - 1; b >= 0; --b) {
    const auto& feat = cache.features[b];
    T* d = dfeat.data.data();
    const T* f = feat.data.data();
    const T* extra = !grad_features.empty() && !grad_features[b].empty() ? grad_features[b].data.data() : nullptr;
    if (extra) grad_features[b].require_shape(C, H, W, "backward grad_features");
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dfeat.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const T g = extra ? d[i] + extra[i] : d[i];
      d[i] = f[i] > T(0) ? g : T(0);
    }
    const Tensor<T>& input = b == 0 ? image : cache.features[b - 1];
    Tensor<T> dprev = b > 0 ? Tensor<T>(C, H, W) : Tensor<T>();
    int off = 0;
    for (int i = 0; i < 3; ++i) {
      const auto& layer = params.branch(b, i);
      auto& glayer = grads.branch(b, i);
      kernels::conv2d_backward_params<T>(input, dfeat, off, layer.out_channels, layer.ksize, glayer.weight,
                                         glayer.bias);
      if (b > 0)
        kernels::conv2d_backward_input<T>(dfeat, off, layer.out_channels, layer.weight, layer.ksize, dprev);
      off += layer.out_channels;
    }
    if (b > 0) dfeat = std::move(dprev);
  }
  return grads;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kCkptMagic[4] = {'L', '2', 'H', 'P'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  auto p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T)) throw FormatError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetConfig& config, const NetParams<float>& params) {
  static_assert(std::endian::native == std::endian::little);
  std::vector<std::uint8_t> out(kCkptMagic, kCkptMagic + 4);
  put<std::uint32_t>(out, config.blocks);
  for (int k : config.kernels) put<std::uint32_t>(out, k);
  for (int c : config.branch_channels) put<std::uint32_t>(out, c);
  put<std::uint32_t>(out, config.input_channels);
  put<std::uint32_t>(out, config.num_classes);
  put<std::uint64_t>(out, params.seed);
  params.for_each([&](float v) { put<float>(out, v); });
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCkptMagic, 4) != 0)
    throw FormatError("missing L2HP magic");
  std::size_t pos = 4;
  Checkpoint ck;
  ck.config.blocks = static_cast<int>(get<std::uint32_t>(bytes, pos));
  for (int& k : ck.config.kernels) k = static_cast<int>(get<std::uint32_t>(bytes, pos));
  for (int& c : ck.config.branch_channels) c = static_cast<int>(get<std::uint32_t>(bytes, pos));
  ck.config.input_channels = static_cast<int>(get<std::uint32_t>(bytes, pos));
  ck.config.num_classes = static_cast<int>(get<std::uint32_t>(bytes, pos));
  if (ck.config.blocks > 64 || ck.config.input_channels > 4096 || ck.config.num_classes > 255)
    throw FormatError("implausible checkpoint config");
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  ck.params = make_params<float>(ck.config);
  ck.params.seed = get<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != ck.params.count() * sizeof(float))
    throw FormatError("checkpoint payload size mismatch");
  ck.params.for_each([&](float& v) { v = get<float>(bytes, pos); });
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NetConfig& config,
                     const NetParams<float>& params) {
  auto bytes = encode_checkpoint(config, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::string describe(const NetConfig& config) {
  auto p = make_params<float>(config);
  std::ostringstream out;
  out << "layer            kernel  in -> out   params\n";
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    std::string name = i + 1 == p.layers.size()
                           ? std::string("head")
                           : "block" + std::to_string(i / 3 + 1) + ".branch" + std::to_string(i % 3 + 1);
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %dx%-4d %4d -> %-4d %8zu\n", name.c_str(), l.ksize, l.ksize,
                  l.in_channels, l.out_channels, l.weight.size() + l.bias.size());
    out << line;
  }
  out << "total parameters: " << p.count() << "\n";
  out << "receptive field radius: " << receptive_field(config) << "\n";
  return out.str();
}

#define L2H_INSTANTIATE(T)                                                                            \
  template struct NetParams<T>;                                                                       \
  template NetParams<T> make_params<T>(const NetConfig&);                                             \
  template NetParams<T> init_params<T>(const NetConfig&, std::uint64_t);                              \
  template void softmax_channels<T>(const Tensor<T>&, Tensor<T>&);                                    \
  template ForwardResult<T> forward<T>(const NetParams<T>&, const NetConfig&, const Tensor<T>&);      \
  template NetParams<T> backward<T>(const NetParams<T>&, const NetConfig&, const Tensor<T>&,          \
                                    const ForwardResult<T>&, const Tensor<T>&,                        \
                                    const std::vector<Tensor<T>>&);
L2H_INSTANTIATE(float)
L2H_INSTANTIATE(double)
#undef L2H_INSTANTIATE

}  // namespace l2h
