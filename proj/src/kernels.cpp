#include "l2h/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include <omp.h>

namespace l2h::kernels {
namespace {

// Pixels per work item. Each chunk's im2col block is private to a thread.
constexpr int kChunk = 128;
// Weight-gradient partial sums are reduced over this many fixed groups of
// chunks, in order, independent of the thread count.
constexpr int kReduceGroups = 16;
constexpr int kMR = 6;

template <typename T>
struct Simd;
template <>
struct Simd<float> {
  typedef float type __attribute__((vector_size(64)));
  static constexpr int lanes = 16;
};
template <>
struct Simd<double> {
  typedef double type __attribute__((vector_size(64)));
  static constexpr int lanes = 8;
};

template <typename T>
constexpr int kNR = 2 * Simd<T>::lanes;

constexpr int round_up(int v, int m) { return (v + m - 1) / m * m; }

// acc[r][j] = sum_k panel[k][r] * B[k][j] for r < kMR, j < kNR, summed in k order.
template <typename T>
inline void micro_kernel(int K, const T* panel, const T* B, std::size_t ldb,
                         T (&acc)[kMR][kNR<T>]) {
  using V = typename Simd<T>::type;
  constexpr int L = Simd<T>::lanes;
  V c[2 * kMR];
  for (auto& v : c) v = V{};
  for (int k = 0; k < K; ++k) {
    V b0, b1;
    std::memcpy(&b0, B + k * ldb, sizeof(V));
    std::memcpy(&b1, B + k * ldb + L, sizeof(V));
    const T* a = panel + k * kMR;
#pragma GCC unroll 6
    for (int r = 0; r < kMR; ++r) {
      c[2 * r] += a[r] * b0;
      c[2 * r + 1] += a[r] * b1;
    }
  }
  std::memcpy(acc, c, sizeof(c));
}

// Packs rows of A (M x K, row stride lda) into zero-padded panels of kMR rows,
// each stored k-major.
template <typename T>
std::vector<T> pack_panels(int M, int K, const T* A, std::size_t lda) {
  const int panels = (M + kMR - 1) / kMR;
  std::vector<T> packed(static_cast<std::size_t>(panels) * K * kMR, T(0));
  for (int p = 0; p < panels; ++p)
    for (int r = 0; r < kMR; ++r) {
      const int m = p * kMR + r;
      if (m >= M) break;
      T* dst = packed.data() + static_cast<std::size_t>(p) * K * kMR + r;
      const T* src = A + m * lda;
      for (int k = 0; k < K; ++k) dst[k * kMR] = src[k];
    }
  return packed;
}

// col[row][j] for the `n` flattened pixels starting at p0, row = (c, ky, kx).
// Columns n..ld are zero.
template <typename T>
void im2col(const Tensor<T>& in, int in_off, int in_ch, int ks, std::size_t p0, int n, T* col,
            std::size_t ld) {
  const int W = in.width, H = in.height, pad = ks / 2;
  const std::size_t HW = in.plane_size();
  for (int c = 0; c < in_ch; ++c) {
    const T* src = in.data.data() + (in_off + c) * HW;
    for (int ky = 0; ky < ks; ++ky)
      for (int kx = 0; kx < ks; ++kx) {
        T* dst = col + static_cast<std::size_t>((c * ks + ky) * ks + kx) * ld;
        int j = 0;
        std::size_t p = p0;
        while (j < n) {
          const int y = static_cast<int>(p / W), x = static_cast<int>(p % W);
          const int seg = std::min(n - j, W - x);
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= H) {
            std::fill_n(dst + j, seg, T(0));
          } else {
            // valid source columns: 0 <= x + kx - pad < W
            const int lo = std::clamp(pad - kx, x, x + seg);
            const int hi = std::clamp(W + pad - kx, x, x + seg);
            std::fill_n(dst + j, lo - x, T(0));
            if (hi > lo)
              std::memcpy(dst + j + (lo - x), src + static_cast<std::size_t>(sy) * W + lo + kx - pad,
                          sizeof(T) * (hi - lo));
            std::fill_n(dst + j + (hi - x), x + seg - hi, T(0));
          }
          j += seg;
          p += seg;
        }
        std::fill(dst + n, dst + ld, T(0));
      }
  }
}

// Shared driver for same-padded convolutions: computes, for every output
// channel o < out_ch and pixel p, sum_{c,ky,kx} W[o][c][ky][kx] in[c][p + d]
// and hands it to store(o, p, value).
template <typename T, typename Store>
void conv_same(const Tensor<T>& in, int in_off, int in_ch, const std::vector<T>& panels, int out_ch,
               int ks, Store&& store) {
  constexpr int NR = kNR<T>;
  const int K = in_ch * ks * ks;
  const std::size_t HW = in.plane_size();
  const int chunks = static_cast<int>((HW + kChunk - 1) / kChunk);
  const int num_panels = (out_ch + kMR - 1) / kMR;
  // Odd multiple of the panel width avoids cache-set aliasing on the k stride.
  constexpr int ld = round_up(kChunk, NR) + NR;

#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(K) * ld);
    alignas(64) T acc[kMR][NR];
#pragma omp for schedule(static)
    for (int ch = 0; ch < chunks; ++ch) {
      const std::size_t p0 = static_cast<std::size_t>(ch) * kChunk;
      const int n = static_cast<int>(std::min<std::size_t>(kChunk, HW - p0));
      im2col(in, in_off, in_ch, ks, p0, n, col.data(), ld);
      for (int n0 = 0; n0 < n; n0 += NR) {
        const int jn = std::min(NR, n - n0);
        for (int pn = 0; pn < num_panels; ++pn) {
          micro_kernel<T>(K, panels.data() + static_cast<std::size_t>(pn) * K * kMR, col.data() + n0,
                          ld, acc);
          const int rn = std::min(kMR, out_ch - pn * kMR);
          for (int r = 0; r < rn; ++r)
            for (int j = 0; j < jn; ++j) store(pn * kMR + r, p0 + n0 + j, acc[r][j]);
        }
      }
    }
  }
}

template <typename T>
void check_conv(const Tensor<T>& in, std::size_t weight_size, int out_ch, int ks,
                const Tensor<T>& out, int off, const char* what) {
  if (ks < 1 || ks % 2 == 0) throw ShapeError(std::string(what) + ": kernel size must be odd");
  if (weight_size != static_cast<std::size_t>(out_ch) * in.channels * ks * ks)
    throw ShapeError(std::string(what) + ": weight size mismatch");
  if (out.height != in.height || out.width != in.width)
    throw ShapeError(std::string(what) + ": spatial size mismatch");
  if (off < 0 || off + out_ch > out.channels)
    throw ShapeError(std::string(what) + ": channel slice out of range");
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                    int out_ch, int ks, Tensor<T>& out, int off) {
  check_conv(in, weight.size(), out_ch, ks, out, off, "conv2d_forward");
  if (bias.size() != static_cast<std::size_t>(out_ch)) throw ShapeError("conv2d_forward: bias size");
  const int K = in.channels * ks * ks;
  const auto panels = pack_panels(out_ch, K, weight.data(), K);
  const std::size_t HW = in.plane_size();
  T* dst = out.data.data() + off * HW;
  conv_same(in, 0, in.channels, panels, out_ch, ks,
            [&](int o, std::size_t p, T v) { dst[o * HW + p] = v + bias[o]; });
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, int off, int out_ch, std::span<const T> weight,
                           int ks, Tensor<T>& grad_in) {
  check_conv(grad_in, weight.size(), out_ch, ks, grad_out, off, "conv2d_backward_input");
  // The adjoint of a same-padded stride-1 convolution is a same-padded
  // convolution with the kernel flipped and in/out channels swapped.
  const int in_ch = grad_in.channels;
  const int kk = ks * ks;
  std::vector<T> flipped(weight.size());
  for (int o = 0; o < out_ch; ++o)
    for (int c = 0; c < in_ch; ++c)
      for (int t = 0; t < kk; ++t)
        flipped[(static_cast<std::size_t>(c) * out_ch + o) * kk + (kk - 1 - t)] =
            weight[(static_cast<std::size_t>(o) * in_ch + c) * kk + t];
  const int K = out_ch * kk;
  const auto panels = pack_panels(in_ch, K, flipped.data(), K);
  const std::size_t HW = grad_in.plane_size();
  T* dst = grad_in.data.data();
  conv_same(grad_out, off, out_ch, panels, in_ch, ks,
            [&](int c, std::size_t p, T v) { dst[c * HW + p] += v; });
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& in, const Tensor<T>& grad_out, int off, int out_ch,
                            int ks, std::span<T> grad_weight, std::span<T> grad_bias) {
  check_conv(in, grad_weight.size(), out_ch, ks, grad_out, off, "conv2d_backward_params");
  if (grad_bias.size() != static_cast<std::size_t>(out_ch))
    throw ShapeError("conv2d_backward_params: bias size");
  // dW^T[k][o] = sum_p col[k][p] * grad_out[o][p]: the im2col rows are the
  // packed operand and the transposed gradient chunk stays cache-resident.
  constexpr int NR = kNR<T>;
  const int K = in.channels * ks * ks;
  const int out_pad = round_up(out_ch, NR);
  const std::size_t HW = in.plane_size();
  const int chunks = static_cast<int>((HW + kChunk - 1) / kChunk);
  const int num_panels = (K + kMR - 1) / kMR;
  constexpr int ld = round_up(kChunk, NR) + NR;
  const std::size_t wsize = static_cast<std::size_t>(out_ch) * K;
  std::vector<T> group_w(kReduceGroups * wsize, T(0));
  std::vector<T> group_b(static_cast<std::size_t>(kReduceGroups) * out_ch, T(0));
  const T* gout = grad_out.data.data() + off * HW;

#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(K) * ld);
    std::vector<T> gT(static_cast<std::size_t>(kChunk) * out_pad, T(0));
    alignas(64) T acc[kMR][NR];
#pragma omp for schedule(static)
    for (int g = 0; g < kReduceGroups; ++g) {
      T* gw = group_w.data() + g * wsize;
      T* gb = group_b.data() + static_cast<std::size_t>(g) * out_ch;
      const int c_begin = static_cast<int>(static_cast<long long>(chunks) * g / kReduceGroups);
      const int c_end = static_cast<int>(static_cast<long long>(chunks) * (g + 1) / kReduceGroups);
      for (int ch = c_begin; ch < c_end; ++ch) {
        const std::size_t p0 = static_cast<std::size_t>(ch) * kChunk;
        const int n = static_cast<int>(std::min<std::size_t>(kChunk, HW - p0));
        im2col(in, 0, in.channels, ks, p0, n, col.data(), ld);
        const auto panels = pack_panels(K, n, col.data(), ld);
        for (int o = 0; o < out_ch; ++o) {
          const T* row = gout + o * HW + p0;
          T s = 0;
          for (int j = 0; j < n; ++j) {
            gT[static_cast<std::size_t>(j) * out_pad + o] = row[j];
            s += row[j];
          }
          gb[o] += s;
        }
        for (int n0 = 0; n0 < out_ch; n0 += NR) {
          const int jn = std::min(NR, out_ch - n0);
          for (int pn = 0; pn < num_panels; ++pn) {
            micro_kernel<T>(n, panels.data() + static_cast<std::size_t>(pn) * n * kMR, gT.data() + n0,
                            out_pad, acc);
            const int rn = std::min(kMR, K - pn * kMR);
            for (int j = 0; j < jn; ++j) {
              T* dst = gw + static_cast<std::size_t>(n0 + j) * K + pn * kMR;
              for (int r = 0; r < rn; ++r) dst[r] += acc[r][j];
            }
          }
        }
      }
    }
  }
  for (int g = 0; g < kReduceGroups; ++g) {
    const T* gw = group_w.data() + g * wsize;
    for (std::size_t i = 0; i < wsize; ++i) grad_weight[i] += gw[i];
    for (int o = 0; o < out_ch; ++o) grad_bias[o] += group_b[static_cast<std::size_t>(g) * out_ch + o];
  }
}

#define L2H_INSTANTIATE(T)                                                                       \
  template void conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int, \
                                  int, Tensor<T>&, int);                                         \
  template void conv2d_backward_input<T>(const Tensor<T>&, int, int, std::span<const T>, int,    \
                                         Tensor<T>&);                                            \
  template void conv2d_backward_params<T>(const Tensor<T>&, const Tensor<T>&, int, int, int,     \
                                          std::span<T>, std::span<T>);
L2H_INSTANTIATE(float)
L2H_INSTANTIATE(double)
#undef L2H_INSTANTIATE

}  // namespace l2h::kernels
