#include <string>

#include "l2h/kernels.hpp"

namespace l2h::reference {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                    int out_ch, int ks, Tensor<T>& out, int off) {
  const int C = in.channels, H = in.height, W = in.width, pad = ks / 2;
  if (weight.size() != static_cast<std::size_t>(out_ch) * C * ks * ks || out.height != H ||
      out.width != W || off + out_ch > out.channels || bias.size() != static_cast<std::size_t>(out_ch))
    throw ShapeError("reference::conv2d_forward: shape mismatch");
  for (int o = 0; o < out_ch; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        T acc = 0;
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < ks; ++ky)
            for (int kx = 0; kx < ks; ++kx) {
              const int sy = y + ky - pad, sx = x + kx - pad;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += weight[((static_cast<std::size_t>(o) * C + c) * ks + ky) * ks + kx] * in.at(c, sy, sx);
            }
        out.at(off + o, y, x) = acc + bias[o];
      }
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, int off, int out_ch, std::span<const T> weight,
                           int ks, Tensor<T>& grad_in) {
  const int C = grad_in.channels, H = grad_in.height, W = grad_in.width, pad = ks / 2;
  if (weight.size() != static_cast<std::size_t>(out_ch) * C * ks * ks || grad_out.height != H ||
      grad_out.width != W || off + out_ch > grad_out.channels)
    throw ShapeError("reference::conv2d_backward_input: shape mismatch");
  // Scatter form: out(o, y, x) reads in(c, y + ky - pad, x + kx - pad).
  for (int o = 0; o < out_ch; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const T g = grad_out.at(off + o, y, x);
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < ks; ++ky)
            for (int kx = 0; kx < ks; ++kx) {
              const int sy = y + ky - pad, sx = x + kx - pad;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              grad_in.at(c, sy, sx) += weight[((static_cast<std::size_t>(o) * C + c) * ks + ky) * ks + kx] * g;
            }
      }
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& in, const Tensor<T>& grad_out, int off, int out_ch,
                            int ks, std::span<T> grad_weight, std::span<T> grad_bias) {
  const int C = in.channels, H = in.height, W = in.width, pad = ks / 2;
  if (grad_weight.size() != static_cast<std::size_t>(out_ch) * C * ks * ks ||
      grad_bias.size() != static_cast<std::size_t>(out_ch) || grad_out.height != H ||
      grad_out.width != W || off + out_ch > grad_out.channels)
    throw ShapeError("reference::conv2d_backward_params: shape mismatch");
  for (int o = 0; o < out_ch; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const T g = grad_out.at(off + o, y, x);
        grad_bias[o] += g;
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < ks; ++ky)
            for (int kx = 0; kx < ks; ++kx) {
              const int sy = y + ky - pad, sx = x + kx - pad;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              grad_weight[((static_cast<std::size_t>(o) * C + c) * ks + ky) * ks + kx] += g * in.at(c, sy, sx);
            }
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

}  // namespace l2h::reference
