#include <stdexcept>
#include <string>

#include "efrlfn/kernels.hpp"

namespace efrlfn::kernels {

ConvGeometry ConvGeometry::make(const Shape& input, const Shape& weight, std::size_t stride,
                                std::size_t padding) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("conv2d: " + what);
  };
  if (stride < 1) fail("stride must be >= 1");
  if (weight.h % 2 == 0 || weight.w % 2 == 0) {
    fail("kernel dims must be odd, got " + std::to_string(weight.h) + "x" +
         std::to_string(weight.w));
  }
  if (weight.c != input.c) {
    fail("in_channels mismatch: input has " + std::to_string(input.c) + ", weight expects " +
         std::to_string(weight.c));
  }
  if (input.h + 2 * padding < weight.h) {
    fail("height " + std::to_string(input.h) + " with padding " + std::to_string(padding) +
         " is smaller than kernel height " + std::to_string(weight.h));
  }
  if (input.w + 2 * padding < weight.w) {
    fail("width " + std::to_string(input.w) + " with padding " + std::to_string(padding) +
         " is smaller than kernel width " + std::to_string(weight.w));
  }
  ConvGeometry g;
  g.batch = input.n;
  g.in_channels = input.c;
  g.in_h = input.h;
  g.in_w = input.w;
  g.out_channels = weight.n;
  g.kernel_h = weight.h;
  g.kernel_w = weight.w;
  g.stride = stride;
  g.padding = padding;
  g.out_h = (input.h + 2 * padding - weight.h) / stride + 1;
  g.out_w = (input.w + 2 * padding - weight.w) / stride + 1;
  return g;
}

namespace {

// Input coordinate for output position `o` and kernel tap `k`; false when the
// tap falls in the zero padding.
inline bool source_index(std::size_t o, std::size_t k, std::size_t stride, std::size_t padding,
                         std::size_t extent, std::size_t& src) {
  const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride + k) -
                             static_cast<std::ptrdiff_t>(padding);
  if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(extent)) return false;
  src = static_cast<std::size_t>(pos);
  return true;
}

}  // namespace

template <typename T>
void conv2d_forward_reference(const ConvGeometry& g, std::span<const T> input,
                              std::span<const T> weight, std::span<const T> bias,
                              std::span<T> output) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias.empty() ? T(0) : bias[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              std::size_t iy;
              if (!source_index(oy, ky, g.stride, g.padding, g.in_h, iy)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                std::size_t ix;
                if (!source_index(ox, kx, g.stride, g.padding, g.in_w, ix)) continue;
                acc += input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] *
                       weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              }
            }
          output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = acc;
        }
}

template <typename T>
void conv2d_backward_input_reference(const ConvGeometry& g, std::span<const T> grad_out,
                                     std::span<const T> weight, std::span<T> grad_in) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
      for (std::size_t iy = 0; iy < g.in_h; ++iy)
        for (std::size_t ix = 0; ix < g.in_w; ++ix) {
          T acc = T(0);
          for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(iy + g.padding) -
                                        static_cast<std::ptrdiff_t>(ky);
              if (ny < 0 || ny % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
              const std::size_t oy = static_cast<std::size_t>(ny) / g.stride;
              if (oy >= g.out_h) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(ix + g.padding) -
                                          static_cast<std::ptrdiff_t>(kx);
                if (nx < 0 || nx % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
                const std::size_t ox = static_cast<std::size_t>(nx) / g.stride;
                if (ox >= g.out_w) continue;
                acc += grad_out[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] *
                       weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              }
            }
          grad_in[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] += acc;
        }
}

template <typename T>
void conv2d_backward_weight_reference(const ConvGeometry& g, std::span<const T> grad_out,
                                      std::span<const T> input, std::span<T> grad_weight,
                                      std::span<T> grad_bias) {
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          T acc = T(0);
          for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
              std::size_t iy;
              if (!source_index(oy, ky, g.stride, g.padding, g.in_h, iy)) continue;
              for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                std::size_t ix;
                if (!source_index(ox, kx, g.stride, g.padding, g.in_w, ix)) continue;
                acc += grad_out[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] *
                       input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          grad_weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] += acc;
        }
    if (!grad_bias.empty()) {
      T acc = T(0);
      for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t oy = 0; oy < g.out_h; ++oy)
          for (std::size_t ox = 0; ox < g.out_w; ++ox)
            acc += grad_out[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
      grad_bias[co] += acc;
    }
  }
}

#define EFRLFN_INSTANTIATE(T)                                                                  \
  template void conv2d_forward_reference<T>(const ConvGeometry&, std::span<const T>,           \
                                            std::span<const T>, std::span<const T>,            \
                                            std::span<T>);                                     \
  template void conv2d_backward_input_reference<T>(const ConvGeometry&, std::span<const T>,    \
                                                   std::span<const T>, std::span<T>);          \
  template void conv2d_backward_weight_reference<T>(const ConvGeometry&, std::span<const T>,   \
                                                    std::span<const T>, std::span<T>,          \
                                                    std::span<T>);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn::kernels
