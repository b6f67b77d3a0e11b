#include <algorithm>
#include <vector>

#include <omp.h>

#include "efrlfn/kernels.hpp"

namespace efrlfn::kernels {

namespace {

// Output positions o in [lo, hi) whose tap k lands inside [0, extent).
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline TapRange valid_outputs(std::size_t k, std::size_t stride, std::size_t padding,
                              std::size_t extent, std::size_t out_extent) {
  // o*stride + k - padding in [0, extent)
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(padding) - static_cast<std::ptrdiff_t>(k);
  std::ptrdiff_t lo = shift <= 0 ? 0 : (shift + s - 1) / s;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(extent) - 1 + shift);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::ptrdiff_t tasks = static_cast<std::ptrdiff_t>(g.batch * g.out_channels);
  const std::size_t kernel_plane = g.kernel_h * g.kernel_w;

#pragma omp parallel
  {
    std::vector<T> row(g.out_w);
#pragma omp for schedule(static)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) {
      const std::size_t n = static_cast<std::size_t>(task) / g.out_channels;
      const std::size_t co = static_cast<std::size_t>(task) % g.out_channels;
      const T b = bias.empty() ? T(0) : bias[co];
      T* out_plane = output.data() + (n * g.out_channels + co) * g.out_h * g.out_w;

      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        std::fill(row.begin(), row.end(), b);
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const T* in_plane = input.data() + (n * g.in_channels + ci) * g.in_h * g.in_w;
          const T* w_plane = weight.data() + (co * g.in_channels + ci) * kernel_plane;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            const T* in_row = in_plane + static_cast<std::size_t>(iy) * g.in_w;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const T wv = w_plane[ky * g.kernel_w + kx];
              const TapRange r = valid_outputs(kx, g.stride, g.padding, g.in_w, g.out_w);
              const std::size_t shift = kx - g.padding;  // wraps, but ox*stride + shift is in range
              if (g.stride == 1) {
#pragma omp simd
                for (std::size_t ox = r.lo; ox < r.hi; ++ox) row[ox] += in_row[ox + shift] * wv;
              } else {
                for (std::size_t ox = r.lo; ox < r.hi; ++ox)
                  row[ox] += in_row[ox * g.stride + shift] * wv;
              }
            }
          }
        }
        std::copy(row.begin(), row.end(), out_plane + oy * g.out_w);
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in) {
  const std::ptrdiff_t tasks = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
  const std::size_t kernel_plane = g.kernel_h * g.kernel_w;

#pragma omp parallel
  {
    std::vector<T> acc(g.in_h * g.in_w);
#pragma omp for schedule(static)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) {
      const std::size_t n = static_cast<std::size_t>(task) / g.in_channels;
      const std::size_t ci = static_cast<std::size_t>(task) % g.in_channels;
      std::fill(acc.begin(), acc.end(), T(0));

      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const T* g_plane = grad_out.data() + (n * g.out_channels + co) * g.out_h * g.out_w;
        const T* w_plane = weight.data() + (co * g.in_channels + ci) * kernel_plane;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const TapRange rows = valid_outputs(ky, g.stride, g.padding, g.in_h, g.out_h);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const T wv = w_plane[ky * g.kernel_w + kx];
            const TapRange cols = valid_outputs(kx, g.stride, g.padding, g.in_w, g.out_w);
            for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
              const std::size_t iy = oy * g.stride + ky - g.padding;
              T* dst = acc.data() + iy * g.in_w;
              const std::size_t shift = kx - g.padding;
              const T* src = g_plane + oy * g.out_w;
              if (g.stride == 1) {
#pragma omp simd
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox + shift] += src[ox] * wv;
              } else {
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox)
                  dst[ox * g.stride + shift] += src[ox] * wv;
              }
            }
          }
        }
      }
      T* out = grad_in.data() + (n * g.in_channels + ci) * g.in_h * g.in_w;
      for (std::size_t i = 0; i < acc.size(); ++i) out[i] += acc[i];
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> grad_out,
                            std::span<const T> input, std::span<T> grad_weight,
                            std::span<T> grad_bias) {
  const std::ptrdiff_t tasks = static_cast<std::ptrdiff_t>(g.out_channels * g.in_channels);
  const std::size_t kernel_plane = g.kernel_h * g.kernel_w;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t task = 0; task < tasks; ++task) {
    const std::size_t co = static_cast<std::size_t>(task) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(task) % g.in_channels;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      const TapRange rows = valid_outputs(ky, g.stride, g.padding, g.in_h, g.out_h);
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const TapRange cols = valid_outputs(kx, g.stride, g.padding, g.in_w, g.out_w);
        T acc = T(0);
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* g_plane = grad_out.data() + (n * g.out_channels + co) * g.out_h * g.out_w;
          const T* in_plane = input.data() + (n * g.in_channels + ci) * g.in_h * g.in_w;
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            const T* src = in_plane + (oy * g.stride + ky - g.padding) * g.in_w;
            const std::size_t shift = kx - g.padding;
            const T* gr = g_plane + oy * g.out_w;
            for (std::size_t ox = cols.lo; ox < cols.hi; ++ox)
              acc += gr[ox] * src[ox * g.stride + shift];
          }
        }
        grad_weight[(co * g.in_channels + ci) * kernel_plane + ky * g.kernel_w + kx] += acc;
      }
    }
  }

  if (grad_bias.empty()) return;
  const std::ptrdiff_t channels = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < channels; ++c) {
    const std::size_t co = static_cast<std::size_t>(c);
    T acc = T(0);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* g_plane = grad_out.data() + (n * g.out_channels + co) * g.out_h * g.out_w;
      for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) acc += g_plane[i];
    }
    grad_bias[co] += acc;
  }
}

#define EFRLFN_INSTANTIATE(T)                                                                 \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                  std::span<const T>, std::span<T>);                          \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,             \
                                         std::span<const T>, std::span<T>);                   \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,            \
                                          std::span<const T>, std::span<T>, std::span<T>);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn::kernels
