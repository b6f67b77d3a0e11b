#include "efrlfn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "efrlfn/kernels.hpp"

namespace efrlfn {

namespace {

[[noreturn]] void reject(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return;
  const char* dims[] = {"n", "c", "h", "w"};
  const std::size_t av[] = {a.n, a.c, a.h, a.w};
  const std::size_t bv[] = {b.n, b.c, b.h, b.w};
  for (int i = 0; i < 4; ++i) {
    if (av[i] != bv[i]) {
      reject(op, std::string("shape mismatch in dim ") + dims[i] + ": " + a.str() + " vs " +
                     b.str());
    }
  }
}

// One element per iteration, so parallel and serial results coincide.
template <typename F>
void for_each_index(std::size_t count, F&& f) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static) if (count > 32768)
  for (std::ptrdiff_t i = 0; i < n; ++i) f(static_cast<std::size_t>(i));
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const char* name, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = fwd(in[i]); });
  return Tensor<T>::make_result(
      x.shape(), std::move(out), name, {x},
      [x, deriv](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        const auto in = x.data();
        for_each_index(g.size(), [&](std::size_t i) { gx[i] += g[i] * deriv(in[i]); });
      });
}

template <typename T>
T sigmoid_value(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = av[i] + bv[i]; });
  return Tensor<T>::make_result(
      a.shape(), std::move(out), "add", {a, b},
      [](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        for (auto* gi : grads) {
          if (!gi) continue;
          for_each_index(g.size(), [&](std::size_t i) { (*gi)[i] += g[i]; });
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = av[i] - bv[i]; });
  return Tensor<T>::make_result(
      a.shape(), std::move(out), "sub", {a, b},
      [](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (grads[0]) for_each_index(g.size(), [&](std::size_t i) { (*grads[0])[i] += g[i]; });
        if (grads[1]) for_each_index(g.size(), [&](std::size_t i) { (*grads[1])[i] -= g[i]; });
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = av[i] * bv[i]; });
  return Tensor<T>::make_result(
      a.shape(), std::move(out), "mul", {a, b},
      [a, b](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        const auto av = a.data();
        const auto bv = b.data();
        if (grads[0]) for_each_index(g.size(), [&](std::size_t i) { (*grads[0])[i] += g[i] * bv[i]; });
        if (grads[1]) for_each_index(g.size(), [&](std::size_t i) { (*grads[1])[i] += g[i] * av[i]; });
      });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary<T>(
      "add_scalar", x, [value](T v) { return v + value; }, [](T) { return T(1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary<T>(
      "scale", x, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  for (T v : x.data()) {
    if (v < T(0)) reject("sqrt", "negative input");
  }
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); },
      [](T v) { return T(0.5) / std::sqrt(v); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {acc}, "sum", {x},
      [](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        for (auto& v : *grads[0]) v += g[0];
      });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) reject("mean", "empty tensor");
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const T count = static_cast<T>(x.numel());
  return Tensor<T>::make_result(
      Shape{1, 1, 1, 1}, {acc / count}, "mean", {x},
      [count](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        const T share = g[0] / count;
        for (auto& v : *grads[0]) v += share;
      });
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::tanh:
      return unary<T>(
          "tanh", x, [](T v) { return std::tanh(v); },
          [](T v) {
            const T t = std::tanh(v);
            return T(1) - t * t;
          });
    case Activation::relu:
      return unary<T>(
          "relu", x, [](T v) { return v > T(0) ? v : T(0); },
          [](T v) { return v > T(0) ? T(1) : T(0); });
    case Activation::shifted_sigmoid:
      return unary<T>(
          "shifted_sigmoid", x, [](T v) { return sigmoid_value(v) - T(0.5); },
          [](T v) {
            const T s = sigmoid_value(v);
            return s * (T(1) - s);
          });
  }
  reject("activation", "unknown kind");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x, [](T v) { return sigmoid_value(v); },
      [](T v) {
        const T s = sigmoid_value(v);
        return s * (T(1) - s);
      });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  const auto geom = kernels::ConvGeometry::make(input.shape(), weight.shape(), stride, padding);
  const bool has_bias = bias.numel() > 0;
  if (has_bias && bias.numel() != geom.out_channels) {
    reject("conv2d", "bias has " + std::to_string(bias.numel()) + " values for " +
                         std::to_string(geom.out_channels) + " output channels");
  }
  std::vector<T> out(geom.output_shape().numel());
  kernels::conv2d_forward<T>(geom, input.data(), weight.data(),
                             has_bias ? bias.data() : std::span<const T>{}, out);

  std::vector<Tensor<T>> inputs{input, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor<T>::make_result(
      geom.output_shape(), std::move(out), "conv2d", std::move(inputs),
      [geom, input, weight, has_bias](std::span<const T> g,
                                      std::span<std::vector<T>* const> grads) {
        if (grads[0]) kernels::conv2d_backward_input<T>(geom, g, weight.data(), *grads[0]);
        const bool want_bias = has_bias && grads[2] != nullptr;
        if (grads[1] || want_bias) {
          // Weight and bias sums share one pass; scratch stands in for an
          // unrequested weight gradient.
          std::vector<T> scratch;
          std::span<T> gw;
          if (grads[1]) {
            gw = *grads[1];
          } else {
            scratch.assign(weight.numel(), T(0));
            gw = scratch;
          }
          kernels::conv2d_backward_weight<T>(geom, g, input.data(), gw,
                                             want_bias ? std::span<T>(*grads[2]) : std::span<T>{});
        }
      });
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r) {
  const Shape s = x.shape();
  if (r < 1) reject("pixel_shuffle", "factor must be >= 1");
  if (s.c % (r * r) != 0) {
    reject("pixel_shuffle", "channel count " + std::to_string(s.c) + " not divisible by r^2 = " +
                                std::to_string(r * r));
  }
  const Shape o{s.n, s.c / (r * r), s.h * r, s.w * r};
  // out index -> in index
  std::vector<std::size_t> source(o.numel());
  for (std::size_t n = 0; n < o.n; ++n)
    for (std::size_t c = 0; c < o.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t xx = 0; xx < s.w; ++xx)
            for (std::size_t j = 0; j < r; ++j) {
              const std::size_t out_idx = ((n * o.c + c) * o.h + y * r + i) * o.w + xx * r + j;
              const std::size_t in_idx = ((n * s.c + c * r * r + i * r + j) * s.h + y) * s.w + xx;
              source[out_idx] = in_idx;
            }
  std::vector<T> out(o.numel());
  const auto in = x.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = in[source[i]]; });
  return Tensor<T>::make_result(
      o, std::move(out), "pixel_shuffle", {x},
      [source = std::move(source)](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(g.size(), [&](std::size_t i) { gx[source[i]] += g[i]; });
      });
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r) {
  const Shape s = x.shape();
  if (r < 1) reject("pixel_unshuffle", "factor must be >= 1");
  if (s.h % r != 0 || s.w % r != 0) {
    reject("pixel_unshuffle", "spatial dims " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                  " not divisible by " + std::to_string(r));
  }
  const Shape o{s.n, s.c * r * r, s.h / r, s.w / r};
  std::vector<std::size_t> source(o.numel());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
          for (std::size_t y = 0; y < o.h; ++y)
            for (std::size_t xx = 0; xx < o.w; ++xx) {
              const std::size_t out_idx = ((n * o.c + c * r * r + i * r + j) * o.h + y) * o.w + xx;
              const std::size_t in_idx = ((n * s.c + c) * s.h + y * r + i) * s.w + xx * r + j;
              source[out_idx] = in_idx;
            }
  std::vector<T> out(o.numel());
  const auto in = x.data();
  for_each_index(out.size(), [&](std::size_t i) { out[i] = in[source[i]]; });
  return Tensor<T>::make_result(
      o, std::move(out), "pixel_unshuffle", {x},
      [source = std::move(source)](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(g.size(), [&](std::size_t i) { gx[source[i]] += g[i]; });
      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape s = x.shape();
  if (s.h == 0 || s.w == 0) reject("global_avg_pool", "empty spatial plane " + s.str());
  const std::size_t plane = s.plane();
  const std::size_t planes = s.n * s.c;
  std::vector<T> out(planes);
  const auto in = x.data();
  for_each_index(planes, [&](std::size_t p) {
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) acc += in[p * plane + i];
    out[p] = acc / static_cast<T>(plane);
  });
  return Tensor<T>::make_result(
      Shape{s.n, s.c, 1, 1}, std::move(out), "global_avg_pool", {x},
      [plane, planes](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(planes, [&](std::size_t p) {
          const T share = g[p] / static_cast<T>(plane);
          for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += share;
        });
      });
}

template <typename T>
Tensor<T> channel_gate(const Tensor<T>& features, const Tensor<T>& gate) {
  const Shape s = features.shape();
  const Shape gs = gate.shape();
  if (gs.n != s.n || gs.c != s.c || gs.h != 1 || gs.w != 1) {
    reject("channel_gate", "gate shape " + gs.str() + " does not match features " + s.str());
  }
  const std::size_t plane = s.plane();
  const std::size_t planes = s.n * s.c;
  std::vector<T> out(features.numel());
  const auto f = features.data();
  const auto gt = gate.data();
  for_each_index(planes, [&](std::size_t p) {
    for (std::size_t i = 0; i < plane; ++i) out[p * plane + i] = f[p * plane + i] * gt[p];
  });
  return Tensor<T>::make_result(
      s, std::move(out), "channel_gate", {features, gate},
      [features, gate, plane, planes](std::span<const T> g,
                                      std::span<std::vector<T>* const> grads) {
        const auto f = features.data();
        const auto gt = gate.data();
        for_each_index(planes, [&](std::size_t p) {
          if (grads[0]) {
            auto& gf = *grads[0];
            for (std::size_t i = 0; i < plane; ++i) gf[p * plane + i] += g[p * plane + i] * gt[p];
          }
          if (grads[1]) {
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) acc += g[p * plane + i] * f[p * plane + i];
            (*grads[1])[p] += acc;
          }
        });
      });
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride) {
  const Shape s = x.shape();
  if (kernel < 1 || stride < 1) reject("max_pool2d", "kernel and stride must be >= 1");
  if (s.h < kernel) {
    reject("max_pool2d", "height " + std::to_string(s.h) + " smaller than kernel " +
                             std::to_string(kernel));
  }
  if (s.w < kernel) {
    reject("max_pool2d", "width " + std::to_string(s.w) + " smaller than kernel " +
                             std::to_string(kernel));
  }
  const Shape o{s.n, s.c, (s.h - kernel) / stride + 1, (s.w - kernel) / stride + 1};
  std::vector<T> out(o.numel());
  std::vector<std::size_t> argmax(o.numel());
  const auto in = x.data();
  for_each_index(s.n * s.c, [&](std::size_t p) {
    const T* plane = in.data() + p * s.plane();
    for (std::size_t oy = 0; oy < o.h; ++oy)
      for (std::size_t ox = 0; ox < o.w; ++ox) {
        std::size_t best = (oy * stride) * s.w + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = (oy * stride + ky) * s.w + ox * stride + kx;
            if (plane[idx] > plane[best]) best = idx;
          }
        const std::size_t out_idx = p * o.plane() + oy * o.w + ox;
        out[out_idx] = plane[best];
        argmax[out_idx] = p * s.plane() + best;
      }
  });
  return Tensor<T>::make_result(
      o, std::move(out), "max_pool2d", {x},
      [argmax = std::move(argmax), planes = s.n * s.c, out_plane = o.plane()](
          std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        // Windows overlap, so scatter one input plane per worker.
        for_each_index(planes, [&](std::size_t p) {
          for (std::size_t i = p * out_plane; i < (p + 1) * out_plane; ++i) gx[argmax[i]] += g[i];
        });
      });
}

namespace {

struct LinearTap {
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  double frac = 0.0;
};

std::vector<LinearTap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<LinearTap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    taps[o].i0 = i0;
    taps[o].i1 = std::min(i0 + 1, in - 1);
    taps[o].frac = src - static_cast<double>(i0);
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  const Shape s = x.shape();
  if (s.h == 0 || s.w == 0) reject("upsample_bilinear", "empty input " + s.str());
  if (out_h == 0 || out_w == 0) reject("upsample_bilinear", "empty output size");
  const Shape o{s.n, s.c, out_h, out_w};
  const auto ty = bilinear_taps(s.h, out_h);
  const auto tx = bilinear_taps(s.w, out_w);
  std::vector<T> out(o.numel());
  const auto in = x.data();
  for_each_index(s.n * s.c, [&](std::size_t p) {
    const T* plane = in.data() + p * s.plane();
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty[oy].frac);
      const T* r0 = plane + ty[oy].i0 * s.w;
      const T* r1 = plane + ty[oy].i1 * s.w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T top = (T(1) - fx) * r0[tx[ox].i0] + fx * r0[tx[ox].i1];
        const T bot = (T(1) - fx) * r1[tx[ox].i0] + fx * r1[tx[ox].i1];
        out[p * o.plane() + oy * out_w + ox] = (T(1) - fy) * top + fy * bot;
      }
    }
  });
  return Tensor<T>::make_result(
      o, std::move(out), "upsample_bilinear", {x},
      [ty, tx, s, o](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(s.n * s.c, [&](std::size_t p) {
          T* plane = gx.data() + p * s.plane();
          for (std::size_t oy = 0; oy < o.h; ++oy) {
            const T fy = static_cast<T>(ty[oy].frac);
            for (std::size_t ox = 0; ox < o.w; ++ox) {
              const T fx = static_cast<T>(tx[ox].frac);
              const T gv = g[p * o.plane() + oy * o.w + ox];
              plane[ty[oy].i0 * s.w + tx[ox].i0] += gv * (T(1) - fy) * (T(1) - fx);
              plane[ty[oy].i0 * s.w + tx[ox].i1] += gv * (T(1) - fy) * fx;
              plane[ty[oy].i1 * s.w + tx[ox].i0] += gv * fy * (T(1) - fx);
              plane[ty[oy].i1 * s.w + tx[ox].i1] += gv * fy * fx;
            }
          }
        });
      });
}

template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& x, std::size_t pad) {
  const Shape s = x.shape();
  if (s.h == 0 || s.w == 0) reject("pad_replicate", "empty input " + s.str());
  const Shape o{s.n, s.c, s.h + 2 * pad, s.w + 2 * pad};
  auto src_index = [s, pad](std::size_t y, std::size_t x_) {
    const std::size_t sy = y < pad ? 0 : std::min(y - pad, s.h - 1);
    const std::size_t sx = x_ < pad ? 0 : std::min(x_ - pad, s.w - 1);
    return sy * s.w + sx;
  };
  std::vector<T> out(o.numel());
  const auto in = x.data();
  for_each_index(s.n * s.c, [&](std::size_t p) {
    for (std::size_t y = 0; y < o.h; ++y)
      for (std::size_t x_ = 0; x_ < o.w; ++x_)
        out[p * o.plane() + y * o.w + x_] = in[p * s.plane() + src_index(y, x_)];
  });
  return Tensor<T>::make_result(
      o, std::move(out), "pad_replicate", {x},
      [s, o, src_index](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(s.n * s.c, [&](std::size_t p) {
          for (std::size_t y = 0; y < o.h; ++y)
            for (std::size_t x_ = 0; x_ < o.w; ++x_)
              gx[p * s.plane() + src_index(y, x_)] += g[p * o.plane() + y * o.w + x_];
        });
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    reject("reshape", "cannot view " + x.shape().str() + " as " + shape.str());
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return Tensor<T>::make_result(
      shape, std::move(out), "reshape", {x},
      [](std::span<const T> g, std::span<std::vector<T>* const> grads) {
        if (!grads[0]) return;
        auto& gx = *grads[0];
        for_each_index(g.size(), [&](std::size_t i) { gx[i] += g[i]; });
      });
}

#define EFRLFN_INSTANTIATE(T)                                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> square(const Tensor<T>&);                                               \
  template Tensor<T> sqrt(const Tensor<T>&);                                                 \
  template Tensor<T> abs(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> activation(const Tensor<T>&, Activation);                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            std::size_t, std::size_t);                                       \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                      \
  template Tensor<T> channel_gate(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::size_t, std::size_t);          \
  template Tensor<T> pad_replicate(const Tensor<T>&, std::size_t);                          \
  template Tensor<T> reshape(const Tensor<T>&, Shape);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
