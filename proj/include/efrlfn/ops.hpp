#pragma once

// Differentiable operators on Tensor. Every op validates shapes and throws
// std::invalid_argument with a message naming the offending dimension.
// Reductions accumulate left to right in storage order, so results are
// reproducible run to run.

#include <cstddef>

#include "efrlfn/tensor.hpp"

namespace efrlfn {

enum class Activation { tanh, relu, shifted_sigmoid };

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
// Subgradient 0 at the kink.
template <typename T> Tensor<T> abs(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

template <typename T> Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);

// Cross-correlation with zero padding. `bias` may be an undefined/empty
// tensor; otherwise it holds out_channels values.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

// out[n, c, y*r + i, x*r + j] = in[n, c*r*r + i*r + j, y, x]
template <typename T> Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r);
template <typename T> Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r);

template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

// features[n,c,h,w] * gate[n,c,1,1], broadcast over the plane.
template <typename T> Tensor<T> channel_gate(const Tensor<T>& features, const Tensor<T>& gate);

// No padding; windows that would run past the edge are dropped.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride);

// Bilinear resampling with half-pixel centres (align_corners = false).
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

// Same storage order, new shape of equal element count.
// Edge-replicating spatial padding by `pad` pixels on every side.
template <typename T> Tensor<T> pad_replicate(const Tensor<T>& x, std::size_t pad);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

}  // namespace efrlfn
