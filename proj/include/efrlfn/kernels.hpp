#pragma once

// Raw 2-D convolution kernels on NCHW buffers.
//
// Each kernel comes in two flavours: an OpenMP-parallel one used by the
// tensor ops, and a serial nested-loop reference kept for testing and for the
// benchmark. Both accumulate every output element in the same order, so
// they agree bit for bit:
//   forward      acc = bias;  for ci, ky, kx:  acc += in * w
//   grad input   acc = 0;     for co, ky, kx:  acc += g * w,  then dst += acc
//   grad weight  acc = 0;     for n, oy, ox:   acc += g * in, then dst += acc
//   grad bias    acc = 0;     for n, oy, ox:   acc += g,      then dst += acc
// Out-of-bounds taps (zero padding) are skipped, not multiplied by zero.

#include <cstddef>
#include <span>

#include "efrlfn/tensor.hpp"

namespace efrlfn::kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  // Validates shapes and derives the output extent; throws
  // std::invalid_argument naming the offending dimension.
  static ConvGeometry make(const Shape& input, const Shape& weight, std::size_t stride,
                           std::size_t padding);

  Shape output_shape() const { return {batch, out_channels, out_h, out_w}; }
};

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);
template <typename T>
void conv2d_forward_reference(const ConvGeometry& g, std::span<const T> input,
                              std::span<const T> weight, std::span<const T> bias,
                              std::span<T> output);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_out,
                           std::span<const T> weight, std::span<T> grad_in);
template <typename T>
void conv2d_backward_input_reference(const ConvGeometry& g, std::span<const T> grad_out,
                                     std::span<const T> weight, std::span<T> grad_in);

// grad_bias may be empty when the convolution has no bias.
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> grad_out,
                            std::span<const T> input, std::span<T> grad_weight,
                            std::span<T> grad_bias);
template <typename T>
void conv2d_backward_weight_reference(const ConvGeometry& g, std::span<const T> grad_out,
                                      std::span<const T> input, std::span<T> grad_weight,
                                      std::span<T> grad_bias);

}  // namespace efrlfn::kernels
