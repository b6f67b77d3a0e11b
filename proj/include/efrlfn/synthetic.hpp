#pragma once

// Seeded procedural RGB images: a linear colour ramp, a few soft-edged
// discs and rectangles, and a low-frequency sinusoidal texture.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "efrlfn/dataset.hpp"
#include "efrlfn/tensor.hpp"

namespace efrlfn {

// (1,3,h,w) in [0,1], fully determined by the seed.
template <typename T>
Tensor<T> synthetic_image(std::size_t h, std::size_t w, std::uint64_t seed);

// count images named "synth_000", "synth_001", ...
template <typename T>
std::vector<NamedImage<T>> synthetic_corpus(std::size_t count, std::size_t h, std::size_t w,
                                            std::uint64_t seed);

// Slowly panning frames of one synthetic scene; `motion` is pixels per frame.
template <typename T>
std::vector<Tensor<T>> synthetic_sequence(std::size_t frames, std::size_t h, std::size_t w,
                                          double motion, std::uint64_t seed);

}  // namespace efrlfn
