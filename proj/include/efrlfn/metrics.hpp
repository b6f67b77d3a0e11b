#pragma once

// Reference metrics (PSNR, SSIM), content descriptors (SI, TI) and Pearson
// correlation. Images are (1,3,h,w) RGB or (1,1,h,w) grayscale in [0,1].

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "efrlfn/tensor.hpp"

namespace efrlfn {

// Returned by psnr when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10*log10(peak^2 / MSE), MSE over all channels jointly.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_window(std::size_t size, double sigma);

// Mean local SSIM over valid window positions, computed on BT.601 luma for
// RGB input.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimParams& params = {});

// BT.601 luma plane (h*w values, row-major). Grayscale input passes through.
template <typename T>
std::vector<double> luma(const Tensor<T>& image);

// Population std of the Sobel gradient magnitude of the luma plane over
// interior positions (border pixels excluded).
template <typename T>
double spatial_information(const Tensor<T>& frame);

// Population std of the luma difference cur - prev.
template <typename T>
double temporal_information(const Tensor<T>& prev, const Tensor<T>& cur);

struct SiTi {
  double si = 0.0;
  double ti = 0.0;  // 0 for single-frame sequences
};

// Max of per-frame SI and of per-pair TI across a sequence.
template <typename T>
SiTi sequence_si_ti(std::span<const Tensor<T>> frames);

double pearson(std::span<const double> x, std::span<const double> y);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

}  // namespace efrlfn
