#include "efrlfn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace efrlfn {

namespace {

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  }
}

double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = w - k + 1;
  const std::size_t oh = h - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * plane[y * w + x + i];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak) {
  require_same("psnr", a, b);
  if (!(peak > 0)) throw std::invalid_argument("psnr: peak must be > 0");
  if (a.numel() == 0) throw std::invalid_argument("psnr: empty images");
  const auto av = a.data();
  const auto bv = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(av.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  if (size % 2 == 0 || size == 0) throw std::invalid_argument("gaussian_window: size must be odd");
  std::vector<double> taps(size);
  const double centre = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

template <typename T>
std::vector<double> luma(const Tensor<T>& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    throw std::invalid_argument("luma: expects (1,3,h,w) or (1,1,h,w), got " + s.str());
  }
  const auto d = image.data();
  const std::size_t plane = s.plane();
  std::vector<double> y(plane);
  if (s.c == 1) {
    for (std::size_t i = 0; i < plane; ++i) y[i] = static_cast<double>(d[i]);
  } else {
    for (std::size_t i = 0; i < plane; ++i) {
      y[i] = 0.299 * static_cast<double>(d[i]) + 0.587 * static_cast<double>(d[plane + i]) +
             0.114 * static_cast<double>(d[2 * plane + i]);
    }
  }
  return y;
}

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimParams& params) {
  require_same("ssim", a, b);
  const Shape s = a.shape();
  if (s.h < params.window || s.w < params.window) {
    throw std::invalid_argument("ssim: image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                " smaller than the " + std::to_string(params.window) +
                                "-pixel window");
  }
  const auto taps = gaussian_window(params.window, params.sigma);
  const auto ya = luma(a);
  const auto yb = luma(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto mu_a = filter_valid(ya, s.h, s.w, taps);
  const auto mu_b = filter_valid(yb, s.h, s.w, taps);
  const auto e_aa = filter_valid(aa, s.h, s.w, taps);
  const auto e_bb = filter_valid(bb, s.h, s.w, taps);
  const auto e_ab = filter_valid(ab, s.h, s.w, taps);

  const double c1 = (params.k1 * params.peak) * (params.k1 * params.peak);
  const double c2 = (params.k2 * params.peak) * (params.k2 * params.peak);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

template <typename T>
double spatial_information(const Tensor<T>& frame) {
  const Shape s = frame.shape();
  if (s.h < 3 || s.w < 3) throw std::invalid_argument("si: frame smaller than 3x3");
  const auto y = luma(frame);
  std::vector<double> magnitude;
  magnitude.reserve((s.h - 2) * (s.w - 2));
  for (std::size_t r = 1; r + 1 < s.h; ++r)
    for (std::size_t c = 1; c + 1 < s.w; ++c) {
      auto p = [&](std::size_t dr, std::size_t dc) { return y[(r + dr - 1) * s.w + (c + dc - 1)]; };
      const double gx = -p(0, 0) + p(0, 2) - 2 * p(1, 0) + 2 * p(1, 2) - p(2, 0) + p(2, 2);
      const double gy = -p(0, 0) - 2 * p(0, 1) - p(0, 2) + p(2, 0) + 2 * p(2, 1) + p(2, 2);
      magnitude.push_back(std::sqrt(gx * gx + gy * gy));
    }
  return population_std(magnitude);
}

template <typename T>
double temporal_information(const Tensor<T>& prev, const Tensor<T>& cur) {
  require_same("ti", prev, cur);
  const auto a = luma(prev);
  const auto b = luma(cur);
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];
  return population_std(diff);
}

template <typename T>
SiTi sequence_si_ti(std::span<const Tensor<T>> frames) {
  if (frames.empty()) throw std::invalid_argument("si/ti: empty sequence");
  SiTi out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.si = std::max(out.si, spatial_information(frames[i]));
    if (i > 0) out.ti = std::max(out.ti, temporal_information(frames[i - 1], frames[i]));
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("pearson: x has zero variance");
  if (syy == 0.0) throw std::invalid_argument("pearson: y has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

#define EFRLFN_INSTANTIATE(T)                                                      \
  template double psnr(const Tensor<T>&, const Tensor<T>&, double);                \
  template double ssim(const Tensor<T>&, const Tensor<T>&, const SsimParams&);     \
  template std::vector<double> luma(const Tensor<T>&);                             \
  template double spatial_information(const Tensor<T>&);                           \
  template double temporal_information(const Tensor<T>&, const Tensor<T>&);        \
  template SiTi sequence_si_ti(std::span<const Tensor<T>>);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
