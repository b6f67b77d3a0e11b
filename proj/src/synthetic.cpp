#include "efrlfn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace efrlfn {

namespace {

struct Scene {
  double ramp[3][3];  // per channel: base, dx, dy
  struct Shape2d {
    bool disc;
    double cx, cy, rx, ry, softness;
    double colour[3];
  };
  std::vector<Shape2d> shapes;
  double wave_fx, wave_fy, wave_phase, wave_amp;
};

Scene make_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s{};
  for (auto& ch : s.ramp) {
    ch[0] = 0.2 + 0.6 * u(rng);
    ch[1] = 0.4 * (u(rng) - 0.5);
    ch[2] = 0.4 * (u(rng) - 0.5);
  }
  const int shapes = 2 + static_cast<int>(u(rng) * 3.0);
  for (int i = 0; i < shapes; ++i) {
    Scene::Shape2d sh{};
    sh.disc = u(rng) < 0.5;
    sh.cx = u(rng);
    sh.cy = u(rng);
    sh.rx = 0.1 + 0.25 * u(rng);
    sh.ry = 0.1 + 0.25 * u(rng);
    sh.softness = 0.01 + 0.03 * u(rng);
    for (double& c : sh.colour) c = u(rng);
    s.shapes.push_back(sh);
  }
  s.wave_fx = 1.0 + 3.0 * u(rng);
  s.wave_fy = 1.0 + 3.0 * u(rng);
  s.wave_phase = 2.0 * std::numbers::pi * u(rng);
  s.wave_amp = 0.05 + 0.1 * u(rng);
  return s;
}

double smoothstep_edge(double signed_dist, double softness) {
  return 1.0 / (1.0 + std::exp(signed_dist / softness));
}

template <typename T>
Tensor<T> render(const Scene& s, std::size_t h, std::size_t w, double shift) {
  Tensor<T> img(Shape{1, 3, h, w});
  auto d = img.mutable_data();
  const double scale = static_cast<double>(std::max(h, w));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double px = (static_cast<double>(x) + 0.5 + shift) / scale;
      const double py = (static_cast<double>(y) + 0.5) / scale;
      double rgb[3];
      for (int c = 0; c < 3; ++c) rgb[c] = s.ramp[c][0] + s.ramp[c][1] * px + s.ramp[c][2] * py;
      for (const auto& sh : s.shapes) {
        const double dx = (px - sh.cx) / sh.rx;
        const double dy = (py - sh.cy) / sh.ry;
        const double dist = sh.disc ? std::sqrt(dx * dx + dy * dy) - 1.0
                                    : std::max(std::abs(dx), std::abs(dy)) - 1.0;
        const double alpha = smoothstep_edge(dist * std::min(sh.rx, sh.ry), sh.softness);
        for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - alpha) * rgb[c] + alpha * sh.colour[c];
      }
      const double wave = s.wave_amp * std::sin(2.0 * std::numbers::pi *
                                                (s.wave_fx * px + s.wave_fy * py) + s.wave_phase);
      for (int c = 0; c < 3; ++c) {
        d[(static_cast<std::size_t>(c) * h + y) * w + x] =
            static_cast<T>(std::clamp(rgb[c] + wave, 0.0, 1.0));
      }
    }
  return img;
}

}  // namespace

template <typename T>
Tensor<T> synthetic_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  return render<T>(make_scene(seed), h, w, 0.0);
}

template <typename T>
std::vector<NamedImage<T>> synthetic_corpus(std::size_t count, std::size_t h, std::size_t w,
                                            std::uint64_t seed) {
  std::vector<NamedImage<T>> out;
  std::seed_seq seq{seed};
  std::vector<std::uint32_t> seeds(count * 2);
  seq.generate(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu", i);
    const std::uint64_t s = (std::uint64_t{seeds[2 * i]} << 32) | seeds[2 * i + 1];
    out.push_back({name, synthetic_image<T>(h, w, s)});
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> synthetic_sequence(std::size_t frames, std::size_t h, std::size_t w,
                                          double motion, std::uint64_t seed) {
  const Scene s = make_scene(seed);
  std::vector<Tensor<T>> out;
  for (std::size_t f = 0; f < frames; ++f) out.push_back(render<T>(s, h, w, motion * static_cast<double>(f)));
  return out;
}

#define EFRLFN_INSTANTIATE(T)                                                                   \
  template Tensor<T> synthetic_image(std::size_t, std::size_t, std::uint64_t);                  \
  template std::vector<NamedImage<T>> synthetic_corpus(std::size_t, std::size_t, std::size_t,   \
                                                       std::uint64_t);                          \
  template std::vector<Tensor<T>> synthetic_sequence(std::size_t, std::size_t, std::size_t,     \
                                                     double, std::uint64_t);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
