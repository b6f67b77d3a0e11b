#include "efrlfn/losses.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "efrlfn/media_io.hpp"
#include "efrlfn/ops.hpp"

namespace efrlfn {

void LossWeights::validate() const {
  if (charb < 0 || vgg < 0 || sobel < 0) {
    throw std::invalid_argument("LossWeights: weights must be >= 0");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("LossWeights.epsilon: must be > 0");
}

namespace {

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  }
}

template <typename T>
Tensor<T> line_kernel(std::vector<T> taps, bool along_x) {
  return Tensor<T>(along_x ? Shape{1, 1, 1, 3} : Shape{1, 1, 3, 1}, std::move(taps));
}

}  // namespace

template <typename T>
Tensor<T> charbonnier(const Tensor<T>& sr, const Tensor<T>& hr, double eps) {
  require_same("charbonnier", sr, hr);
  if (!(eps > 0)) throw std::invalid_argument("charbonnier: eps must be > 0");
  const Tensor<T> d = sub(sr, hr);
  return mean(sqrt(add_scalar(square(d), static_cast<T>(eps * eps))));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> sobel_map(const Tensor<T>& img) {
  const Shape s = img.shape();
  if (s.h < 3 || s.w < 3) {
    throw std::invalid_argument("sobel_map: image " + std::to_string(s.h) + "x" +
                                std::to_string(s.w) + " smaller than 3x3");
  }
  const Tensor<T> planes = pad_replicate(reshape(img, Shape{s.n * s.c, 1, s.h, s.w}), 1);
  const Tensor<T> none;
  // Separable form: central difference first, then [1,2,1] smoothing. The
  // difference of equal neighbours is exactly zero, so flat regions give
  // exactly zero response.
  const Tensor<T> diff_x = line_kernel<T>({-1, 0, 1}, true), diff_y = line_kernel<T>({-1, 0, 1}, false);
  const Tensor<T> smooth_x = line_kernel<T>({1, 2, 1}, true), smooth_y = line_kernel<T>({1, 2, 1}, false);
  Tensor<T> gx = reshape(conv2d(conv2d(planes, diff_x, none, 1, 0), smooth_y, none, 1, 0), s);
  Tensor<T> gy = reshape(conv2d(conv2d(planes, diff_y, none, 1, 0), smooth_x, none, 1, 0), s);
  return {gx, gy};
}

template <typename T>
Tensor<T> sobel_loss(const Tensor<T>& sr, const Tensor<T>& hr) {
  require_same("sobel_loss", sr, hr);
  const auto [sx, sy] = sobel_map(sr);
  const auto [hx, hy] = sobel_map(hr);
  const Tensor<T> dx = sub(hx, sx);
  const Tensor<T> dy = sub(hy, sy);
  const T count = static_cast<T>(sr.numel());
  return scale(add(sum(square(dx)), sum(square(dy))), T(1) / count);
}

template <typename T>
ConvStackExtractor<T>::ConvStackExtractor(std::uint64_t seed, std::vector<int> widths,
                                          int in_channels) {
  std::mt19937_64 rng(seed);
  std::size_t cin = static_cast<std::size_t>(in_channels);
  for (int width : widths) {
    const auto cout = static_cast<std::size_t>(width);
    Tensor<T> w(Shape{cout, cin, 3, 3});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 9));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.mutable_data()) v = static_cast<T>(dist(rng));
    layers_.emplace_back(std::move(w), Tensor<T>(Shape{cout, 1, 1, 1}));
    cin = cout;
  }
}

template <typename T>
Tensor<T> ConvStackExtractor<T>::extract(const Tensor<T>& image) const {
  Tensor<T> h = image;
  for (const auto& [w, b] : layers_) h = activation(conv2d(h, w, b, 1, 1), Activation::relu);
  return h;
}

template <typename T>
const std::vector<int>& Vgg19Extractor<T>::conv_indices() {
  static const std::vector<int> indices{0,  2,  5,  7,  10, 12, 14, 16,
                                        19, 21, 23, 25, 28, 30, 32, 34};
  return indices;
}

template <typename T>
Vgg19Extractor<T> Vgg19Extractor<T>::load(const std::string& path) {
  const TensorBundle bundle = read_bundle(path);
  Vgg19Extractor out;
  static const std::size_t widths[] = {64,  64,  128, 128, 256, 256, 256, 256,
                                       512, 512, 512, 512, 512, 512, 512, 512};
  auto find = [&](const std::string& name) -> const TensorRecord& {
    for (const auto& rec : bundle.tensors) {
      if (rec.name == name) return rec;
    }
    throw std::invalid_argument("vgg19: weight file " + path + " lacks " + name);
  };
  std::size_t cin = 3;
  for (std::size_t i = 0; i < conv_indices().size(); ++i) {
    const std::string prefix = "features." + std::to_string(conv_indices()[i]);
    const auto& w = find(prefix + ".weight");
    const auto& b = find(prefix + ".bias");
    const std::vector<std::uint32_t> want_w{static_cast<std::uint32_t>(widths[i]),
                                            static_cast<std::uint32_t>(cin), 3, 3};
    if (w.dims != want_w || b.dims != std::vector<std::uint32_t>{want_w[0]}) {
      throw std::invalid_argument("vgg19: unexpected dims for " + prefix);
    }
    out.convs_.emplace_back(
        Tensor<T>(Shape{widths[i], cin, 3, 3}, std::vector<T>(w.values.begin(), w.values.end())),
        Tensor<T>(Shape{widths[i], 1, 1, 1}, std::vector<T>(b.values.begin(), b.values.end())));
    cin = widths[i];
  }
  return out;
}

template <typename T>
Tensor<T> Vgg19Extractor<T>::extract(const Tensor<T>& image) const {
  const Shape s = image.shape();
  if (s.c != 3) throw std::invalid_argument("vgg19: expects 3-channel input");
  if (s.h < 16 || s.w < 16) throw std::invalid_argument("vgg19: input must be at least 16x16");
  static const double mean_rgb[] = {0.485, 0.456, 0.406};
  static const double std_rgb[] = {0.229, 0.224, 0.225};
  // Per-channel affine normalization as a 1x1 conv with diagonal weights.
  std::vector<T> w(9, T(0));
  std::vector<T> b(3);
  for (int c = 0; c < 3; ++c) {
    w[c * 3 + c] = static_cast<T>(1.0 / std_rgb[c]);
    b[c] = static_cast<T>(-mean_rgb[c] / std_rgb[c]);
  }
  Tensor<T> h = conv2d(image, Tensor<T>(Shape{3, 3, 1, 1}, w), Tensor<T>(Shape{3, 1, 1, 1}, b));
  // Pools follow conv 1, 3, 7, 11 (0-based positions in conv_indices).
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = activation(conv2d(h, convs_[i].first, convs_[i].second, 1, 1), Activation::relu);
    if (i == 1 || i == 3 || i == 7 || i == 11) h = max_pool2d(h, 2, 2);
  }
  return h;
}

template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& sr, const Tensor<T>& hr,
                          const FeatureExtractor<T>& extractor) {
  require_same("perceptual_loss", sr, hr);
  // No graph is recorded for hr unless the caller asked for its gradient.
  const Tensor<T> target = extractor.extract(hr);
  const Tensor<T> features = extractor.extract(sr);
  require_same("perceptual_loss features", features, target);
  return mean(abs(sub(target, features)));
}

template <typename T>
Tensor<T> composite_loss(const Tensor<T>& sr, const Tensor<T>& hr, const LossWeights& weights,
                         const FeatureExtractor<T>& extractor) {
  weights.validate();
  require_same("composite_loss", sr, hr);
  Tensor<T> total = Tensor<T>::scalar(T(0));
  if (weights.charb > 0) {
    total = add(total, scale(charbonnier(sr, hr, weights.epsilon), static_cast<T>(weights.charb)));
  }
  if (weights.vgg > 0) {
    total = add(total, scale(perceptual_loss(sr, hr, extractor), static_cast<T>(weights.vgg)));
  }
  if (weights.sobel > 0) {
    total = add(total, scale(sobel_loss(sr, hr), static_cast<T>(weights.sobel)));
  }
  return total;
}

std::string to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::full: return "full";
    case LossVariant::no_charb: return "no_charb";
    case LossVariant::no_vgg: return "no_vgg";
    case LossVariant::no_sobel: return "no_sobel";
    case LossVariant::l1: return "l1";
    case LossVariant::l2: return "l2";
    case LossVariant::lpips_placeholder: return "lpips_placeholder";
  }
  return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (LossVariant v : all_loss_variants()) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("loss: unknown variant '" + std::string(name) + "'");
}

const std::vector<LossVariant>& all_loss_variants() {
  static const std::vector<LossVariant> variants{
      LossVariant::full, LossVariant::no_charb, LossVariant::no_vgg, LossVariant::no_sobel,
      LossVariant::l1,   LossVariant::l2,       LossVariant::lpips_placeholder};
  return variants;
}

template <typename T>
LossFn<T> loss_ablation_suite(LossVariant variant, const LossWeights& weights,
                              std::shared_ptr<const FeatureExtractor<T>> extractor) {
  weights.validate();
  if (!extractor) extractor = std::make_shared<IdentityExtractor<T>>();
  LossWeights w = weights;
  switch (variant) {
    case LossVariant::full: break;
    case LossVariant::no_charb: w.charb = 0; break;
    case LossVariant::no_vgg: w.vgg = 0; break;
    case LossVariant::no_sobel: w.sobel = 0; break;
    case LossVariant::l1:
      return [](const Tensor<T>& sr, const Tensor<T>& hr) {
        Tensor<T> l = mean(abs(sub(sr, hr)));
        return LossBreakdown<T>{l, static_cast<double>(l.item()), 0.0, 0.0};
      };
    case LossVariant::l2:
      return [](const Tensor<T>& sr, const Tensor<T>& hr) {
        Tensor<T> l = mean(square(sub(sr, hr)));
        return LossBreakdown<T>{l, static_cast<double>(l.item()), 0.0, 0.0};
      };
    case LossVariant::lpips_placeholder:
      return [extractor](const Tensor<T>& sr, const Tensor<T>& hr) {
        Tensor<T> l = perceptual_loss(sr, hr, *extractor);
        return LossBreakdown<T>{l, 0.0, static_cast<double>(l.item()), 0.0};
      };
  }
  return [w, extractor](const Tensor<T>& sr, const Tensor<T>& hr) {
    require_same("composite_loss", sr, hr);
    LossBreakdown<T> out;
    out.total = Tensor<T>::scalar(T(0));
    if (w.charb > 0) {
      const Tensor<T> c = charbonnier(sr, hr, w.epsilon);
      out.charb = static_cast<double>(c.item());
      out.total = add(out.total, scale(c, static_cast<T>(w.charb)));
    }
    if (w.vgg > 0) {
      const Tensor<T> p = perceptual_loss(sr, hr, *extractor);
      out.perceptual = static_cast<double>(p.item());
      out.total = add(out.total, scale(p, static_cast<T>(w.vgg)));
    }
    if (w.sobel > 0) {
      const Tensor<T> s = sobel_loss(sr, hr);
      out.sobel = static_cast<double>(s.item());
      out.total = add(out.total, scale(s, static_cast<T>(w.sobel)));
    }
    return out;
  };
}

#define EFRLFN_INSTANTIATE(T)                                                                \
  template Tensor<T> charbonnier(const Tensor<T>&, const Tensor<T>&, double);                \
  template std::pair<Tensor<T>, Tensor<T>> sobel_map(const Tensor<T>&);                      \
  template Tensor<T> sobel_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template class ConvStackExtractor<T>;                                                      \
  template class Vgg19Extractor<T>;                                                          \
  template Tensor<T> perceptual_loss(const Tensor<T>&, const Tensor<T>&,                     \
                                     const FeatureExtractor<T>&);                            \
  template Tensor<T> composite_loss(const Tensor<T>&, const Tensor<T>&, const LossWeights&,  \
                                    const FeatureExtractor<T>&);                             \
  template LossFn<T> loss_ablation_suite(LossVariant, const LossWeights&,                    \
                                         std::shared_ptr<const FeatureExtractor<T>>);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
