#pragma once

// Training objective: Charbonnier reconstruction + perceptual feature L1 +
// Sobel edge term, each weighted. All reductions are means over elements.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "efrlfn/tensor.hpp"

namespace efrlfn {

struct LossWeights {
  double charb = 1.0;
  double vgg = 1e-3;
  double sobel = 1e-1;
  double epsilon = 1e-3;

  void validate() const;
};

// mean over elements of sqrt((sr - hr)^2 + eps^2)
template <typename T>
Tensor<T> charbonnier(const Tensor<T>& sr, const Tensor<T>& hr, double eps);

// Per-channel 3x3 Sobel responses, edge-replicate padding 1. Gx = [[-1,0,1],[-2,0,2],[-1,0,1]],
// Gy its transpose. Requires h, w >= 3.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sobel_map(const Tensor<T>& img);

// (sum (dGx)^2 + sum (dGy)^2) / numel(img)
template <typename T>
Tensor<T> sobel_loss(const Tensor<T>& sr, const Tensor<T>& hr);

// Fixed feed-forward feature map for the perceptual term. Its own weights
// never receive gradients; gradients do flow to the image.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Tensor<T> extract(const Tensor<T>& image) const = 0;
  virtual std::string name() const = 0;
};

template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  Tensor<T> extract(const Tensor<T>& image) const override { return image; }
  std::string name() const override { return "identity"; }
};

// Seeded stack of 3x3 conv + ReLU layers. Stands in for a pretrained network
// when none is supplied.
template <typename T>
class ConvStackExtractor final : public FeatureExtractor<T> {
 public:
  explicit ConvStackExtractor(std::uint64_t seed, std::vector<int> widths = {8, 8},
                              int in_channels = 3);
  Tensor<T> extract(const Tensor<T>& image) const override;
  std::string name() const override { return "conv_stack"; }
  const std::vector<std::pair<Tensor<T>, Tensor<T>>>& layers() const { return layers_; }

 private:
  std::vector<std::pair<Tensor<T>, Tensor<T>>> layers_;
};

// VGG-19 feature stack through the ReLU after conv5_4. Weights come from an
// external tensor bundle (see media_io.hpp) with torchvision-style names
// "features.<i>.weight" / "features.<i>.bias". Inputs in [0,1] RGB are
// normalized with the ImageNet mean/std first.
template <typename T>
class Vgg19Extractor final : public FeatureExtractor<T> {
 public:
  static Vgg19Extractor load(const std::string& path);
  Tensor<T> extract(const Tensor<T>& image) const override;
  std::string name() const override { return "vgg19_conv5_4"; }

  // Layer indices of the 16 convolutions in torchvision's vgg19.features.
  static const std::vector<int>& conv_indices();

 private:
  std::vector<std::pair<Tensor<T>, Tensor<T>>> convs_;
};

// mean |phi(hr) - phi(sr)|
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& sr, const Tensor<T>& hr,
                          const FeatureExtractor<T>& extractor);

template <typename T>
Tensor<T> composite_loss(const Tensor<T>& sr, const Tensor<T>& hr, const LossWeights& weights,
                         const FeatureExtractor<T>& extractor);

enum class LossVariant { full, no_charb, no_vgg, no_sobel, l1, l2, lpips_placeholder };

std::string to_string(LossVariant variant);
LossVariant parse_loss_variant(std::string_view name);
const std::vector<LossVariant>& all_loss_variants();

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  double charb = 0.0;
  double perceptual = 0.0;
  double sobel = 0.0;
};

template <typename T>
using LossFn = std::function<LossBreakdown<T>(const Tensor<T>& sr, const Tensor<T>& hr)>;

// Objective for one entry of the loss ablation grid. `full`/`no_*` use the
// composite with the named term's weight zeroed; `l1`/`l2` are plain pixel
// losses; `lpips_placeholder` is the perceptual term alone on `extractor`.
template <typename T>
LossFn<T> loss_ablation_suite(LossVariant variant, const LossWeights& weights,
                              std::shared_ptr<const FeatureExtractor<T>> extractor);

}  // namespace efrlfn
