#pragma once

// EfRLFN: a shallow 3x3 feature extractor, a chain of residual blocks
// (three conv+activation refinement stages, an attention gate, one 3x3
// smoothing conv, one block-level skip), a long skip around the chain, and a
// 3x3 conv + pixel-shuffle reconstruction.
//
// Parameter schema, in serialization order (b = 0 .. blocks-1):
//   extract.weight [C,in,3,3]          extract.bias [C]
//   blocks.b.refine.{0,1,2}.weight [C,C,3,3]   .bias [C]
//   eca attention:
//     blocks.b.eca.weight [C,C,1,1]    blocks.b.eca.bias [C]
//   esa attention (F = kEsaChannels):
//     blocks.b.esa.conv1.weight  [F,C,1,1]  .bias [F]
//     blocks.b.esa.conv_f.weight [F,F,1,1]  .bias [F]
//     blocks.b.esa.conv2.weight  [F,F,3,3]  .bias [F]   (stride 2, no padding)
//     blocks.b.esa.conv3.weight  [F,F,3,3]  .bias [F]
//     blocks.b.esa.conv4.weight  [C,F,1,1]  .bias [C]
//   blocks.b.smooth.weight [C,C,3,3]   blocks.b.smooth.bias [C]
//   reconstruct.weight [3*r*r,C,3,3]   reconstruct.bias [3*r*r]
// Biases are rank-1 in files and stored internally as [len,1,1,1].

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "efrlfn/ops.hpp"
#include "efrlfn/tensor.hpp"

namespace efrlfn {

enum class Attention { eca, esa };

inline constexpr int kEsaChannels = 16;
inline constexpr int kRefineStages = 3;

std::string to_string(Activation kind);
std::string to_string(Attention kind);
Activation parse_activation(std::string_view name);
Attention parse_attention(std::string_view name);

struct ModelConfig {
  // Smallest width that puts the default network in the 0.35M-0.39M range.
  int channels = 40;
  int blocks = 6;
  int scale = 2;
  Activation activation = Activation::tanh;
  Attention attention = Attention::eca;
  int in_channels = 3;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the bad field.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;      // internal rank-4 shape
  int rank = 4;     // rank written to weight files (1 for biases)
  std::size_t fan_in = 0;
};

std::vector<ParamSpec> parameter_schema(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config);

template <typename T>
struct ConvWeights {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct EsaWeights {
  ConvWeights<T> conv1;
  ConvWeights<T> conv_f;
  ConvWeights<T> conv2;
  ConvWeights<T> conv3;
  ConvWeights<T> conv4;
};

template <typename T>
struct BlockWeights {
  ConvWeights<T> refine[kRefineStages];
  ConvWeights<T> eca;  // used when attention == eca
  EsaWeights<T> esa;   // used when attention == esa
  ConvWeights<T> smooth;
};

// gate = sigmoid(conv1x1(global_avg_pool(x))); returns x * gate.
template <typename T>
Tensor<T> eca(const Tensor<T>& features, const ConvWeights<T>& weights);

// Spatial gate: 1x1 reduce, stride-2 3x3, max-pool, 3x3, bilinear back to
// h x w, add the 1x1 skip branch, 1x1 restore, sigmoid.
template <typename T>
Tensor<T> esa(const Tensor<T>& features, const EsaWeights<T>& weights);

// y = smooth(attention(refine(x))) + x. When `attention_out` is non-null the
// attention output is stored there.
template <typename T>
Tensor<T> erlfb_forward(const BlockWeights<T>& weights, const Tensor<T>& x, Activation activation,
                        Attention attention, Tensor<T>* attention_out = nullptr);

template <typename T>
class Model {
 public:
  using Parameter = std::pair<std::string, Tensor<T>>;

  // Kaiming-uniform weights (bound 1/sqrt(fan_in)) from the config seed,
  // zero biases.
  static Model build(const ModelConfig& config);
  // Takes ownership of tensors in schema order; shapes are checked.
  static Model from_parameters(const ModelConfig& config, std::vector<Tensor<T>> tensors);

  const ModelConfig& config() const { return config_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter>& parameters() { return params_; }
  const Tensor<T>& param(std::string_view name) const;
  std::size_t size() const;

  // Raw network output (unclamped), differentiable w.r.t. parameters.
  Tensor<T> forward(const Tensor<T>& lr) const;
  // No graph, output clamped to [0, 1].
  Tensor<T> infer(const Tensor<T>& lr) const;
  // Attention outputs of the requested 1-based blocks.
  std::map<int, Tensor<T>> dump_features(const Tensor<T>& lr, const std::set<int>& blocks) const;

  void set_requires_grad(bool on);
  void zero_grad();

  BlockWeights<T> block(int index) const;

 private:
  Model(ModelConfig config, std::vector<Parameter> params);
  Tensor<T> run(const Tensor<T>& lr, const std::set<int>* taps, std::map<int, Tensor<T>>* dumps) const;

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Value-converting copy, e.g. a double training model to float for benchmarks.
template <typename To, typename From>
Model<To> cast_model(const Model<From>& model);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace efrlfn
