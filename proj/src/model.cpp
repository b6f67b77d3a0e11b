#include "efrlfn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace efrlfn {

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::shifted_sigmoid: return "shifted_sigmoid";
  }
  return "?";
}

std::string to_string(Attention kind) {
  return kind == Attention::eca ? "eca" : "esa";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "shifted_sigmoid") return Activation::shifted_sigmoid;
  throw std::invalid_argument("activation: unknown kind '" + std::string(name) + "'");
}

Attention parse_attention(std::string_view name) {
  if (name == "eca") return Attention::eca;
  if (name == "esa") return Attention::esa;
  throw std::invalid_argument("attention: unknown kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("ModelConfig." + field + ": " + why);
  };
  if (channels < 1) fail("channels", "must be >= 1, got " + std::to_string(channels));
  if (blocks < 1) fail("blocks", "must be >= 1, got " + std::to_string(blocks));
  if (scale != 2 && scale != 4) fail("scale", "must be 2 or 4, got " + std::to_string(scale));
  if (in_channels < 1) fail("in_channels", "must be >= 1, got " + std::to_string(in_channels));
}

namespace {

void add_conv(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t cout,
              std::size_t cin, std::size_t k) {
  const std::size_t fan_in = cin * k * k;
  out.push_back({prefix + ".weight", Shape{cout, cin, k, k}, 4, fan_in});
  out.push_back({prefix + ".bias", Shape{cout, 1, 1, 1}, 1, fan_in});
}

}  // namespace

std::vector<ParamSpec> parameter_schema(const ModelConfig& config) {
  config.validate();
  const auto c = static_cast<std::size_t>(config.channels);
  const auto f = static_cast<std::size_t>(kEsaChannels);
  const auto r = static_cast<std::size_t>(config.scale);
  std::vector<ParamSpec> schema;
  add_conv(schema, "extract", c, static_cast<std::size_t>(config.in_channels), 3);
  for (int b = 0; b < config.blocks; ++b) {
    const std::string prefix = "blocks." + std::to_string(b);
    for (int s = 0; s < kRefineStages; ++s) {
      add_conv(schema, prefix + ".refine." + std::to_string(s), c, c, 3);
    }
    if (config.attention == Attention::eca) {
      add_conv(schema, prefix + ".eca", c, c, 1);
    } else {
      add_conv(schema, prefix + ".esa.conv1", f, c, 1);
      add_conv(schema, prefix + ".esa.conv_f", f, f, 1);
      add_conv(schema, prefix + ".esa.conv2", f, f, 3);
      add_conv(schema, prefix + ".esa.conv3", f, f, 3);
      add_conv(schema, prefix + ".esa.conv4", c, f, 1);
    }
    add_conv(schema, prefix + ".smooth", c, c, 3);
  }
  add_conv(schema, "reconstruct", 3 * r * r, c, 3);
  return schema;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& spec : parameter_schema(config)) total += spec.shape.numel();
  return total;
}

template <typename T>
Tensor<T> eca(const Tensor<T>& features, const ConvWeights<T>& weights) {
  const Shape s = features.shape();
  const Shape ws = weights.weight.shape();
  if (ws.n != s.c || ws.c != s.c || ws.h != 1 || ws.w != 1) {
    throw std::invalid_argument("eca: weight shape " + ws.str() + " does not match " +
                                std::to_string(s.c) + " channels");
  }
  const Tensor<T> pooled = global_avg_pool(features);
  const Tensor<T> gate = sigmoid(conv2d(pooled, weights.weight, weights.bias));
  return channel_gate(features, gate);
}

template <typename T>
Tensor<T> esa(const Tensor<T>& features, const EsaWeights<T>& weights) {
  const Shape s = features.shape();
  if (s.h < 3 || s.w < 3) {
    throw std::invalid_argument("esa: spatial dims " + std::to_string(s.h) + "x" +
                                std::to_string(s.w) + " too small, need at least 3x3");
  }
  if (weights.conv1.weight.shape().c != s.c || weights.conv4.weight.shape().n != s.c) {
    throw std::invalid_argument("esa: weights expect " +
                                std::to_string(weights.conv1.weight.shape().c) +
                                " channels, features have " + std::to_string(s.c));
  }
  const Tensor<T> reduced = conv2d(features, weights.conv1.weight, weights.conv1.bias);
  const Tensor<T> strided = conv2d(reduced, weights.conv2.weight, weights.conv2.bias, 2, 0);
  const std::size_t pool =
      std::min<std::size_t>({7, strided.shape().h, strided.shape().w});
  const Tensor<T> pooled = max_pool2d(strided, pool, 3);
  const Tensor<T> context = conv2d(pooled, weights.conv3.weight, weights.conv3.bias, 1, 1);
  const Tensor<T> upsampled = upsample_bilinear(context, s.h, s.w);
  const Tensor<T> skip = conv2d(reduced, weights.conv_f.weight, weights.conv_f.bias);
  const Tensor<T> restored = conv2d(add(upsampled, skip), weights.conv4.weight, weights.conv4.bias);
  return mul(features, sigmoid(restored));
}

template <typename T>
Tensor<T> erlfb_forward(const BlockWeights<T>& weights, const Tensor<T>& x, Activation act,
                        Attention attention, Tensor<T>* attention_out) {
  Tensor<T> h = x;
  for (const auto& stage : weights.refine) {
    h = activation(conv2d(h, stage.weight, stage.bias, 1, 1), act);
  }
  Tensor<T> attended = attention == Attention::eca ? eca(h, weights.eca) : esa(h, weights.esa);
  if (attention_out) *attention_out = attended;
  return add(conv2d(attended, weights.smooth.weight, weights.smooth.bias, 1, 1), x);
}

template <typename T>
Model<T>::Model(ModelConfig config, std::vector<Parameter> params)
    : config_(std::move(config)), params_(std::move(params)) {
  for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].first, i);
}

template <typename T>
Model<T> Model<T>::build(const ModelConfig& config) {
  const auto schema = parameter_schema(config);
  std::mt19937_64 rng(config.seed);
  std::vector<Tensor<T>> tensors;
  tensors.reserve(schema.size());
  for (const auto& spec : schema) {
    Tensor<T> t(spec.shape);
    if (spec.rank == 4) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
    }
    tensors.push_back(std::move(t));
  }
  return from_parameters(config, std::move(tensors));
}

template <typename T>
Model<T> Model<T>::from_parameters(const ModelConfig& config, std::vector<Tensor<T>> tensors) {
  const auto schema = parameter_schema(config);
  if (tensors.size() != schema.size()) {
    throw std::invalid_argument("model: expected " + std::to_string(schema.size()) +
                                " parameter tensors, got " + std::to_string(tensors.size()));
  }
  std::vector<Parameter> params;
  params.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!(tensors[i].shape() == schema[i].shape)) {
      throw std::invalid_argument("model: parameter " + schema[i].name + " has shape " +
                                  tensors[i].shape().str() + ", expected " +
                                  schema[i].shape.str());
    }
    for (T v : tensors[i].data()) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("model: parameter " + schema[i].name + " is not finite");
      }
    }
    params.emplace_back(schema[i].name, std::move(tensors[i]));
  }
  Model model(config, std::move(params));
  model.set_requires_grad(true);
  return model;
}

template <typename T>
const Tensor<T>& Model<T>::param(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("model: no parameter named " + std::string(name));
  }
  return params_[it->second].second;
}

template <typename T>
std::size_t Model<T>::size() const {
  std::size_t total = 0;
  for (const auto& [name, t] : params_) total += t.numel();
  return total;
}

template <typename T>
BlockWeights<T> Model<T>::block(int index) const {
  const std::string prefix = "blocks." + std::to_string(index) + ".";
  auto conv = [&](const std::string& name) {
    return ConvWeights<T>{param(prefix + name + ".weight"), param(prefix + name + ".bias")};
  };
  BlockWeights<T> w;
  for (int s = 0; s < kRefineStages; ++s) w.refine[s] = conv("refine." + std::to_string(s));
  if (config_.attention == Attention::eca) {
    w.eca = conv("eca");
  } else {
    w.esa = {conv("esa.conv1"), conv("esa.conv_f"), conv("esa.conv2"), conv("esa.conv3"),
             conv("esa.conv4")};
  }
  w.smooth = conv("smooth");
  return w;
}

template <typename T>
Tensor<T> Model<T>::run(const Tensor<T>& lr, const std::set<int>* taps,
                        std::map<int, Tensor<T>>* dumps) const {
  const Shape s = lr.shape();
  if (s.c != static_cast<std::size_t>(config_.in_channels)) {
    throw std::invalid_argument("model: input has " + std::to_string(s.c) + " channels, expected " +
                                std::to_string(config_.in_channels));
  }
  const Tensor<T> shallow = conv2d(lr, param("extract.weight"), param("extract.bias"), 1, 1);
  Tensor<T> h = shallow;
  for (int b = 0; b < config_.blocks; ++b) {
    Tensor<T> attended;
    const bool tap = taps && taps->contains(b + 1);
    h = erlfb_forward(block(b), h, config_.activation, config_.attention,
                      tap ? &attended : nullptr);
    if (tap) dumps->emplace(b + 1, attended);
  }
  const Tensor<T> rec = conv2d(add(h, shallow), param("reconstruct.weight"),
                               param("reconstruct.bias"), 1, 1);
  return pixel_shuffle(rec, static_cast<std::size_t>(config_.scale));
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& lr) const {
  return run(lr, nullptr, nullptr);
}

template <typename T>
Tensor<T> Model<T>::infer(const Tensor<T>& lr) const {
  NoGradGuard guard;
  const Tensor<T> raw = run(lr, nullptr, nullptr);
  std::vector<T> clamped(raw.data().begin(), raw.data().end());
  for (auto& v : clamped) v = std::clamp(v, T(0), T(1));
  return Tensor<T>(raw.shape(), std::move(clamped));
}

template <typename T>
std::map<int, Tensor<T>> Model<T>::dump_features(const Tensor<T>& lr,
                                                 const std::set<int>& blocks) const {
  for (int b : blocks) {
    if (b < 1 || b > config_.blocks) {
      throw std::out_of_range("dump_features: block index " + std::to_string(b) +
                              " outside [1, " + std::to_string(config_.blocks) + "]");
    }
  }
  std::map<int, Tensor<T>> dumps;
  if (blocks.empty()) return dumps;
  NoGradGuard guard;
  run(lr, &blocks, &dumps);
  return dumps;
}

template <typename T>
void Model<T>::set_requires_grad(bool on) {
  for (auto& [name, t] : params_) t.set_requires_grad(on);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

template <typename To, typename From>
Model<To> cast_model(const Model<From>& model) {
  std::vector<Tensor<To>> tensors;
  for (const auto& [name, t] : model.parameters()) {
    std::vector<To> values(t.data().begin(), t.data().end());
    tensors.emplace_back(t.shape(), std::move(values));
  }
  return Model<To>::from_parameters(model.config(), std::move(tensors));
}

#define EFRLFN_INSTANTIATE(T)                                                                 \
  template Tensor<T> eca(const Tensor<T>&, const ConvWeights<T>&);                            \
  template Tensor<T> esa(const Tensor<T>&, const EsaWeights<T>&);                             \
  template Tensor<T> erlfb_forward(const BlockWeights<T>&, const Tensor<T>&, Activation,      \
                                   Attention, Tensor<T>*);                                    \
  template class Model<T>;
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

template Model<float> cast_model<float, double>(const Model<double>&);
template Model<double> cast_model<double, float>(const Model<float>&);
template Model<float> cast_model<float, float>(const Model<float>&);
template Model<double> cast_model<double, double>(const Model<double>&);

}  // namespace efrlfn
