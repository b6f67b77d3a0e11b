#include <random>

#include "doctest.h"
#include "efrlfn/model.hpp"
#include "../support/oracles.hpp"

using namespace efrlfn;

namespace {

// Independent count: per block three 3x3 convs, the attention module and a
// smoothing conv; head and tail convs around them.
std::size_t count_by_hand(std::size_t c, std::size_t b, std::size_t r, bool esa) {
  const std::size_t conv3 = 9 * c * c + c;
  std::size_t attention = c * c + c;
  if (esa) {
    const std::size_t f = 16;
    attention = (c * f + f) + (f * f + f) + 2 * (9 * f * f + f) + (f * c + c);
  }
  const std::size_t block = 3 * conv3 + attention + conv3;
  return (9 * 3 * c + c) + b * block + (9 * c * 3 * r * r + 3 * r * r);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("parameter counts") {
    const ModelConfig def;
    CHECK(def.channels == 40);
    CHECK(def.blocks == 6);
    CHECK(param_count(def) == count_by_hand(40, 6, 2, false));
    CHECK(param_count(def) == 361852);
    ModelConfig esa = def;
    esa.attention = Attention::esa;
    CHECK(param_count(esa) == count_by_hand(40, 6, 2, true));
    for (int c : {4, 16, 48})
      for (int r : {2, 4}) {
        ModelConfig m;
        m.channels = c;
        m.scale = r;
        m.blocks = 2;
        CHECK(param_count(m) == count_by_hand(c, 2, r, false));
        CHECK(Model<float>::build(m).size() == param_count(m));
      }
  }

  TEST_CASE("config validation names the field") {
    ModelConfig m;
    m.scale = 3;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("scale"), std::invalid_argument);
    m = ModelConfig{};
    m.channels = 0;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("channels"), std::invalid_argument);
    CHECK_THROWS_AS(parse_activation("gelu"), std::invalid_argument);
    CHECK(parse_attention("esa") == Attention::esa);
  }

  TEST_CASE("schema order and names") {
    ModelConfig m;
    m.channels = 4;
    m.blocks = 1;
    const auto schema = parameter_schema(m);
    CHECK(schema.front().name == "extract.weight");
    CHECK(schema[1].name == "extract.bias");
    CHECK(schema[1].rank == 1);
    CHECK(schema[2].name == "blocks.0.refine.0.weight");
    CHECK(schema.back().name == "reconstruct.bias");
  }

  TEST_CASE("output is r times the input for both scales and attentions") {
    for (int r : {2, 4})
      for (Attention a : {Attention::eca, Attention::esa}) {
        ModelConfig m;
        m.channels = 4;
        m.blocks = 2;
        m.scale = r;
        m.attention = a;
        const auto model = Model<float>::build(m);
        const auto y = model.infer(Tensor<float>(Shape{1, 3, 7, 5}, 0.5f));
        CHECK(y.shape() == Shape{1, 3, 7 * static_cast<std::size_t>(r), 5 * static_cast<std::size_t>(r)});
        for (float v : y.data()) CHECK((v >= 0.0f && v <= 1.0f));
      }
  }

  TEST_CASE("zero-weight block is an exact identity") {
    ModelConfig m;
    m.channels = 6;
    m.blocks = 1;
    for (Attention a : {Attention::eca, Attention::esa}) {
      m.attention = a;
      auto model = Model<double>::build(m);
      for (auto& [name, p] : model.parameters())
        if (name.rfind("blocks.", 0) == 0)
          for (double& v : p.mutable_data()) v = 0.0;
      std::mt19937_64 rng(2);
      const auto x = oracle::random_tensor(Shape{1, 6, 5, 6}, rng);
      const auto y = erlfb_forward(model.block(0), x, m.activation, a);
      CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
    }
  }

  TEST_CASE("seeded initialization is deterministic and in the Kaiming bound") {
    ModelConfig m;
    m.channels = 8;
    m.blocks = 1;
    m.seed = 42;
    const auto a = Model<float>::build(m);
    const auto b = Model<float>::build(m);
    m.seed = 43;
    const auto c = Model<float>::build(m);
    const auto& wa = a.param("extract.weight");
    CHECK(std::equal(wa.data().begin(), wa.data().end(), b.param("extract.weight").data().begin()));
    CHECK_FALSE(std::equal(wa.data().begin(), wa.data().end(), c.param("extract.weight").data().begin()));
    const double bound = 1.0 / std::sqrt(27.0);
    for (float v : wa.data()) CHECK(std::abs(v) <= bound);
    for (float v : a.param("extract.bias").data()) CHECK(v == 0.0f);
  }

  TEST_CASE("dump_features taps attention outputs of requested blocks") {
    ModelConfig m;
    m.channels = 4;
    const auto model = Model<float>::build(m);
    const Tensor<float> x(Shape{1, 3, 6, 6}, 0.3f);
    const auto maps = model.dump_features(x, {1, 3, 6});
    REQUIRE(maps.size() == 3);
    CHECK(maps.at(6).shape() == Shape{1, 4, 6, 6});
    CHECK(model.dump_features(x, {}).empty());
    CHECK_THROWS_AS(model.dump_features(x, {0}), std::out_of_range);
    CHECK_THROWS_AS(model.dump_features(x, {7}), std::out_of_range);
    // Block 1's tap equals its own attention output computed by hand.
    Tensor<float> att;
    const auto feat = conv2d(x, model.param("extract.weight"), model.param("extract.bias"), 1, 1);
    erlfb_forward(model.block(0), feat, m.activation, m.attention, &att);
    CHECK(std::equal(att.data().begin(), att.data().end(), maps.at(1).data().begin()));
  }

  TEST_CASE("from_parameters validates shapes and values") {
    ModelConfig m;
    m.channels = 4;
    m.blocks = 1;
    auto params = Model<double>::build(m).parameters();
    std::vector<Tensor<double>> tensors;
    for (auto& [n, p] : params) tensors.push_back(p.clone());
    tensors[0] = Tensor<double>(Shape{4, 3, 1, 1});
    CHECK_THROWS_WITH_AS(Model<double>::from_parameters(m, tensors), doctest::Contains("extract.weight"),
                         std::invalid_argument);
    tensors.pop_back();
    CHECK_THROWS_AS(Model<double>::from_parameters(m, tensors), std::invalid_argument);
  }

  TEST_CASE("cast_model preserves forward results up to precision") {
    ModelConfig m;
    m.channels = 4;
    m.blocks = 1;
    const auto d = Model<double>::build(m);
    const auto f = cast_model<float>(d);
    const auto yd = d.infer(Tensor<double>(Shape{1, 3, 4, 4}, 0.4));
    const auto yf = f.infer(Tensor<float>(Shape{1, 3, 4, 4}, 0.4f));
    for (std::size_t i = 0; i < yd.numel(); ++i) CHECK(yf.data()[i] == doctest::Approx(yd.data()[i]).epsilon(1e-5));
  }
}
