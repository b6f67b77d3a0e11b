#include <random>

#include "doctest.h"
#include "efrlfn/losses.hpp"
#include "efrlfn/ops.hpp"
#include "../support/oracles.hpp"

using namespace efrlfn;

namespace {

Tensor<double> ramp(std::size_t h, std::size_t w) {
  Tensor<double> t(Shape{1, 1, h, w});
  auto d = t.mutable_data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) d[y * w + x] = static_cast<double>(x);
  return t;
}

Tensor<double> transpose_plane(const Tensor<double>& t) {
  const Shape s = t.shape();
  Tensor<double> out(Shape{s.n, s.c, s.w, s.h});
  auto d = out.mutable_data();
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) d[(p * s.w + x) * s.h + y] = t.data()[(p * s.h + y) * s.w + x];
  return out;
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("charbonnier closed forms") {
    const Tensor<double> a(Shape{1, 3, 4, 4}, 0.3);
    CHECK(charbonnier(a, a, 1e-3).item() == doctest::Approx(1e-3).epsilon(1e-12));
    const Tensor<double> b(Shape{1, 3, 4, 4}, 0.3 + 3e-3);
    CHECK(charbonnier(b, a, 1e-3).item() == doctest::Approx(std::sqrt(1e-5)).epsilon(1e-9));
    CHECK_THROWS_AS(charbonnier(a, Tensor<double>(Shape{1, 3, 4, 5}), 1e-3), std::invalid_argument);
  }

  TEST_CASE("sobel map on flat fields and ramps") {
    const auto [cx, cy] = sobel_map(Tensor<double>(Shape{1, 2, 4, 5}, 0.7));
    for (double v : cx.data()) CHECK(v == 0.0);
    for (double v : cy.data()) CHECK(v == 0.0);
    const auto [gx, gy] = sobel_map(ramp(5, 6));
    for (std::size_t y = 1; y < 4; ++y)
      for (std::size_t x = 1; x < 5; ++x) {
        CHECK(gx.at(0, 0, y, x) == 8.0);
        CHECK(gy.at(0, 0, y, x) == 0.0);
      }
    CHECK_THROWS_AS(sobel_map(Tensor<double>(Shape{1, 1, 2, 5})), std::invalid_argument);
  }

  TEST_CASE("transposing the image swaps the Sobel maps") {
    std::mt19937_64 rng(3);
    const auto img = oracle::random_tensor(Shape{1, 2, 4, 6}, rng);
    const auto [gx, gy] = sobel_map(img);
    const auto [tx, ty] = sobel_map(transpose_plane(img));
    const auto gyt = transpose_plane(gy);
    const auto gxt = transpose_plane(gx);
    for (std::size_t i = 0; i < tx.numel(); ++i) {
      CHECK(tx.data()[i] == doctest::Approx(gyt.data()[i]));
      CHECK(ty.data()[i] == doctest::Approx(gxt.data()[i]));
    }
  }

  TEST_CASE("sobel loss identities") {
    const Tensor<double> c1(Shape{1, 3, 5, 5}, 0.1), c2(Shape{1, 3, 5, 5}, 0.9);
    CHECK(sobel_loss(c1, c2).item() == 0.0);
    std::mt19937_64 rng(4);
    const auto a = oracle::random_tensor(Shape{2, 3, 5, 6}, rng);
    const auto b = oracle::random_tensor(Shape{2, 3, 5, 6}, rng);
    CHECK(sobel_loss(a, a).item() == 0.0);
    CHECK(sobel_loss(a, b).item() == doctest::Approx(sobel_loss(b, a).item()));
    CHECK(sobel_loss(add_scalar(a, 0.25), b).item() == doctest::Approx(sobel_loss(a, b).item()));
  }

  TEST_CASE("sobel loss of ramp vs constant matches the oracle") {
    const auto sr = ramp(5, 5);
    const Tensor<double> hr(Shape{1, 1, 5, 5}, 2.0);
    std::vector<double> sx, sy, hx, hy;
    oracle::sobel_plane({sr.data().begin(), sr.data().end()}, 5, 5, sx, sy);
    oracle::sobel_plane({hr.data().begin(), hr.data().end()}, 5, 5, hx, hy);
    double total = 0.0;
    for (std::size_t i = 0; i < 25; ++i) total += (hx[i] - sx[i]) * (hx[i] - sx[i]) + (hy[i] - sy[i]) * (hy[i] - sy[i]);
    CHECK(sobel_loss(sr, hr).item() == doctest::Approx(total / 25.0).epsilon(1e-12));
  }

  TEST_CASE("perceptual loss") {
    std::mt19937_64 rng(5);
    const auto a = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const auto b = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const IdentityExtractor<double> id;
    CHECK(perceptual_loss(a, a, id).item() == 0.0);
    double mad = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) mad += std::abs(a.data()[i] - b.data()[i]);
    CHECK(perceptual_loss(a, b, id).item() == doctest::Approx(mad / static_cast<double>(a.numel())));

    // One seeded 3x3 conv + ReLU, recomputed with straight loops.
    const ConvStackExtractor<double> stack(17, {2});
    const auto& [w, bias] = stack.layers().front();
    std::vector<double> wv(w.data().begin(), w.data().end()), bv(bias.data().begin(), bias.data().end());
    Shape os;
    auto fa = oracle::naive_conv2d({a.data().begin(), a.data().end()}, a.shape(), wv, w.shape(), &bv, 1, 1, &os);
    auto fb = oracle::naive_conv2d({b.data().begin(), b.data().end()}, b.shape(), wv, w.shape(), &bv, 1, 1, &os);
    double expect = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) expect += std::abs(std::max(fa[i], 0.0) - std::max(fb[i], 0.0));
    expect /= static_cast<double>(fa.size());
    CHECK(perceptual_loss(a, b, stack).item() == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("composite loss") {
    std::mt19937_64 rng(6);
    const auto x = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const auto y = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const ConvStackExtractor<double> stack(1);
    const LossWeights paper;
    CHECK(paper.charb == 1.0);
    CHECK(paper.vgg == 1e-3);
    CHECK(paper.sobel == 0.1);
    CHECK(composite_loss(x, x, paper, stack).item() == doctest::Approx(paper.epsilon).epsilon(1e-9));
    const LossWeights zero{0, 0, 0, 1e-3};
    CHECK(composite_loss(x, y, zero, stack).item() == 0.0);
    const double expect = charbonnier(x, y, 1e-3).item() + 1e-3 * perceptual_loss(x, y, stack).item() +
                          0.1 * sobel_loss(x, y).item();
    CHECK(composite_loss(x, y, paper, stack).item() == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS((LossWeights{-1, 0, 0, 1e-3}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LossWeights{1, 0, 0, 0}.validate()), std::invalid_argument);
  }

  TEST_CASE("ablation suite variants") {
    std::mt19937_64 rng(7);
    const auto x = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    const auto y = oracle::random_tensor(Shape{1, 3, 6, 6}, rng, 0, 1);
    auto stack = std::make_shared<ConvStackExtractor<double>>(2);
    const LossWeights paper;
    CHECK(all_loss_variants().size() == 7);
    for (LossVariant v : all_loss_variants()) {
      CHECK(parse_loss_variant(to_string(v)) == v);
      const auto fn = loss_ablation_suite<double>(v, paper, stack);
      CHECK(fn(x, y).total.item() >= 0.0);
    }
    CHECK(loss_ablation_suite<double>(LossVariant::l1, paper, stack)(x, x).total.item() == 0.0);
    CHECK(loss_ablation_suite<double>(LossVariant::full, paper, stack)(x, y).total.item() ==
          doctest::Approx(composite_loss(x, y, paper, *stack).item()));
    LossWeights no_sobel = paper;
    no_sobel.sobel = 0;
    CHECK(loss_ablation_suite<double>(LossVariant::no_sobel, paper, stack)(x, y).total.item() ==
          doctest::Approx(composite_loss(x, y, no_sobel, *stack).item()));
    CHECK_THROWS_AS(parse_loss_variant("huber"), std::invalid_argument);
  }
}
