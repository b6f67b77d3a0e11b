#include "doctest.h"
#include "efrlfn/ops.hpp"
#include "efrlfn/tensor.hpp"

using namespace efrlfn;

TEST_SUITE("tensor") {
  TEST_CASE("shape arithmetic and construction") {
    const Shape s{2, 3, 4, 5};
    CHECK(s.numel() == 120);
    CHECK(s.plane() == 20);
    Tensor<double> t(s, 1.5);
    CHECK(t.numel() == 120);
    CHECK(t.at(1, 2, 3, 4) == 1.5);
    CHECK_THROWS_AS(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>(3)), std::invalid_argument);
  }

  TEST_CASE("tensors are shared handles; clone copies") {
    Tensor<float> a(Shape{1, 1, 1, 2}, std::vector<float>{1, 2});
    Tensor<float> b = a;
    b.mutable_data()[0] = 7;
    CHECK(a.data()[0] == 7);
    Tensor<float> c = a.clone();
    c.mutable_data()[0] = 9;
    CHECK(a.data()[0] == 7);
  }

  TEST_CASE("backward accumulates into leaves until zero_grad") {
    Tensor<double> x(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
    x.set_requires_grad(true);
    backward(sum(square(x)));
    REQUIRE(x.has_grad());
    CHECK(x.grad()[2] == doctest::Approx(6.0));
    backward(sum(square(x)));
    CHECK(x.grad()[2] == doctest::Approx(12.0));
    x.zero_grad();
    CHECK_FALSE(x.has_grad());
  }

  TEST_CASE("shared subexpressions receive summed gradients") {
    Tensor<double> x(Shape{1, 1, 1, 1}, 3.0);
    x.set_requires_grad(true);
    const auto y = mul(x, x);
    backward(sum(add(y, y)));
    CHECK(x.grad()[0] == doctest::Approx(12.0));
  }

  TEST_CASE("no-grad guard suppresses graph construction") {
    Tensor<double> x(Shape{1, 1, 2, 2}, 1.0);
    x.set_requires_grad(true);
    {
      NoGradGuard guard;
      CHECK_FALSE(NoGradGuard::grad_enabled());
      const auto y = square(x);
      CHECK(y.is_leaf());
      CHECK_FALSE(y.requires_grad());
    }
    CHECK(NoGradGuard::grad_enabled());
    CHECK(graph_size(square(x)) >= 1);
  }

  TEST_CASE("contract violations") {
    Tensor<double> x(Shape{1, 1, 2, 2}, 1.0);
    x.set_requires_grad(true);
    const auto y = square(x);
    CHECK_THROWS_AS(y.item(), std::invalid_argument);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);     // not a scalar
    Tensor<double> op_result = square(x);
    CHECK_THROWS(op_result.mutable_data());
    CHECK_THROWS(op_result.set_requires_grad(true));
  }

  TEST_CASE("loss that does not require grad is a no-op") {
    Tensor<double> x(Shape{1, 1, 1, 1}, 2.0);
    CHECK_NOTHROW(backward(square(x)));
    CHECK_FALSE(x.has_grad());
  }
}
