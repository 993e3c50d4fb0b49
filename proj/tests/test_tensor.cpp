#include <doctest.h>

#include "kge/ops.hpp"
#include "kge/tensor.hpp"

using namespace kge;

TEST_CASE("tensor construction and accessors") {
  Tensor t = Tensor::constant(2, 3, 1.5);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.value()(1, 2) == 1.5);
  CHECK_FALSE(t.requires_grad());

  Tensor s = Tensor::scalar(4.0);
  CHECK(s.item() == 4.0);
  CHECK_THROWS_AS(t.item(), ContractError);

  CHECK_THROWS_AS(Tensor(Matrix(0, 3)), DimensionError);
  Tensor undef;
  CHECK_FALSE(undef.defined());
  CHECK_THROWS_AS(undef.value(), ContractError);
}

TEST_CASE("copies alias the same node") {
  Tensor a = Tensor::scalar(2.0, true);
  Tensor b = a;
  b.raw_value()(0, 0) = 7.0;
  CHECK(a.item() == 7.0);
  CHECK(a.node().get() == b.node().get());
}

TEST_CASE("backward requires a scalar and a non-empty tape") {
  Tape::active().clear();
  Tensor x = Tensor::constant(2, 2, 1.0, true);
  CHECK_THROWS_AS(backward(x), ContractError);

  Tensor loss = sum(hadamard(x, x));
  GradientMap g = backward(loss);
  CHECK(g.at(x)(0, 0) == doctest::Approx(2.0));

  // The tape was consumed; a second backward without a new forward fails.
  Tensor loss2 = Tensor::scalar(0.0, true);
  CHECK_THROWS_AS(backward(loss2), ContractError);
}

TEST_CASE("backward through a shared subexpression accumulates") {
  Tape::active().clear();
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = hadamard(x, x);        // x^2
  Tensor loss = add(y, y);          // 2 x^2, d/dx = 4x
  GradientMap g = backward(loss);
  CHECK(g.at(x)(0, 0) == doctest::Approx(12.0));
}

TEST_CASE("pause guard suspends recording") {
  Tape::active().clear();
  Tensor x = Tensor::scalar(1.0, true);
  {
    Tape::Pause guard;
    Tensor y = sigmoid(x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(Tape::active().size() == 0);
  Tensor z = sigmoid(x);
  CHECK(z.requires_grad());
  CHECK(Tape::active().size() == 1);
  Tape::active().clear();
}

TEST_CASE("ops on constants record nothing") {
  Tape::active().clear();
  Tensor a = Tensor::constant(2, 2, 1.0);
  Tensor b = Tensor::constant(2, 2, 2.0);
  Tensor c = add(a, b);
  CHECK(Tape::active().size() == 0);
  CHECK_FALSE(c.requires_grad());
}

TEST_CASE("gradient map is keyed by node identity") {
  Tape::active().clear();
  Tensor x = Tensor::scalar(2.0, true);
  Tensor alias = x;
  Tensor other = Tensor::scalar(2.0, true);
  Tensor loss = hadamard(x, other);
  GradientMap g = backward(loss);
  CHECK(g.at(alias)(0, 0) == doctest::Approx(2.0));
  CHECK(g.at(other)(0, 0) == doctest::Approx(2.0));
  CHECK(g.contains(x));
}
