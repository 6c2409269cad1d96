#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "geocon/ops.hpp"
#include "geocon/tape.hpp"
#include "geocon/tensor.hpp"

using namespace geocon;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t.at(1, 2, 3) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  Tensor m = Tensor::matrix(2, 3);
  m(1, 0) = 2.0;
  EXPECT_EQ(m.transposed()(0, 1), 2.0);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t(Shape{3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  t[1] = -std::numeric_limits<double>::max();
  EXPECT_TRUE(t.all_finite());
}

TEST(Tape, BackwardThroughSharedInput) {
  nd::Tape tape;
  nd::Var x = tape.leaf(Tensor(Shape{1, 1}, std::vector<double>{3.0}), true);
  // y = x * x + x -> dy/dx = 2x + 1
  nd::Var y = nd::add(nd::mul(x, x), x);
  tape.backward(nd::sum(y));
  EXPECT_DOUBLE_EQ(x.grad().item(), 7.0);
}

TEST(Tape, NonScalarLossRejected) {
  nd::Tape tape;
  nd::Var x = tape.leaf(Tensor(Shape{2, 2}, 1.0), true);
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Tape, NonFiniteOutputNamesOp) {
  nd::Tape tape;
  nd::Var x = tape.leaf(Tensor(Shape{1, 1}, std::vector<double>{1e308}), true);
  try {
    nd::affine(x, 10.0, 0.0);
    FAIL() << "expected NonFiniteError";
  } catch (const nd::NonFiniteError& e) {
    EXPECT_EQ(e.op(), "affine");
    EXPECT_EQ(e.tape_index(), 1u);
  }
}

TEST(Tape, ConstantsGetNoGradient) {
  nd::Tape tape;
  nd::Var c = tape.constant(Tensor(Shape{1, 1}, 2.0));
  nd::Var x = tape.leaf(Tensor(Shape{1, 1}, 3.0), true);
  tape.backward(nd::sum(nd::mul(c, x)));
  EXPECT_DOUBLE_EQ(x.grad().item(), 2.0);
  EXPECT_FALSE(tape.requires_grad(c.index()));
}
