// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hennion/algebra.hpp"

using namespace hennion;

TEST(Algebra, MakeRescalesWeights) {
  TracialAlgebra A = TracialAlgebra::make({2, 2}, {1.0, 3.0});
  EXPECT_NEAR(A.weight(0), 0.125, 1e-15);
  EXPECT_NEAR(A.weight(1), 0.375, 1e-15);
  EXPECT_NEAR(A.rtrace(A.identity()), 1.0, 1e-15);
}

TEST(Algebra, RejectsBadWeights) {
  EXPECT_THROW(TracialAlgebra({2}, {0.4}), Error);
  EXPECT_THROW(TracialAlgebra::make({2, 1}, {1.0}), Error);
  EXPECT_THROW(TracialAlgebra::make({0}, {1.0}), Error);
}

TEST(Algebra, CoordinatesRoundTripAndPairing) {
  TracialAlgebra A({2, 1}, {0.25, 0.5});
  Stream rng(5);
  for (int i = 0; i < 20; ++i) {
    Element x = A.random_element(rng), y = A.random_element(rng);
    Element back = A.from_coords(A.to_coords(x));
    for (int b = 0; b < A.num_blocks(); ++b) EXPECT_LT((back.blocks[b] - x.blocks[b]).norm(), 1e-13);
    cplx direct = A.trace(x * y);
    cplx coords = (A.to_coords(x).transpose() * A.to_coords(y))(0);
    EXPECT_LT(std::abs(direct - coords), 1e-12);
  }
}

TEST(Algebra, TraceIsWeightedSum) {
  TracialAlgebra A({2, 1}, {0.25, 0.5});
  Element x = A.diagonal({{1.0, 3.0}, {5.0}});
  EXPECT_NEAR(A.rtrace(x), 0.25 * 4.0 + 0.5 * 5.0, 1e-14);
}

TEST(Algebra, RandomStatesHaveUnitTraceAndRightComponent) {
  TracialAlgebra A = TracialAlgebra::matrix(3);
  Stream rng(9);
  for (int i = 0; i < 20; ++i) {
    State f = A.random_state(StateKind::full, rng);
    State p = A.random_state(StateKind::pure, rng);
    State b = A.random_state(StateKind::boundary, rng);
    EXPECT_NEAR(A.rtrace(f.element), 1.0, 1e-12);
    EXPECT_NEAR(A.rtrace(p.element), 1.0, 1e-12);
    EXPECT_EQ(f.component, Component::invertible);
    EXPECT_EQ(p.component, Component::singular);
    EXPECT_EQ(b.component, Component::singular);
  }
}

TEST(Algebra, NormalizeRejectsNonPositive) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  EXPECT_THROW(A.normalize(A.diagonal({{1.5, -0.5}})), Error);
}

TEST(Algebra, NormsOfDiagonal) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  Element x = A.diagonal({{3.0, -1.0}});
  EXPECT_NEAR(A.norm(x, Norm::inf), 3.0, 1e-14);
  EXPECT_NEAR(A.norm(x, Norm::one), 0.5 * (3.0 + 1.0), 1e-14);
}
