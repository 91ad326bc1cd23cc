// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hennion/metric.hpp"

using namespace hennion;

namespace {

// m(x, y) for commuting diagonal states: min over the support of y of x_i / y_i.
double diagonal_m(const std::vector<double>& x, const std::vector<double>& y) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] > 0) m = std::min(m, x[i] / y[i]);
  return m;
}

}  // namespace

TEST(Metric, DiagonalPairHandComputation) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  Element x = A.diagonal({{1.5, 0.5}}), y = A.diagonal({{0.5, 1.5}});
  EXPECT_NEAR(m_quantity(A, x, y).value, diagonal_m({1.5, 0.5}, {0.5, 1.5}), 1e-14);
  EXPECT_NEAR(hennion_distance(A, x, y), 0.8, 1e-12);
  LineDecomposition L = line_decomposition(A, x, y);
  EXPECT_NEAR(L.t_plus, 1.5, 1e-12);
  EXPECT_NEAR(L.t_minus, -0.5, 1e-12);
  EXPECT_NEAR(L.distance(), 0.8, 1e-10);
}

TEST(Metric, XEtaFamily) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto X = [&](double eta) { return A.diagonal({{2.0 / (1.0 + eta), 2.0 * eta / (1.0 + eta)}}); };
  for (auto [eta, etap] : std::vector<std::pair<double, double>>{{0.5, 0.25}, {0.9, 0.3}, {0.2, 0.01}}) {
    double mm = m_quantity(A, X(eta), X(etap)).value * m_quantity(A, X(etap), X(eta)).value;
    EXPECT_NEAR(mm, etap / eta, 1e-12);
  }
  EXPECT_NEAR(hennion_distance(A, X(0.5), X(0.25)), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(hennion_distance(A, X(0.3), A.diagonal({{2.0, 0.0}})), 1.0);
}

TEST(Metric, SingularAgainstIdentityIsDistanceOne) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  State p = A.normalize(A.diagonal({{2.0, 0.0}}));
  State one = A.normalize(A.identity());
  EXPECT_EQ(hennion_distance(A, p.element, one.element), 1.0);
  EXPECT_EQ(classify_component(A, p, one), ComponentVerdict::distance_one);
}

TEST(Metric, EqualStatesAreAtDistanceZero) {
  TracialAlgebra A = TracialAlgebra::matrix(3);
  Stream rng(3);
  State x = A.random_state(StateKind::full, rng);
  EXPECT_LT(hennion_distance(A, x.element, x.element), 1e-12);
}

TEST(Metric, OraclesAgreeOnMultiBlock) {
  TracialAlgebra A({2, 2}, {0.125, 0.375});
  Stream rng(8);
  for (int i = 0; i < 50; ++i) {
    State x = A.random_state(StateKind::full, rng), y = A.random_state(i % 3 ? StateKind::full : StateKind::boundary, rng);
    double me = m_quantity(A, x.element, y.element).value;
    EXPECT_NEAR(me, m_quantity_bisection(A, x.element, y.element).value, 1e-8);
    EXPECT_GE(m_quantity_inf_sampling(A, x.element, y.element, 100, rng).value, me - 1e-9);
  }
}

TEST(Metric, IncompatibleSupportsGiveZero) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  Element p = A.diagonal({{2.0, 0.0}}), q = A.diagonal({{0.0, 2.0}});
  EXPECT_EQ(m_quantity(A, p, q).value, 0.0);
  EXPECT_EQ(hennion_distance(A, p, q), 1.0);
}

TEST(Metric, DominatesHalfTraceNorm) {
  TracialAlgebra A = TracialAlgebra::matrix(3);
  Stream rng(21);
  for (int i = 0; i < 200; ++i) {
    State x = A.random_state(StateKind::full, rng), y = A.random_state(StateKind::full, rng);
    EXPECT_LE(0.5 * A.norm(x.element - y.element, Norm::one), hennion_distance(A, x.element, y.element) + 1e-9);
  }
}

TEST(Metric, RejectsNonPositiveInput) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  EXPECT_THROW(m_quantity(A, A.diagonal({{1.0, -1.0}}), A.identity()), Error);
}
