// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "hennion/contraction.hpp"

using namespace hennion;

namespace {

// d(x, y) for 2x2 positive definite matrices from the generalized spectrum of
// the pencil (x, y): m(x,y) = lambda_min, m(y,x) = 1 / lambda_max.
double pencil_distance(const Mat& x, const Mat& y) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(x, y);
  double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  double mm = lmin / lmax;
  return (1.0 - mm) / (1.0 + mm);
}

Mat bloch(double theta, double phi, double r) {
  Mat s(2, 2);
  s << cplx(1.0 + r * std::cos(theta), 0.0), r * std::sin(theta) * cplx(std::cos(phi), -std::sin(phi)),
      r * std::sin(theta) * cplx(std::cos(phi), std::sin(phi)), cplx(1.0 - r * std::cos(theta), 0.0);
  return s;
}

// sup of d(S.x, S.y) over a grid of pure-state pairs for the depolarizing
// channel S = (1 - eps) id + eps tau(.) 1 on M_2.
double depolarizing_grid_oracle(double eps, int n) {
  double best = 0.0;
  const double pi = std::acos(-1.0);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j < 2 * n; ++j)
      for (int k = 0; k <= n; ++k) {
        double t1 = pi * i / n, p1 = pi * j / n, t2 = pi * k / n;
        best = std::max(best, pencil_distance(bloch(t1, p1, 1.0 - eps), bloch(t2, 0.0, 1.0 - eps)));
      }
  return best;
}

}  // namespace

TEST(Qmaps, DepolarizingGridOracleAndEstimate) {
  double oracle = depolarizing_grid_oracle(0.5, 12);
  EXPECT_NEAR(oracle, 0.8, 1e-12);
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ContractionEstimate est = contraction_estimate(depolarizing(A, 0.5), ContractionOptions{}, 3);
  EXPECT_LE(est.lower_bound, oracle + 1e-9);
  EXPECT_GE(est.upper_bound, oracle - 1e-9);
  EXPECT_GE(est.lower_bound, 0.799);
  EXPECT_EQ(is_strict_contraction(est), ContractionVerdict::certified_yes);
}

TEST(Qmaps, ReplacementIsZero) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  Element target = A.diagonal({{1.5, 0.5}});
  ContractionEstimate est = contraction_estimate(replacement(A, target), ContractionOptions{}, 1);
  EXPECT_EQ(est.lower_bound, 0.0);
  EXPECT_EQ(est.upper_bound, 0.0);
  EXPECT_EQ(is_strict_contraction(est), ContractionVerdict::certified_yes);
  EXPECT_LT(A.norm(est.fixed_point.element - target, Norm::one), 1e-10);
}

TEST(Qmaps, TransposeIsAnIsometry) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ContractionEstimate est = contraction_estimate(transpose_map(A), ContractionOptions{}, 2);
  EXPECT_GE(est.lower_bound, 0.99);
  EXPECT_EQ(is_strict_contraction(est), ContractionVerdict::certified_no);
}

TEST(Qmaps, PredualIsTransposeAndSatisfiesPairing) {
  TracialAlgebra A({2, 1}, {0.25, 0.5});
  Stream rng(4);
  std::vector<Element> ops{A.random_element(rng), A.random_element(rng)};
  SuperOperator S = from_kraus(A, ops);
  SuperOperator P = predual(S);
  EXPECT_LT((P.matrix() - S.matrix().transpose()).norm(), 1e-14);
  for (int i = 0; i < 10; ++i) {
    Element x = A.random_element(rng), a = A.random_element(rng);
    EXPECT_LT(std::abs(A.trace(P.apply(x) * a) - A.trace(x * S.apply(a))), 1e-12);
  }
  EXPECT_LT((predual(P).matrix() - S.matrix()).norm(), 1e-14);
}

TEST(Qmaps, ChoiSeparatesTransposeFromChannels) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  EXPECT_FALSE(check_completely_positive(transpose_map(A)));
  EXPECT_TRUE(check_completely_positive(depolarizing(A, 0.3)));
  EXPECT_TRUE(check_unital(depolarizing(A, 0.3)));
  EXPECT_TRUE(check_tracial(depolarizing(A, 0.3)));
}

TEST(Qmaps, NonFaithfulMapIsRejected) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  SuperOperator S = from_kraus(A, {A.diagonal({{1.0, 0.0}})});
  FaithfulnessReport r = faithfulness_check(S);
  EXPECT_EQ(r.faithful, Tri::no);
  EXPECT_FALSE(r.diagnosis.empty());
  try {
    contraction_estimate(S, ContractionOptions{}, 1);
    FAIL() << "expected a hypothesis error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::hypothesis);
  }
}

TEST(Qmaps, SandwichHoldsForCertifiedDepolarizing) {
  TracialAlgebra A = TracialAlgebra::matrix(3);
  SuperOperator S = depolarizing(A, 0.4);
  ContractionEstimate est = contraction_estimate(S, ContractionOptions{}, 5);
  ASSERT_EQ(is_strict_contraction(est), ContractionVerdict::certified_yes);
  Stream rng(6);
  for (int i = 0; i < 200; ++i) {
    State x = A.random_state(i % 2 ? StateKind::pure : StateKind::full, rng);
    EXPECT_GE(sandwich_margin(S, est.fixed_point.element, est.eta, x.element), -1e-9);
  }
}

TEST(Qmaps, CompositionIsSubmultiplicative) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  SuperOperator a = depolarizing(A, 0.5), b = depolarizing(A, 0.3);
  ContractionOptions opt;
  auto ea = contraction_estimate(a, opt, 1), eb = contraction_estimate(b, opt, 2), eab = contraction_estimate(compose(a, b), opt, 3);
  EXPECT_LE(eab.lower_bound, ea.upper_bound * eb.upper_bound + 1e-6);
  double l = 0.5 * 0.7;
  EXPECT_NEAR(eab.lower_bound, 2.0 * l / (1.0 + l * l), 1e-6);
}

TEST(Qmaps, FixedPointOfNonUnitalChannel) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  SuperOperator S = mix(identity_map(A), replacement(A, A.diagonal({{1.8, 0.2}})), 0.3);
  FixedPointResult fp = fixed_point(S, A.identity());
  ASSERT_TRUE(fp.converged);
  EXPECT_LT(A.norm(fp.state.element - A.diagonal({{1.8, 0.2}}), Norm::one), 1e-9);
}
