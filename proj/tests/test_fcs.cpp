// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hennion/fcs.hpp"

using namespace hennion;

namespace {

TracialAlgebra m2() { return TracialAlgebra::matrix(2); }

GeneratorSource kraus_source(std::uint64_t seed) {
  TracialAlgebra M = m2();
  return GeneratorSource(ErgodicDriver::iid_shift(seed), GeneratorMap::kraus(M, M, 2, 0.0), ContractionOptions{200, 20, 3}, seed + 1);
}

// E_j applied to a (x) x through the tensor algebra: build a (x) x, read its
// coordinates in the product basis, then apply the generator matrix.
Element apply_through_tensor(const GeneratorSource& src, long long j, const Element& a, const Element& x) {
  const TracialAlgebra& M = src.generator().on_site();
  const TracialAlgebra& W = src.generator().bond();
  TracialAlgebra T = tensor_algebra(M, W);
  Vec prod = product_basis_matrix(M, W).transpose() * T.to_coords(tensor(M, W, a, x));
  return W.from_coords(src.at(j).E * prod);
}

// tau_W(z E^{[m,n]}(a)) evaluated left to right with row vectors.
cplx left_to_right(const GeneratorSource& src, const std::vector<Element>& sites, long long m, const Element& z) {
  const TracialAlgebra& M = src.generator().on_site();
  const TracialAlgebra& W = src.generator().bond();
  int dm = M.coord_dim(), dw = W.coord_dim();
  Eigen::RowVectorXcd r = W.to_coords(z).transpose();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    Vec al = M.to_coords(sites[i]);
    Eigen::RowVectorXcd next = Eigen::RowVectorXcd::Zero(dw);
    const Mat& E = src.at(m + static_cast<long long>(i)).E;
    for (int c = 0; c < dm; ++c) next += al(c) * (r * E.middleCols(c * dw, dw));
    r = next;
  }
  return (r * W.identity_coords())(0);
}

}  // namespace

TEST(Fcs, GeneratorIsUnitalAndPositive) {
  GeneratorSource src = kraus_source(3);
  EXPECT_NO_THROW(src.generator().validate(src.driver()));
  TracialAlgebra M = m2();
  for (int len : {1, 3, 7}) {
    Element e = iterate_generator(src, 0, len - 1, LocalObservable::identity(M, 0));
    EXPECT_LT(M.norm(e - M.identity(), Norm::inf), 1e-10 * len);
  }
}

TEST(Fcs, TensorRouteMatchesGeneratorMatrix) {
  GeneratorSource src = kraus_source(4);
  TracialAlgebra M = m2();
  Stream rng(1);
  for (int i = 0; i < 10; ++i) {
    Element a = M.random_hermitian(rng), b = M.random_hermitian(rng);
    Element inner = apply_through_tensor(src, 1, b, M.identity());
    Element oracle = apply_through_tensor(src, 0, a, inner);
    Element direct = iterate_generator(src, 0, 1, LocalObservable::product(M, 0, {a, b}));
    EXPECT_LT(M.norm(oracle - direct, Norm::inf), 1e-12);
  }
}

TEST(Fcs, FactorizationOrdersAgree) {
  GeneratorSource src = kraus_source(5);
  TracialAlgebra M = m2();
  Stream rng(2);
  for (int i = 0; i < 100; ++i) {
    int len = 1 + i % 5;
    std::vector<Element> sites;
    for (int s = 0; s < len; ++s) sites.push_back(M.random_element(rng));
    Element z = M.random_state(StateKind::full, rng).element;
    cplx rl = M.pairing(iterate_generator(src, 2, 2 + len - 1, LocalObservable::product(M, 2, sites)), z);
    EXPECT_LT(std::abs(rl - left_to_right(src, sites, 2, z)), 1e-9);
  }
}

TEST(Fcs, StateContract) {
  GeneratorSource src = kraus_source(6);
  TracialAlgebra M = m2();
  Stream rng(3);
  for (int i = 0; i < 200; ++i) {
    Element p = M.random_psd(rng, i % 2 == 0);
    PsiEstimate e = psi_value(src, LocalObservable::single(M, i % 3, p), 20);
    EXPECT_GE(e.value.real(), -1e-10);
    Element h = M.random_hermitian(rng);
    LocalObservable a = LocalObservable::single(M, 0, h);
    EXPECT_LE(std::abs(psi_value(src, a, 20).value), a.norm_inf() + 1e-9);
  }
}

TEST(Fcs, TruncationIsMonotone) {
  GeneratorSource src = kraus_source(7);
  TracialAlgebra M = m2();
  LocalObservable a = LocalObservable::single(M, 0, M.diagonal({{1.0, -1.0}}));
  for (long long N : {5, 10, 15}) {
    PsiEstimate n1 = psi_value(src, a, N), n2 = psi_value(src, a, 2 * N);
    EXPECT_LE(std::abs(n1.value - n2.value), n1.truncation_bound + 1e-15);
  }
}

TEST(Fcs, ProductGeneratorHasNoCorrelations) {
  TracialAlgebra M = m2();
  GeneratorSource src(ErgodicDriver::iid_shift(1), GeneratorMap::product(M, M));
  LocalObservable a = LocalObservable::single(M, 0, M.diagonal({{1.0, -1.0}}));
  DecayReport rep = clustering_experiment(src, a, a, {1, 2, 3, 4});
  for (const auto& r : rep.rows) EXPECT_LT(r.corr, 1e-12);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_TRUE(rep.all_pass);
}

TEST(Fcs, ClusteringBoundOnContractingGenerator) {
  GeneratorSource src = kraus_source(3);
  TracialAlgebra M = m2();
  LocalObservable a = LocalObservable::single(M, 0, M.diagonal({{1.0, -1.0}}));
  DecayReport rep = clustering_experiment(src, a, a, {1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_TRUE(rep.hypothesis_certified);
  EXPECT_TRUE(rep.all_pass);
  EXPECT_LE(rep.kappa_fit, rep.kappa + 0.05);
}

TEST(Fcs, TranslationCovariance) {
  GeneratorSource src = kraus_source(8);
  TracialAlgebra M = m2();
  LocalObservable a = LocalObservable::product(M, 0, {M.diagonal({{1.0, -1.0}}), M.identity()});
  for (long long k : {1, 2, 3}) EXPECT_TRUE(translation_covariance_check(src, a, k, 30).pass);
}

TEST(Fcs, ObservableProductMergesSupports) {
  TracialAlgebra M = m2();
  Element z = M.diagonal({{1.0, -1.0}});
  LocalObservable a = LocalObservable::single(M, 0, z), b = LocalObservable::single(M, 3, z);
  LocalObservable ab = a * b;
  EXPECT_EQ(ab.first(), 0);
  EXPECT_EQ(ab.last(), 3);
  EXPECT_NEAR(ab.norm_inf(), 1.0, 1e-14);
}
