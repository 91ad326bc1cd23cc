// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "hennion/algebra.hpp"
#include "hennion/metric.hpp"

namespace hennion {

enum class Tri { no, yes, unverified };

inline const char* tri_name(Tri t) {
  switch (t) {
    case Tri::no: return "no";
    case Tri::yes: return "yes";
    case Tri::unverified: return "unverified";
  }
  return "unverified";
}

inline Tri tri_and(Tri a, Tri b) {
  if (a == Tri::yes && b == Tri::yes) return Tri::yes;
  return Tri::unverified;
}

struct MapFlags {
  Tri hermiticity_preserving = Tri::unverified;
  Tri positive = Tri::unverified;
  Tri completely_positive = Tri::unverified;
  Tri unital = Tri::unverified;
  Tri tracial = Tri::unverified;
  Tri faithful = Tri::unverified;
  int positivity_probes = 0;  // non-zero when positivity was validated on samples only
};

struct Provenance {
  enum class Kind { kraus, explicit_matrix, strongly_summable, composition };
  Kind kind = Kind::explicit_matrix;
  std::string label;
  std::vector<Element> kraus;
  std::vector<std::pair<Element, Element>> pairs;
  std::vector<Provenance> parts;  // outermost map first
  Mat matrix;                      // explicit matrices only
};

inline const char* provenance_name(Provenance::Kind k) {
  switch (k) {
    case Provenance::Kind::kraus: return "kraus";
    case Provenance::Kind::explicit_matrix: return "matrix";
    case Provenance::Kind::strongly_summable: return "strongly_summable";
    case Provenance::Kind::composition: return "composition";
  }
  return "matrix";
}

/// Linear map on a tracial algebra, stored as its matrix in the
/// tau-orthonormal Hermitian basis: coords(S(x)) = matrix * coords(x).
class SuperOperator {
 public:
  SuperOperator() = default;
  SuperOperator(TracialAlgebra A, Mat matrix, Provenance prov = {}, MapFlags flags = {})
      : A_(std::move(A)), M_(std::move(matrix)), prov_(std::move(prov)), flags_(flags) {
    if (M_.rows() != A_.coord_dim() || M_.cols() != A_.coord_dim()) throw input_error("superoperator matrix has wrong size");
    if (prov_.kind == Provenance::Kind::explicit_matrix && prov_.matrix.size() == 0) prov_.matrix = M_;
  }

  const TracialAlgebra& algebra() const { return A_; }
  const Mat& matrix() const { return M_; }
  const Provenance& provenance() const { return prov_; }
  const MapFlags& flags() const { return flags_; }
  MapFlags& mutable_flags() { return flags_; }
  void set_provenance(Provenance p) { prov_ = std::move(p); }

  Element apply(const Element& x) const { return A_.from_coords(M_ * A_.to_coords(x)); }
  /// The tau-adjoint: tau(apply_adjoint(a) x) = tau(a apply(x)).
  Element apply_adjoint(const Element& a) const { return A_.from_coords(M_.transpose() * A_.to_coords(a)); }

  /// Evaluates the map from its provenance (Kraus sum or pair sum) instead
  /// of the matrix.
  Element apply_from_provenance(const Element& x) const {
    switch (prov_.kind) {
      case Provenance::Kind::kraus: {
        Element y = A_.zero();
        for (const auto& K : prov_.kraus) y += K * x * adjoint(K);
        return y;
      }
      case Provenance::Kind::strongly_summable: {
        Element y = A_.zero();
        for (const auto& [a, m] : prov_.pairs) y += A_.pairing(x, a) * m;
        return y;
      }
      default:
        return apply(x);
    }
  }

 private:
  TracialAlgebra A_;
  Mat M_;
  Provenance prov_;
  MapFlags flags_;
};

inline Mat matrix_of(const TracialAlgebra& A, const std::function<Element(const Element&)>& f) {
  int D = A.coord_dim();
  Mat M(D, D);
  for (int k = 0; k < D; ++k) M.col(k) = A.to_coords(f(A.basis_element(k)));
  return M;
}

// ---- flag validation ----

inline bool check_unital(const SuperOperator& S, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  return A.norm(S.apply(A.identity()) - A.identity(), Norm::inf) <= tol.flag_tol;
}

inline bool check_tracial(const SuperOperator& S, const Tolerances& tol = {}) {
  Vec u = S.algebra().identity_coords();
  Eigen::RowVectorXcd defect = u.transpose() * S.matrix() - u.transpose();
  return defect.cwiseAbs().maxCoeff() <= tol.flag_tol;
}

inline bool check_hermiticity_preserving(const SuperOperator& S, const Tolerances& tol = {}) {
  return S.matrix().imag().cwiseAbs().maxCoeff() <= tol.flag_tol * std::max(1.0, S.matrix().cwiseAbs().maxCoeff());
}

/// Choi blocks: for every input block j and output block i,
/// sum_{a,b} E_ab (x) S(E_ab in block j)_i.
inline std::vector<Mat> choi_blocks(const SuperOperator& S) {
  const auto& A = S.algebra();
  std::vector<Mat> out;
  for (int j = 0; j < A.num_blocks(); ++j) {
    int nj = A.dim(j);
    std::vector<Element> images;
    images.reserve(nj * nj);
    for (int a = 0; a < nj; ++a)
      for (int b = 0; b < nj; ++b) {
        Mat E = Mat::Zero(nj, nj);
        E(a, b) = 1.0;
        images.push_back(S.apply(A.embed(j, E)));
      }
    for (int i = 0; i < A.num_blocks(); ++i) {
      int ni = A.dim(i);
      Mat C = Mat::Zero(nj * ni, nj * ni);
      for (int a = 0; a < nj; ++a)
        for (int b = 0; b < nj; ++b) C.block(a * ni, b * ni, ni, ni) = images[a * nj + b].blocks[i];
      out.push_back(C);
    }
  }
  return out;
}

inline double choi_min_eigenvalue(const SuperOperator& S) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& C : choi_blocks(S)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (C + C.adjoint())), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues()(0));
  }
  return m;
}

inline bool check_completely_positive(const SuperOperator& S, const Tolerances& tol = {}) {
  double scale = std::max(1.0, S.matrix().cwiseAbs().maxCoeff());
  return choi_min_eigenvalue(S) >= -tol.choi_tol * scale;
}

/// Applies the map to n_probe pure states (the extreme rays of the cone) and
/// returns false at the first image with a negative eigenvalue.
inline bool probe_positive(const SuperOperator& S, int n_probe, Stream rng, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  for (int k = 0; k < n_probe; ++k) {
    State e = A.random_state(StateKind::pure, rng);
    Element y = A.hermitian(S.apply(e.element), 1e-8);
    double scale = std::max(1.0, A.max_abs_entry(y));
    if (A.min_eigenvalue(y) < -tol.pos_tol * scale) return false;
  }
  return true;
}

struct FaithfulnessReport {
  Tri faithful = Tri::unverified;
  bool dual_unit_invertible = false;
  double dual_unit_min_eigenvalue = 0.0;
  int span_rank = 0;
  int coord_dim = 0;
  std::string diagnosis;
};

/// A positive map x -> S(x) is faithful when its dual sends 1 to an
/// invertible element; failing that, the span of {phi(b_i) b_j} over the
/// basis decides (phi the dual map).
inline FaithfulnessReport faithfulness_check(const SuperOperator& S, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  FaithfulnessReport rep;
  rep.coord_dim = A.coord_dim();
  Element d1 = A.hermitian(S.apply_adjoint(A.identity()), 1e-8);
  double lmax = A.max_eigenvalue(d1);
  rep.dual_unit_min_eigenvalue = A.min_eigenvalue(d1);
  rep.dual_unit_invertible = lmax > 0.0 && rep.dual_unit_min_eigenvalue > tol.rank_tol * lmax;
  if (rep.dual_unit_invertible) {
    rep.faithful = Tri::yes;
    rep.diagnosis = "dual map sends 1 to an invertible element";
    rep.span_rank = rep.coord_dim;
    return rep;
  }
  int D = A.coord_dim();
  std::vector<Element> images;
  for (int i = 0; i < D; ++i) images.push_back(S.apply_adjoint(A.basis_element(i)));
  Mat span(D, D * D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) span.col(i * D + j) = A.to_coords(images[i] * A.basis_element(j));
  Eigen::JacobiSVD<Mat> svd(span);
  const RVec& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-10 * std::max(1.0, smax)) ++rank;
  rep.span_rank = rank;
  rep.faithful = rank == D ? Tri::yes : Tri::no;
  rep.diagnosis = rank == D ? "span of phi(M)M is the whole algebra"
                            : "dual map sends 1 to a singular element and phi(M)M spans only " + std::to_string(rank) +
                                  " of " + std::to_string(D) + " dimensions, so some nonzero positive x has S(x) = 0";
  return rep;
}

/// Recomputes every flag from the matrix. Positivity of maps that are not
/// completely positive is validated on n_probe samples only.
inline void validate_flags(SuperOperator& S, int n_probe = 1000, const Tolerances& tol = {}) {
  MapFlags& f = S.mutable_flags();
  f.hermiticity_preserving = check_hermiticity_preserving(S, tol) ? Tri::yes : Tri::no;
  f.unital = check_unital(S, tol) ? Tri::yes : Tri::no;
  f.tracial = check_tracial(S, tol) ? Tri::yes : Tri::no;
  if (f.hermiticity_preserving == Tri::no) {
    f.completely_positive = Tri::no;
    f.positive = Tri::no;
    f.faithful = Tri::unverified;
    return;
  }
  f.completely_positive = check_completely_positive(S, tol) ? Tri::yes : Tri::no;
  if (f.completely_positive == Tri::yes) {
    f.positive = Tri::yes;
    f.positivity_probes = 0;
  } else {
    f.positive = probe_positive(S, n_probe, Stream(fnv1a("positivity-probe")), tol) ? Tri::yes : Tri::no;
    f.positivity_probes = n_probe;
  }
  f.faithful = f.positive == Tri::yes ? faithfulness_check(S, tol).faithful : Tri::unverified;
}

// ---- constructors ----

inline SuperOperator from_matrix(const TracialAlgebra& A, const Mat& M, const std::string& label = "", int n_probe = 1000) {
  Provenance p;
  p.kind = Provenance::Kind::explicit_matrix;
  p.label = label;
  SuperOperator S(A, M, p);
  validate_flags(S, n_probe);
  return S;
}

inline SuperOperator from_function(const TracialAlgebra& A, const std::function<Element(const Element&)>& f,
                                   const std::string& label = "") {
  return from_matrix(A, matrix_of(A, f), label);
}

inline SuperOperator from_kraus(const TracialAlgebra& A, const std::vector<Element>& ops, const std::string& label = "") {
  if (ops.empty()) throw input_error("Kraus map needs at least one operator");
  for (const auto& K : ops) A.check(K);
  Provenance p;
  p.kind = Provenance::Kind::kraus;
  p.label = label;
  p.kraus = ops;
  Mat M = matrix_of(A, [&](const Element& x) {
    Element y = A.zero();
    for (const auto& K : ops) y += K * x * adjoint(K);
    return y;
  });
  SuperOperator S(A, M, p);
  validate_flags(S);
  return S;
}

inline SuperOperator from_strongly_summable(const TracialAlgebra& A, const std::vector<std::pair<Element, Element>>& pairs,
                                            const std::string& label = "", const Tolerances& tol = {}) {
  if (pairs.empty()) throw input_error("strongly summable map needs at least one pair");
  Element asum = A.zero();
  for (const auto& [a, m] : pairs) {
    A.check(a);
    A.check(m);
    if (!A.is_positive(a, tol.pos_tol).positive || !A.is_positive(m, tol.pos_tol).positive)
      throw input_error("strongly summable pairs must be positive");
    asum += a;
  }
  Provenance p;
  p.kind = Provenance::Kind::strongly_summable;
  p.label = label;
  p.pairs = pairs;
  int D = A.coord_dim();
  Mat M = Mat::Zero(D, D);
  for (const auto& [a, m] : pairs) M += A.to_coords(m) * A.to_coords(a).transpose();
  SuperOperator S(A, M, p);
  MapFlags& f = S.mutable_flags();
  f.hermiticity_preserving = Tri::yes;
  f.positive = Tri::yes;
  f.completely_positive = Tri::yes;
  f.unital = check_unital(S, tol) ? Tri::yes : Tri::no;
  f.tracial = check_tracial(S, tol) ? Tri::yes : Tri::no;
  double lmax = A.max_eigenvalue(asum);
  f.faithful = lmax > 0.0 && A.min_eigenvalue(asum) > tol.rank_tol * lmax ? Tri::yes : Tri::no;
  return S;
}

inline SuperOperator identity_map(const TracialAlgebra& A) { return from_kraus(A, {A.identity()}, "identity"); }

/// Blockwise transpose in the standard basis.
inline SuperOperator transpose_map(const TracialAlgebra& A) {
  return from_function(
      A,
      [&](const Element& x) {
        Element y = x;
        for (auto& b : y.blocks) b.transposeInPlace();
        return y;
      },
      "transpose");
}

/// x -> (1 - eps) x + eps tau(x) 1
inline SuperOperator depolarizing(const TracialAlgebra& A, double eps) {
  if (eps < 0.0 || eps > 1.0) throw input_error("depolarizing parameter must lie in [0, 1]");
  return from_function(
      A, [&](const Element& x) { return (1.0 - eps) * x + (eps * A.trace(x)) * A.identity(); }, "depolarizing(" + std::to_string(eps) + ")");
}

/// x -> tau(x) x0
inline SuperOperator replacement(const TracialAlgebra& A, const Element& x0) {
  return from_strongly_summable(A, {{A.identity(), x0}}, "replacement");
}

// ---- algebraic operations ----

inline SuperOperator predual(const SuperOperator& S, const Tolerances& tol = {}) {
  Tri herm = S.flags().hermiticity_preserving;
  if (herm == Tri::unverified) herm = check_hermiticity_preserving(S, tol) ? Tri::yes : Tri::no;
  if (herm != Tri::yes) throw input_error("predual requires a hermiticity-preserving map");
  const auto& A = S.algebra();
  std::function<Provenance(const Provenance&)> flip = [&](const Provenance& q) {
    Provenance r;
    r.kind = q.kind;
    r.label = q.label.empty() ? "" : "predual(" + q.label + ")";
    for (const auto& K : q.kraus) r.kraus.push_back(adjoint(K));
    for (const auto& [a, m] : q.pairs) r.pairs.emplace_back(m, a);
    for (auto it = q.parts.rbegin(); it != q.parts.rend(); ++it) r.parts.push_back(flip(*it));
    if (q.matrix.size() > 0) r.matrix = q.matrix.transpose();
    return r;
  };
  Provenance p = flip(S.provenance());
  MapFlags f;
  f.hermiticity_preserving = Tri::yes;
  f.positive = S.flags().positive;
  f.positivity_probes = S.flags().positivity_probes;
  f.completely_positive = S.flags().completely_positive;
  f.unital = S.flags().tracial;
  f.tracial = S.flags().unital;
  SuperOperator R(A, S.matrix().transpose(), p, f);
  if (f.positive == Tri::yes) R.mutable_flags().faithful = faithfulness_check(R, tol).faithful;
  return R;
}

/// outer o inner
inline SuperOperator compose(const SuperOperator& outer, const SuperOperator& inner, bool keep_provenance = true,
                             const Tolerances& tol = {}) {
  if (outer.algebra() != inner.algebra()) throw input_error("composition of maps on different algebras");
  Provenance p;
  p.kind = keep_provenance ? Provenance::Kind::composition : Provenance::Kind::explicit_matrix;
  if (keep_provenance) p.parts = {outer.provenance(), inner.provenance()};
  MapFlags f;
  const MapFlags& a = outer.flags();
  const MapFlags& b = inner.flags();
  f.hermiticity_preserving = tri_and(a.hermiticity_preserving, b.hermiticity_preserving);
  f.positive = tri_and(a.positive, b.positive);
  f.positivity_probes = std::max(a.positivity_probes, b.positivity_probes);
  f.completely_positive = tri_and(a.completely_positive, b.completely_positive);
  f.faithful = f.positive == Tri::yes ? tri_and(a.faithful, b.faithful) : Tri::unverified;
  SuperOperator S(outer.algebra(), outer.matrix() * inner.matrix(), p, f);
  S.mutable_flags().unital = check_unital(S, tol) ? Tri::yes : Tri::no;
  S.mutable_flags().tracial = check_tracial(S, tol) ? Tri::yes : Tri::no;
  return S;
}

/// (1 - t) a + t b
inline SuperOperator mix(const SuperOperator& a, const SuperOperator& b, double t) {
  if (a.algebra() != b.algebra()) throw input_error("mixture of maps on different algebras");
  Provenance p;
  p.kind = Provenance::Kind::explicit_matrix;
  if (a.provenance().kind == Provenance::Kind::kraus && b.provenance().kind == Provenance::Kind::kraus && t >= 0.0 && t <= 1.0) {
    p.kind = Provenance::Kind::kraus;
    for (const auto& K : a.provenance().kraus) p.kraus.push_back(std::sqrt(1.0 - t) * K);
    for (const auto& K : b.provenance().kraus) p.kraus.push_back(std::sqrt(t) * K);
  }
  MapFlags f;
  if (t >= 0.0 && t <= 1.0) {
    f.hermiticity_preserving = tri_and(a.flags().hermiticity_preserving, b.flags().hermiticity_preserving);
    f.positive = tri_and(a.flags().positive, b.flags().positive);
    f.completely_positive = tri_and(a.flags().completely_positive, b.flags().completely_positive);
    f.positivity_probes = std::max(a.flags().positivity_probes, b.flags().positivity_probes);
  }
  SuperOperator S(a.algebra(), (1.0 - t) * a.matrix() + t * b.matrix(), p, f);
  S.mutable_flags().unital = check_unital(S) ? Tri::yes : Tri::no;
  S.mutable_flags().tracial = check_tracial(S) ? Tri::yes : Tri::no;
  if (f.positive == Tri::yes) S.mutable_flags().faithful = faithfulness_check(S).faithful;
  return S;
}

inline SuperOperator scaled(const SuperOperator& S, double s) {
  Provenance p;
  p.kind = Provenance::Kind::explicit_matrix;
  MapFlags f = S.flags();
  if (s < 0.0) f = MapFlags{};
  SuperOperator R(S.algebra(), s * S.matrix(), p, f);
  R.mutable_flags().unital = check_unital(R) ? Tri::yes : Tri::no;
  R.mutable_flags().tracial = check_tracial(R) ? Tri::yes : Tri::no;
  return R;
}

/// Projective image S(x) / tau(S(x)) without state validation.
inline Element projective_image(const SuperOperator& S, const Element& x, const Tolerances& tol = {}) {
  Element y = S.apply(x);
  double t = S.algebra().rtrace(y);
  if (!(t > tol.kernel_tol)) throw domain_error("kernel state: tau(S(x)) vanishes");
  return (1.0 / t) * y;
}

inline State projective_action(const SuperOperator& S, const State& x, const Tolerances& tol = {}) {
  Element y = S.apply(x.element);
  double t = S.algebra().rtrace(y);
  if (!(t > tol.kernel_tol)) throw domain_error("kernel state: tau(S(x)) vanishes");
  return S.algebra().normalize(y, tol);
}

}  // namespace hennion
