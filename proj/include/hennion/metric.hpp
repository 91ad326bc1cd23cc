// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hennion/algebra.hpp"

namespace hennion {

enum class MMethod { eigen_pencil, bisection, inf_sampling };

inline const char* method_name(MMethod m) {
  switch (m) {
    case MMethod::eigen_pencil: return "eigen_pencil";
    case MMethod::bisection: return "bisection";
    case MMethod::inf_sampling: return "inf_sampling";
  }
  return "?";
}

struct MQuantityResult {
  double value = 0.0;
  MMethod method = MMethod::eigen_pencil;
  double certificate = 0.0;  // lambda at which x - lambda y is verified positive
};

/// Minimizer of the Rayleigh quotient v*xv / v*yv over vectors in a single
/// block. value is m(x, y); vector attains it (up to the support tolerance).
struct PencilMin {
  double value = std::numeric_limits<double>::infinity();
  int block = -1;
  Vec vector;
  bool compatible = true;
};

inline PencilMin pencil_min(const TracialAlgebra& A, const Element& x, const Element& y, const Tolerances& tol = {}) {
  auto sx = A.spectra(x);
  auto sy = A.spectra(y);
  double lx = 0.0, ly = 0.0;
  for (const auto& s : sx) lx = std::max(lx, s.eigenvalues().maxCoeff());
  for (const auto& s : sy) ly = std::max(ly, s.eigenvalues().maxCoeff());
  if (!(lx > 0.0) || !(ly > 0.0)) throw input_error("m-quantity needs non-zero positive inputs");

  PencilMin best;
  double worst_leak = 0.0;
  PencilMin leak;
  for (int i = 0; i < A.num_blocks(); ++i) {
    int n = A.dim(i);
    const RVec& ey = sy[i].eigenvalues();
    Mat Py = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
      if (ey(j) > tol.rank_tol * ly) Py += sy[i].eigenvectors().col(j) * sy[i].eigenvectors().col(j).adjoint();
    if (Py.norm() == 0.0) continue;

    const RVec& ex = sx[i].eigenvalues();
    std::vector<int> supp;
    for (int j = 0; j < n; ++j)
      if (ex(j) > tol.rank_tol * lx) supp.push_back(j);
    Mat Vs(n, static_cast<int>(supp.size()));
    for (std::size_t j = 0; j < supp.size(); ++j) Vs.col(static_cast<int>(j)) = sx[i].eigenvectors().col(supp[j]);
    Mat Qx = Mat::Identity(n, n) - Vs * Vs.adjoint();

    Eigen::JacobiSVD<Mat> svd(Qx * Py);
    double leak_norm = svd.singularValues()(0);
    if (leak_norm > tol.support_tol) {
      if (leak_norm > worst_leak) {
        worst_leak = leak_norm;
        Mat yk = Qx * y.blocks[i] * Qx;
        Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (yk + yk.adjoint())));
        leak.value = 0.0;
        leak.block = i;
        leak.vector = es.eigenvectors().col(n - 1);
        leak.compatible = false;
      }
      continue;
    }
    int r = static_cast<int>(supp.size());
    RVec inv_sqrt(r);
    for (int j = 0; j < r; ++j) inv_sqrt(j) = 1.0 / std::sqrt(ex(supp[j]));
    Mat W = Vs * inv_sqrt.cast<cplx>().asDiagonal();
    Mat Q = W.adjoint() * y.blocks[i] * W;
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (Q + Q.adjoint())));
    double mu = es.eigenvalues()(r - 1);
    if (!(mu > 0.0)) continue;
    double val = 1.0 / mu;
    if (val < best.value) {
      best.value = val;
      best.block = i;
      best.vector = W * es.eigenvectors().col(r - 1);
    }
  }
  if (leak.block >= 0) return leak;
  if (best.block < 0) throw internal_error("pencil found no constraining block");
  return best;
}

namespace detail {
inline void require_positive(const TracialAlgebra& A, const Element& x, const Tolerances& tol) {
  double scale = std::max(1.0, A.max_abs_entry(x));
  auto rep = A.is_positive(x, tol.pos_tol * scale, tol.herm_tol);
  if (!rep.positive) throw input_error("m-quantity input is not positive");
}
}  // namespace detail

/// m(x, y) = max{lambda : lambda y <= x} from the generalized eigenvalue
/// problem on the support of x.
inline MQuantityResult m_quantity(const TracialAlgebra& A, const Element& x, const Element& y, const Tolerances& tol = {}) {
  detail::require_positive(A, x, tol);
  detail::require_positive(A, y, tol);
  PencilMin pm = pencil_min(A, x, y, tol);
  MQuantityResult r;
  r.method = MMethod::eigen_pencil;
  r.value = std::max(0.0, pm.value);
  r.certificate = std::max(0.0, r.value - 1e-12);
  return r;
}

/// m(x, y) by bisection on the positivity of x - lambda y, starting from the
/// bracket [0, tau(x)/tau(y)].
inline MQuantityResult m_quantity_bisection(const TracialAlgebra& A, const Element& x, const Element& y, double bis_tol = 1e-12,
                                            const Tolerances& tol = {}) {
  detail::require_positive(A, x, tol);
  detail::require_positive(A, y, tol);
  double tx = A.rtrace(x), ty = A.rtrace(y);
  if (!(tx > 0.0) || !(ty > 0.0)) throw input_error("m-quantity needs non-zero positive inputs");
  double scale = std::max(A.norm(x, Norm::inf), A.norm(y, Norm::inf));
  double ptol = 1e-14 * scale;
  auto feasible = [&](double lam) { return A.is_positive(x - lam * y, ptol).min_eigenvalue >= -ptol; };
  double lo = 0.0, hi = tx / ty;
  MQuantityResult r;
  r.method = MMethod::bisection;
  if (feasible(hi)) {
    r.value = hi;
  } else {
    while (hi - lo > bis_tol) {
      double mid = 0.5 * (lo + hi);
      if (feasible(mid))
        lo = mid;
      else
        hi = mid;
    }
    r.value = lo;
  }
  r.certificate = r.value;
  return r;
}

/// Upper estimate of m(x, y) as the smallest ratio tau(xa)/tau(ya) over
/// probes a >= 0. The first probes are the eigenprojections of x; the rest
/// alternate random rank-one and random full-rank positive elements.
inline MQuantityResult m_quantity_inf_sampling(const TracialAlgebra& A, const Element& x, const Element& y, int n_samples,
                                               Stream& rng) {
  if (n_samples < 1) throw input_error("inf sampling needs at least one probe");
  std::vector<Element> spectral;
  auto sx = A.spectra(x);
  for (int i = 0; i < A.num_blocks(); ++i)
    for (int j = 0; j < A.dim(i); ++j) {
      Vec v = sx[i].eigenvectors().col(j);
      spectral.push_back(A.embed(i, v * v.adjoint()));
    }
  double best = std::numeric_limits<double>::infinity();
  int used = 0;
  for (int s = 0; s < n_samples; ++s) {
    Element a = s < static_cast<int>(spectral.size()) ? spectral[s] : A.random_psd(rng, s % 2 == 1);
    double ya = A.pairing(y, a).real();
    if (ya <= 0.0) continue;
    ++used;
    best = std::min(best, A.pairing(x, a).real() / ya);
  }
  if (used == 0) throw internal_error("degenerate sampling: no probe had tau(ya) > 0");
  MQuantityResult r;
  r.method = MMethod::inf_sampling;
  r.value = std::max(0.0, best);
  r.certificate = 0.0;
  return r;
}

struct DistanceReport {
  double d = 1.0;
  double m_xy = 0.0;
  double m_yx = 0.0;
};

inline DistanceReport hennion_distance_report(const TracialAlgebra& A, const Element& x, const Element& y,
                                              const Tolerances& tol = {}) {
  DistanceReport r;
  r.m_xy = m_quantity(A, x, y, tol).value;
  r.m_yx = m_quantity(A, y, x, tol).value;
  double mm = r.m_xy * r.m_yx;
  if (mm < tol.mproduct_floor) {
    r.d = 1.0;
  } else {
    r.d = std::clamp((1.0 - mm) / (1.0 + mm), 0.0, 1.0);
  }
  return r;
}

inline double hennion_distance(const TracialAlgebra& A, const Element& x, const Element& y, const Tolerances& tol = {}) {
  return hennion_distance_report(A, x, y, tol).d;
}

struct LineDecomposition {
  double t_plus = 1.0;
  double t_minus = 0.0;
  State A_plus;
  State A_minus;
  double r = 0.0;
  double s = 1.0;

  double distance() const { return (t_plus - t_minus) / (t_minus + t_plus - 2.0 * t_minus * t_plus); }
};

/// Extends the segment through x and y to the boundary of the state space:
/// t_+ = sup and t_- = inf of {t : t x + (1 - t) y >= 0}, by bisection.
inline LineDecomposition line_decomposition(const TracialAlgebra& A, const Element& x, const Element& y, const Tolerances& tol = {}) {
  Element diff = x - y;
  double dist1 = A.norm(diff, Norm::one);
  if (dist1 <= tol.state_equal_tol) throw domain_error("line decomposition of equal states");
  double scale = std::max(A.norm(x, Norm::inf), A.norm(y, Norm::inf));
  double ptol = 1e-14 * scale;
  auto feasible = [&](double t) { return A.min_eigenvalue(y + t * diff) >= -ptol; };
  auto search = [&](double inside, double outside) {
    while (feasible(outside)) outside = inside + 2.0 * (outside - inside);
    for (int it = 0; it < 200; ++it) {
      if (std::abs(outside - inside) <= 1e-15 * std::max(1.0, std::abs(inside))) break;
      double mid = 0.5 * (inside + outside);
      if (feasible(mid))
        inside = mid;
      else
        outside = mid;
    }
    return inside;
  };
  double bound = 2.0 / dist1;
  LineDecomposition L;
  L.t_plus = search(1.0, bound * (1.0 + 1e-9) + 1e-12);
  L.t_minus = search(0.0, -bound * (1.0 + 1e-9) - 1e-12);
  Tolerances loose = tol;
  loose.pos_tol = std::max(tol.pos_tol, 1e-8);
  loose.trace_tol = 1e-8;
  L.A_plus = A.normalize(y + L.t_plus * diff, loose);
  L.A_minus = A.normalize(y + L.t_minus * diff, loose);
  double span = L.t_plus - L.t_minus;
  L.r = (L.t_plus - 1.0) / span;
  L.s = L.t_plus / span;
  return L;
}

enum class ComponentVerdict { same_component, distance_one };

inline const char* verdict_name(ComponentVerdict v) {
  return v == ComponentVerdict::same_component ? "same_component" : "distance_one";
}

inline ComponentVerdict classify_component(const TracialAlgebra& A, const State& x, const State& y, const Tolerances& tol = {}) {
  if ((x.component == Component::invertible) != (y.component == Component::invertible)) return ComponentVerdict::distance_one;
  auto rep = hennion_distance_report(A, x.element, y.element, tol);
  return rep.m_xy * rep.m_yx < tol.mproduct_floor ? ComponentVerdict::distance_one : ComponentVerdict::same_component;
}

}  // namespace hennion
