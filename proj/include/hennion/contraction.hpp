// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hennion/superop.hpp"

namespace hennion {

struct ContractionOptions {
  int n_samples = 1000;
  int refine_iters = 50;
  int refine_starts = 3;
};

struct FixedPointResult {
  State state;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // ||S.x - x||_1 for the returned x
};

/// Iterates the projective action from start. After every 64 steps without
/// convergence the iterated map is squared, so slow contractions still reach
/// the tolerance in a bounded number of steps.
inline FixedPointResult fixed_point(const SuperOperator& S, const Element& start, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  Vec u = A.identity_coords();
  auto tau = [&](const Vec& v) { return (u.transpose() * v)(0).real(); };
  Vec xi = A.to_coords(start);
  double t0 = tau(xi);
  if (!(t0 > 0.0)) throw input_error("fixed point iteration needs a start with positive trace");
  xi /= t0;
  Mat P = S.matrix();
  FixedPointResult out;
  bool done = false;
  for (int stage = 0; stage < 48 && !done && out.iterations < tol.fixed_point_max_iter; ++stage) {
    for (int k = 0; k < 64; ++k) {
      Vec nxt = P * xi;
      double t = tau(nxt);
      if (!(t > tol.kernel_tol * std::max(1.0, nxt.norm()))) throw domain_error("kernel state during fixed point iteration");
      nxt /= t;
      double dn = (nxt - xi).norm();
      double d1 = dn;
      if (dn > tol.fixed_point_tol && dn <= 1e3 * tol.fixed_point_tol) d1 = A.norm(A.from_coords(nxt - xi), Norm::one);
      xi = nxt;
      ++out.iterations;
      if (d1 <= tol.fixed_point_tol) {
        done = true;
        break;
      }
      if (out.iterations >= tol.fixed_point_max_iter) break;
    }
    if (!done) {
      P = P * P;
      double s = P.cwiseAbs().maxCoeff();
      if (!(s > 0.0)) throw domain_error("iterated map vanished");
      P /= s;
    }
  }
  Element x = A.from_coords(xi);
  Tolerances loose = tol;
  loose.trace_tol = 1e-8;
  loose.pos_tol = std::max(tol.pos_tol, 1e-8);
  out.state = A.normalize(A.hermitian(x, 1e-8), loose);
  out.residual = A.norm(projective_image(S, out.state.element, tol) - out.state.element, Norm::one);
  out.converged = done && out.residual <= 1e-9;
  return out;
}

struct ContractionEstimate {
  double lower_bound = 0.0;
  double upper_bound = 1.0;
  State fixed_point;
  double eta = 0.0;
  int n_samples = 0;
  int refine_iters = 0;
  bool fixed_point_converged = false;
  double fixed_point_residual = 0.0;
  std::string status = "ok";

  double midpoint() const { return 0.5 * (lower_bound + upper_bound); }
};

namespace detail {

struct PureVec {
  int block = 0;
  Vec v;
};

inline PureVec random_pure_vec(const TracialAlgebra& A, Stream& rng) {
  PureVec p;
  p.block = rng.index(A.num_blocks());
  p.v = rng.gaussian_vector(A.dim(p.block));
  p.v.normalize();
  return p;
}

inline Element rank_one(const TracialAlgebra& A, const PureVec& p) { return A.embed(p.block, p.v * p.v.adjoint()); }

/// Element whose tau-pairing with G gives w* G_block w.
inline Element vector_functional(const TracialAlgebra& A, int block, const Vec& w) {
  Vec u = w.normalized();
  return (1.0 / A.weight(block)) * A.embed(block, u * u.adjoint());
}

inline double distance_from_mm(double mm, const Tolerances& tol) {
  if (mm < tol.mproduct_floor) return 1.0;
  if (std::abs(1.0 - mm) <= 8.0 * std::numeric_limits<double>::epsilon()) return 0.0;
  return std::clamp((1.0 - mm) / (1.0 + mm), 0.0, 1.0);
}

/// d between the (unnormalized) images gx and gy; scale drops out.
inline double image_distance(const TracialAlgebra& A, const Element& gx, const Element& gy, const Tolerances& tol) {
  double m1 = pencil_min(A, gx, gy, tol).value;
  if (m1 <= 0.0) return 1.0;
  double m2 = pencil_min(A, gy, gx, tol).value;
  return distance_from_mm(m1 * m2, tol);
}

/// Alternating maximization of d(S.x, S.y) over pure x, y. With the
/// witnessing vectors w1, w2 of the two m-quantities fixed, the best x and y
/// are each a generalized eigenvector of the adjoint images of w1 w1* and
/// w2 w2*; every half-step can only increase d.
inline double refine_pair(const SuperOperator& S, PureVec x, PureVec y, int iters, const Tolerances& tol) {
  const auto& A = S.algebra();
  double best = 0.0;
  double prev_mm = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iters; ++it) {
    Element gx = S.apply(rank_one(A, x));
    Element gy = S.apply(rank_one(A, y));
    PencilMin p1 = pencil_min(A, gx, gy, tol);
    if (p1.value <= 0.0) return 1.0;
    PencilMin p2 = pencil_min(A, gy, gx, tol);
    if (p2.value <= 0.0) return 1.0;
    double mm = p1.value * p2.value;
    best = std::max(best, distance_from_mm(mm, tol));
    if (best >= 1.0 || it == iters || prev_mm - mm <= 1e-15 * mm) break;
    prev_mm = mm;
    Element q1 = S.apply_adjoint(vector_functional(A, p1.block, p1.vector));
    Element q2 = S.apply_adjoint(vector_functional(A, p2.block, p2.vector));
    PencilMin nx = pencil_min(A, q1, q2, tol);
    PencilMin ny = pencil_min(A, q2, q1, tol);
    x = {nx.block, nx.vector.normalized()};
    y = {ny.block, ny.vector.normalized()};
  }
  return best;
}

struct EtaSides {
  double lower_side = 1.0;  // m(S.e, x0)
  double upper_side = 1.0;  // m(x0, S.e)
};

inline EtaSides eta_sides(const TracialAlgebra& A, const Element& image, const Element& x0, const Tolerances& tol) {
  EtaSides s;
  s.lower_side = std::max(0.0, pencil_min(A, image, x0, tol).value);
  s.upper_side = std::max(0.0, pencil_min(A, x0, image, tol).value);
  return s;
}

/// Alternating minimization of m(S.e, x0) over pure e.
inline double refine_eta_lower(const SuperOperator& S, const Element& x0, const Element& dual_unit, PureVec e, int iters,
                               const Tolerances& tol) {
  const auto& A = S.algebra();
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iters; ++it) {
    Element g = projective_image(S, rank_one(A, e), tol);
    PencilMin p = pencil_min(A, g, x0, tol);
    double val = std::max(0.0, p.value);
    if (val >= best - 1e-16 * std::max(1.0, best) && it > 0) {
      best = std::min(best, val);
      break;
    }
    best = std::min(best, val);
    if (best <= 0.0 || it == iters) break;
    Element q = S.apply_adjoint(vector_functional(A, p.block, p.vector));
    PencilMin n = pencil_min(A, q, dual_unit, tol);
    e = {n.block, n.vector.normalized()};
  }
  return best;
}

/// Alternating minimization of m(x0, S.e) over pure e.
inline double refine_eta_upper(const SuperOperator& S, const Element& x0, const Element& dual_unit, PureVec e, int iters,
                               const Tolerances& tol) {
  const auto& A = S.algebra();
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= iters; ++it) {
    Element g = projective_image(S, rank_one(A, e), tol);
    PencilMin p = pencil_min(A, x0, g, tol);
    double val = std::max(0.0, p.value);
    if (val >= best - 1e-16 * std::max(1.0, best) && it > 0) {
      best = std::min(best, val);
      break;
    }
    best = std::min(best, val);
    if (best <= 0.0 || it == iters) break;
    Element q = S.apply_adjoint(vector_functional(A, p.block, p.vector));
    PencilMin n = pencil_min(A, dual_unit, q, tol);
    if (n.value <= 0.0) return 0.0;
    e = {n.block, n.vector.normalized()};
  }
  return best;
}

template <typename T>
void keep_best(std::vector<std::pair<double, T>>& pool, double score, const T& item, int cap) {
  pool.emplace_back(score, item);
  std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (static_cast<int>(pool.size()) > cap) pool.resize(cap);
}

}  // namespace detail

/// Interval estimate of the contraction constant c(S) = diam(S.states).
/// lower: best sampled or refined pair distance. upper: (1 - eta^4)/(1 + eta^4)
/// where eta is the sandwich constant around the fixed point x0, estimated
/// over sampled and refined pure states.
inline ContractionEstimate contraction_estimate(const SuperOperator& S, const ContractionOptions& opt, Stream rng,
                                                const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  if (S.flags().positive == Tri::no) throw hypothesis_error("contraction estimate needs a positive map");
  Tri faithful = S.flags().faithful;
  if (faithful == Tri::unverified) faithful = faithfulness_check(S, tol).faithful;
  if (faithful == Tri::no) throw hypothesis_error("contraction estimate needs a faithful map: " + faithfulness_check(S, tol).diagnosis);

  ContractionEstimate est;
  est.n_samples = opt.n_samples;
  est.refine_iters = opt.refine_iters;

  Stream pairs_rng = rng.substream("pairs");
  std::vector<std::pair<double, std::pair<detail::PureVec, detail::PureVec>>> top_pairs;
  double lower = 0.0;
  for (int s = 0; s < opt.n_samples; ++s) {
    int kind = s % 4;
    Element x, y;
    detail::PureVec px, py;
    bool pure_pair = kind == 0 || kind == 3;
    if (kind == 0 || kind == 1 || kind == 3) {
      px = detail::random_pure_vec(A, pairs_rng);
      x = detail::rank_one(A, px);
    } else {
      x = A.random_state(StateKind::boundary, pairs_rng).element;
    }
    if (pure_pair) {
      py = detail::random_pure_vec(A, pairs_rng);
      y = detail::rank_one(A, py);
    } else {
      y = A.random_state(StateKind::boundary, pairs_rng).element;
    }
    double d = detail::image_distance(A, S.apply(x), S.apply(y), tol);
    lower = std::max(lower, d);
    if (pure_pair) detail::keep_best(top_pairs, -d, std::make_pair(px, py), opt.refine_starts);
  }
  if (opt.refine_iters > 0)
    for (const auto& [score, pr] : top_pairs) {
      if (lower >= 1.0) break;
      try {
        lower = std::max(lower, detail::refine_pair(S, pr.first, pr.second, opt.refine_iters, tol));
      } catch (const Error&) {
      }
    }
  est.lower_bound = std::clamp(lower, 0.0, 1.0);

  FixedPointResult fp = fixed_point(S, A.identity(), tol);
  est.fixed_point = fp.state;
  est.fixed_point_converged = fp.converged;
  est.fixed_point_residual = fp.residual;
  if (!fp.converged) {
    est.eta = 0.0;
    est.upper_bound = 1.0;
    est.status = est.lower_bound < 1.0 ? "fixed_point_not_converged" : "ok";
    return est;
  }

  const Element& x0 = fp.state.element;
  Element dual_unit = S.apply_adjoint(A.identity());
  Stream eta_rng = rng.substream("eta");
  std::vector<std::pair<double, detail::PureVec>> low_pool, up_pool;
  double eta = 1.0;
  for (int s = 0; s < opt.n_samples && eta > 0.0; ++s) {
    detail::PureVec e = detail::random_pure_vec(A, eta_rng);
    Element g = projective_image(S, detail::rank_one(A, e), tol);
    detail::EtaSides sd = detail::eta_sides(A, g, x0, tol);
    eta = std::min({eta, sd.lower_side, sd.upper_side});
    detail::keep_best(low_pool, sd.lower_side, e, opt.refine_starts);
    detail::keep_best(up_pool, sd.upper_side, e, opt.refine_starts);
  }
  if (opt.refine_iters > 0 && eta > 0.0) {
    try {
      for (const auto& [score, e] : low_pool)
        eta = std::min(eta, detail::refine_eta_lower(S, x0, dual_unit, e, opt.refine_iters, tol));
      for (const auto& [score, e] : up_pool)
        eta = std::min(eta, detail::refine_eta_upper(S, x0, dual_unit, e, opt.refine_iters, tol));
    } catch (const Error&) {
    }
  }
  est.eta = std::clamp(eta, 0.0, 1.0);
  double e4 = std::pow(est.eta, 4);
  double upper = 1.0 - e4 <= 8.0 * std::numeric_limits<double>::epsilon() ? 0.0 : (1.0 - e4) / (1.0 + e4);
  est.upper_bound = std::clamp(upper, est.lower_bound, 1.0);
  return est;
}

inline ContractionEstimate contraction_estimate(const SuperOperator& S, const ContractionOptions& opt = {},
                                                std::uint64_t seed = 0, const Tolerances& tol = {}) {
  return contraction_estimate(S, opt, Stream(seed), tol);
}

enum class ContractionVerdict { certified_yes, certified_no, undecided };

inline const char* verdict_name(ContractionVerdict v) {
  switch (v) {
    case ContractionVerdict::certified_yes: return "certified_yes";
    case ContractionVerdict::certified_no: return "certified_no";
    case ContractionVerdict::undecided: return "undecided";
  }
  return "undecided";
}

inline ContractionVerdict is_strict_contraction(const ContractionEstimate& est) {
  if (est.upper_bound < 1.0 - 1e-6) return ContractionVerdict::certified_yes;
  if (est.lower_bound > 1.0 - 1e-9) return ContractionVerdict::certified_no;
  return ContractionVerdict::undecided;
}

/// Smallest eigenvalue of S.x - eta x0 and of x0/eta - S.x, the two sides of
/// the sandwich eta x0 <= S.x <= x0/eta.
inline double sandwich_margin(const SuperOperator& S, const Element& x0, double eta, const Element& x, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  Element g = projective_image(S, x, tol);
  double lo = A.min_eigenvalue(g - eta * x0);
  double hi = eta > 0.0 ? A.min_eigenvalue((1.0 / eta) * x0 - g) : std::numeric_limits<double>::infinity();
  return std::min(lo, hi);
}

struct IrreducibilityReport {
  bool reducible = false;
  Element projection;
  double lambda = 0.0;
  std::string source;
};

/// Searches for a projection p other than 0 and 1 with S(p) <= lambda p.
/// Candidates: block indicators, spectral projections of the fixed point and
/// of images of random rank-one projections, each closed under
/// p -> supp(p + S(p)). Finding nothing is not a proof of irreducibility.
inline IrreducibilityReport irreducibility_probe(const SuperOperator& S, int n_random = 32, Stream rng = Stream(7),
                                                 const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  std::vector<std::pair<Element, std::string>> candidates;
  if (A.num_blocks() > 1)
    for (int i = 0; i < A.num_blocks(); ++i) candidates.emplace_back(A.embed(i, Mat::Identity(A.dim(i), A.dim(i))), "block indicator");
  auto spectral = [&](const Element& x, const std::string& src) {
    auto sp = A.spectra(x);
    for (int i = 0; i < A.num_blocks(); ++i) {
      int n = A.dim(i);
      for (int k = 0; k < n; ++k) {
        Vec v = sp[i].eigenvectors().col(k);
        candidates.emplace_back(A.embed(i, v * v.adjoint()), src);
        Mat top = Mat::Zero(n, n);
        for (int j = k; j < n; ++j) top += sp[i].eigenvectors().col(j) * sp[i].eigenvectors().col(j).adjoint();
        if (k > 0) candidates.emplace_back(A.embed(i, top), src);
      }
    }
  };
  try {
    FixedPointResult fp = fixed_point(S, A.identity(), tol);
    spectral(fp.state.element, "fixed point spectrum");
  } catch (const Error&) {
  }
  for (int r = 0; r < n_random; ++r) {
    detail::PureVec e = detail::random_pure_vec(A, rng);
    Element p = detail::rank_one(A, e);
    spectral(A.hermitian(S.apply(p), 1e-8), "image of random projection");
    candidates.emplace_back(p, "random projection");
  }
  Element one = A.identity();
  for (auto& [p0, src] : candidates) {
    Element p = p0;
    for (int step = 0; step < 2 * A.coord_dim(); ++step) {
      Element next = A.support_projection(A.hermitian(p + S.apply(p), 1e-8), 1e-10);
      if (A.norm(next - p, Norm::inf) < 1e-9) break;
      p = next;
    }
    double rank_p = A.rtrace(p);
    if (rank_p < 1e-9 || A.norm(p - one, Norm::inf) < 1e-9) continue;
    Element g = A.hermitian(S.apply(p), 1e-8);
    Element q = one - p;
    double leak = A.norm(q * g * q, Norm::inf);
    if (leak <= 1e-9 * std::max(1.0, A.norm(g, Norm::inf))) {
      IrreducibilityReport rep;
      rep.reducible = true;
      rep.projection = p;
      rep.lambda = A.max_eigenvalue(g);
      rep.source = src;
      return rep;
    }
  }
  return {};
}

/// Turns a subunital, subtracial completely positive map into a unital and
/// tracial one:
///   x -> S(x) + [(tau - tau o S)(x) / (tau - tau o S)(1)] (1 - S(1)).
inline SuperOperator unitalize(const SuperOperator& S, const Tolerances& tol = {}) {
  const auto& A = S.algebra();
  Element one = A.identity();
  Element s1 = S.apply(one);
  double residual = 1.0 - A.rtrace(s1);
  if (A.min_eigenvalue(A.hermitian(one - s1, 1e-8)) < -tol.pos_tol) throw hypothesis_error("map is not subunital");
  if (A.min_eigenvalue(A.hermitian(one - S.apply_adjoint(one), 1e-8)) < -tol.pos_tol) throw hypothesis_error("map is not subtracial");
  Vec u = A.identity_coords();
  Eigen::RowVectorXcd defect = u.transpose() - u.transpose() * S.matrix();
  if (residual <= tol.flag_tol) {
    if (check_unital(S, tol)) return S;
    throw hypothesis_error("residual (tau - tau o S)(1) vanishes for a non-unital map");
  }
  Vec gap = A.to_coords(one - s1);
  Mat M = S.matrix() + gap * defect / residual;
  return from_matrix(A, M, S.provenance().label.empty() ? "unitalized" : "unitalized(" + S.provenance().label + ")");
}

}  // namespace hennion
