// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>
#include <unsupported/Eigen/KroneckerProduct>

#include "hennion/contraction.hpp"
#include "hennion/process.hpp"
#include "hennion/superop.hpp"

namespace hennion {

// ---- tensor products ----

/// M (x) W as a direct sum over block pairs (i, j), pair index i * |W| + j.
inline TracialAlgebra tensor_algebra(const TracialAlgebra& M, const TracialAlgebra& W) {
  std::vector<int> dims;
  std::vector<double> weights;
  for (int i = 0; i < M.num_blocks(); ++i)
    for (int j = 0; j < W.num_blocks(); ++j) {
      dims.push_back(M.dim(i) * W.dim(j));
      weights.push_back(M.weight(i) * W.weight(j));
    }
  return TracialAlgebra(dims, weights);
}

inline Element tensor(const TracialAlgebra& M, const TracialAlgebra& W, const Element& a, const Element& x) {
  M.check(a);
  W.check(x);
  Element t;
  for (int i = 0; i < M.num_blocks(); ++i)
    for (int j = 0; j < W.num_blocks(); ++j) t.blocks.push_back(Eigen::kroneckerProduct(a.blocks[i], x.blocks[j]).eval());
  return t;
}

/// Columns: coordinates in tensor_algebra(M, W) of the product basis
/// b^M_a (x) b^W_b, column a * dim(W) + b. The matrix is real orthogonal.
inline Mat product_basis_matrix(const TracialAlgebra& M, const TracialAlgebra& W) {
  TracialAlgebra T = tensor_algebra(M, W);
  int dm = M.coord_dim(), dw = W.coord_dim();
  Mat K(T.coord_dim(), dm * dw);
  for (int a = 0; a < dm; ++a) {
    Element ba = M.basis_element(a);
    for (int b = 0; b < dw; ++b) K.col(a * dw + b) = T.to_coords(tensor(M, W, ba, W.basis_element(b)));
  }
  return K;
}

// ---- generators ----

enum class GeneratorKind { product, kraus };

inline const char* generator_kind_name(GeneratorKind k) { return k == GeneratorKind::product ? "product" : "kraus"; }

/// omega -> E_omega : M (x) W -> W, stored as a dim(W) x dim(M) dim(W)
/// matrix acting on product-basis coordinates.
class GeneratorMap {
 public:
  /// E(a (x) x) = tau_M(a) x
  static GeneratorMap product(const TracialAlgebra& M, const TracialAlgebra& W) {
    GeneratorMap g;
    g.kind_ = GeneratorKind::product;
    g.M_ = M;
    g.W_ = W;
    return g;
  }
  /// (1 - mix_eps) V*(X (x) 1_k)V + mix_eps tau(X) 1_W with V a random
  /// isometry per driver point. M and W must be full matrix algebras.
  static GeneratorMap kraus(const TracialAlgebra& M, const TracialAlgebra& W, int k, double mix_eps) {
    if (M.num_blocks() != 1 || W.num_blocks() != 1) throw input_error("kraus generator needs single-block M and W");
    if (k < 1) throw input_error("kraus generator needs k >= 1");
    if (mix_eps < 0.0 || mix_eps > 1.0) throw input_error("kraus generator mix_eps must lie in [0, 1]");
    GeneratorMap g;
    g.kind_ = GeneratorKind::kraus;
    g.M_ = M;
    g.W_ = W;
    g.k_ = k;
    g.mix_eps_ = mix_eps;
    return g;
  }

  GeneratorKind kind() const { return kind_; }
  const TracialAlgebra& on_site() const { return M_; }
  const TracialAlgebra& bond() const { return W_; }
  int k() const { return k_; }
  double mix_eps() const { return mix_eps_; }

  Mat matrix_at(const DriverPoint& p) const {
    int dm = M_.coord_dim(), dw = W_.coord_dim();
    Vec uM = M_.identity_coords(), uW = W_.identity_coords();
    Mat E = Mat::Zero(dw, dm * dw);
    if (kind_ == GeneratorKind::product) {
      for (int a = 0; a < dm; ++a) E.middleCols(a * dw, dw) = uM(a) * Mat::Identity(dw, dw);
      return E;
    }
    int pd = M_.dim(0), qd = W_.dim(0);
    Stream rng = Stream(p.seed).substream("generator");
    Mat G = rng.gaussian_matrix(pd * qd * k_, qd);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat V = qr.householderQ() * Mat::Identity(pd * qd * k_, qd);
    Mat Ik = Mat::Identity(k_, k_);
    for (int a = 0; a < dm; ++a) {
      Mat Ba = M_.basis_element(a).blocks[0];
      for (int b = 0; b < dw; ++b) {
        Mat Bb = W_.basis_element(b).blocks[0];
        Mat X = Eigen::kroneckerProduct(Eigen::kroneckerProduct(Ba, Bb).eval(), Ik).eval();
        Element y;
        y.blocks.push_back(V.adjoint() * X * V);
        E.col(a * dw + b) = (1.0 - mix_eps_) * W_.to_coords(y) + (mix_eps_ * uM(a) * uW(b)) * uW;
      }
    }
    return E;
  }

  /// phi(x) = E(1 (x) x)
  static Mat induced_phi_matrix(const TracialAlgebra& M, const TracialAlgebra& W, const Mat& E) {
    int dm = M.coord_dim(), dw = W.coord_dim();
    Vec uM = M.identity_coords();
    Mat phi = Mat::Zero(dw, dw);
    for (int a = 0; a < dm; ++a) phi += uM(a) * E.middleCols(a * dw, dw);
    return phi;
  }

  SuperOperator induced_phi(const DriverPoint& p) const { return phi_from_matrix(matrix_at(p)); }

  SuperOperator phi_from_matrix(const Mat& E) const {
    Provenance prov;
    prov.label = std::string("phi[") + generator_kind_name(kind_) + "]";
    MapFlags f;
    f.hermiticity_preserving = Tri::yes;
    f.positive = Tri::yes;
    f.completely_positive = Tri::yes;
    SuperOperator S(W_, induced_phi_matrix(M_, W_, E), prov, f);
    S.mutable_flags().unital = check_unital(S) ? Tri::yes : Tri::no;
    S.mutable_flags().tracial = check_tracial(S) ? Tri::yes : Tri::no;
    S.mutable_flags().faithful = faithfulness_check(S).faithful;
    return S;
  }

  /// Unitality, positivity on random positive elements of M (x) W and
  /// consistency of phi at n_points driver points.
  void validate(const ErgodicDriver& driver, int n_points = 4, int n_probe = 64, const Tolerances& tol = {}) const {
    TracialAlgebra T = tensor_algebra(M_, W_);
    Mat K = product_basis_matrix(M_, W_);
    Vec one = K.transpose() * T.identity_coords();
    Stream rng(0x5eedULL);
    for (int i = 0; i < n_points; ++i) {
      Mat E = matrix_at(driver.point_at(i));
      Vec e1 = E * one;
      if ((e1 - W_.identity_coords()).cwiseAbs().maxCoeff() > tol.flag_tol) throw hypothesis_error("generator is not unital");
      for (int s = 0; s < n_probe; ++s) {
        Element z = T.random_psd(rng, s % 2 == 0);
        Element y = W_.from_coords(E * (K.transpose() * T.to_coords(z)));
        double scale = std::max(1.0, W_.norm(y, Norm::inf));
        if (W_.min_eigenvalue(y) < -tol.pos_tol * scale) throw hypothesis_error("generator is not positive");
      }
      SuperOperator phi = phi_from_matrix(E);
      Element x = W_.random_hermitian(rng);
      Element direct = W_.from_coords(E * (K.transpose() * T.to_coords(tensor(M_, W_, M_.identity(), x))));
      if (W_.max_abs_entry(direct - phi.apply(x)) > 1e-12 * std::max(1.0, W_.max_abs_entry(x)))
        throw internal_error("induced phi disagrees with the generator");
    }
  }

  std::string describe() const {
    std::string s = std::string(generator_kind_name(kind_)) + " generator, M = " + M_.describe() + ", W = " + W_.describe();
    if (kind_ == GeneratorKind::kraus) s += " (k=" + std::to_string(k_) + ", mix_eps=" + std::to_string(mix_eps_) + ")";
    return s;
  }

 private:
  GeneratorKind kind_ = GeneratorKind::product;
  TracialAlgebra M_, W_;
  int k_ = 1;
  double mix_eps_ = 0.0;
};

struct GeneratorSite {
  Mat E;
  SuperOperator phi;
  SuperOperator gamma;  // predual of phi
};

/// E_{T^n omega} for a fixed omega, memoised, with cached flank contraction
/// bounds.
class GeneratorSource {
 public:
  GeneratorSource(ErgodicDriver driver, std::shared_ptr<const GeneratorMap> gen, ContractionOptions copt = {200, 20, 3},
                  std::uint64_t estimate_seed = 0)
      : driver_(std::move(driver)), gen_(std::move(gen)), copt_(copt), estimate_seed_(estimate_seed) {}
  GeneratorSource(ErgodicDriver driver, const GeneratorMap& gen, ContractionOptions copt = {200, 20, 3}, std::uint64_t estimate_seed = 0)
      : GeneratorSource(std::move(driver), std::make_shared<const GeneratorMap>(gen), copt, estimate_seed) {}

  const GeneratorSite& at(long long n) const {
    auto it = cache_.find(n);
    if (it == cache_.end()) {
      GeneratorSite s;
      s.E = gen_->matrix_at(driver_.point_at(n));
      s.phi = gen_->phi_from_matrix(s.E);
      s.gamma = predual(s.phi);
      it = cache_.emplace(n, std::move(s)).first;
    }
    return it->second;
  }
  const GeneratorMap& generator() const { return *gen_; }
  const ErgodicDriver& driver() const { return driver_; }
  const ContractionOptions& contraction_options() const { return copt_; }
  std::uint64_t estimate_seed() const { return estimate_seed_; }
  GeneratorSource shifted(long long k) const { return GeneratorSource(driver_.shifted(k), gen_, copt_, estimate_seed_); }

  /// Upper bound on c(gamma_hi o ... o gamma_lo); 1 for an empty range.
  double gamma_product_upper(long long lo, long long hi) const {
    if (hi < lo) return 1.0;
    auto key = std::make_pair(lo, hi);
    auto it = flank_.find(key);
    if (it != flank_.end()) return it->second;
    const TracialAlgebra& W = gen_->bond();
    Mat P = Mat::Identity(W.coord_dim(), W.coord_dim());
    for (long long j = lo; j <= hi; ++j) {
      P = at(j).gamma.matrix() * P;
      double s = P.cwiseAbs().maxCoeff();
      if (s > 0.0) P /= s;
    }
    MapFlags f;
    f.hermiticity_preserving = Tri::yes;
    f.positive = Tri::yes;
    SuperOperator S(W, P, Provenance{}, f);
    double c = 1.0;
    try {
      Stream rng = Stream(estimate_seed_).substream(static_cast<std::uint64_t>(lo)).substream(static_cast<std::uint64_t>(hi));
      c = contraction_estimate(S, copt_, rng).upper_bound;
    } catch (const Error&) {
      c = 1.0;
    }
    flank_.emplace(key, c);
    return c;
  }

 private:
  ErgodicDriver driver_;
  std::shared_ptr<const GeneratorMap> gen_;
  ContractionOptions copt_;
  std::uint64_t estimate_seed_ = 0;
  mutable std::map<long long, GeneratorSite> cache_;
  mutable std::map<std::pair<long long, long long>, double> flank_;
};

// ---- local observables ----

/// A sum of product observables coef * a_first (x) ... (x) a_last.
struct ProductTerm {
  cplx coef = 1.0;
  std::vector<Element> sites;
};

class LocalObservable {
 public:
  LocalObservable() = default;
  LocalObservable(TracialAlgebra M, long long first, std::vector<ProductTerm> terms) : M_(std::move(M)), first_(first), terms_(std::move(terms)) {
    if (terms_.empty()) throw input_error("local observable needs at least one term");
    len_ = static_cast<int>(terms_[0].sites.size());
    if (len_ < 1) throw input_error("local observable needs a non-empty support");
    for (const auto& t : terms_) {
      if (static_cast<int>(t.sites.size()) != len_) throw input_error("terms of a local observable have different supports");
      for (const auto& x : t.sites) M_.check(x);
    }
  }
  static LocalObservable product(const TracialAlgebra& M, long long first, std::vector<Element> sites) {
    return LocalObservable(M, first, {ProductTerm{1.0, std::move(sites)}});
  }
  static LocalObservable single(const TracialAlgebra& M, long long site, Element a) { return product(M, site, {std::move(a)}); }
  static LocalObservable identity(const TracialAlgebra& M, long long site) { return single(M, site, M.identity()); }

  const TracialAlgebra& on_site() const { return M_; }
  long long first() const { return first_; }
  long long last() const { return first_ + len_ - 1; }
  int length() const { return len_; }
  const std::vector<ProductTerm>& terms() const { return terms_; }

  /// Exact for a single product term, the triangle bound otherwise.
  double norm_inf() const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double p = std::abs(t.coef);
      for (const auto& x : t.sites) p *= M_.norm(x, Norm::inf);
      s += p;
    }
    return s;
  }
  bool norm_exact() const { return terms_.size() == 1; }

  /// alpha_k: the same observable moved k sites to the right.
  LocalObservable shifted(long long k) const {
    LocalObservable o = *this;
    o.first_ += k;
    return o;
  }

  /// Same observable on a larger support, padded with identities.
  LocalObservable padded(long long first, long long last) const {
    if (first > first_ || last < this->last()) throw input_error("padding must contain the support");
    std::vector<ProductTerm> ts;
    for (const auto& t : terms_) {
      ProductTerm p;
      p.coef = t.coef;
      for (long long j = first; j <= last; ++j)
        p.sites.push_back(j >= first_ && j <= this->last() ? t.sites[static_cast<std::size_t>(j - first_)] : M_.identity());
      ts.push_back(std::move(p));
    }
    return LocalObservable(M_, first, std::move(ts));
  }


 private:
  TracialAlgebra M_;
  long long first_ = 0;
  int len_ = 0;
  std::vector<ProductTerm> terms_;
};

inline LocalObservable operator*(const LocalObservable& a, const LocalObservable& b) {
  if (a.on_site() != b.on_site()) throw input_error("observables on different on-site algebras");
  long long lo = std::min(a.first(), b.first()), hi = std::max(a.last(), b.last());
  LocalObservable pa = a.padded(lo, hi), pb = b.padded(lo, hi);
  std::vector<ProductTerm> ts;
  for (const auto& s : pa.terms())
    for (const auto& t : pb.terms()) {
      ProductTerm p;
      p.coef = s.coef * t.coef;
      for (std::size_t j = 0; j < s.sites.size(); ++j) p.sites.push_back(s.sites[j] * t.sites[j]);
      ts.push_back(std::move(p));
    }
  return LocalObservable(a.on_site(), lo, std::move(ts));
}

// ---- evaluation ----

/// E^{[m,n]}(a (x) 1_W), evaluated right to left.
inline Element iterate_generator(const GeneratorSource& src, long long m, long long n, const LocalObservable& a) {
  const GeneratorMap& G = src.generator();
  const TracialAlgebra& M = G.on_site();
  const TracialAlgebra& W = G.bond();
  if (a.on_site() != M) throw input_error("observable lives on a different on-site algebra");
  if (n < m) throw input_error("empty interval");
  if (a.first() < m || a.last() > n) throw input_error("observable support exceeds the interval");
  int dm = M.coord_dim(), dw = W.coord_dim();
  Vec uW = W.identity_coords();
  Vec total = Vec::Zero(dw);
  for (const auto& t : a.terms()) {
    std::vector<Vec> alpha;
    for (const auto& x : t.sites) alpha.push_back(M.to_coords(x));
    Vec w = uW;
    for (long long j = n; j >= m; --j) {
      const GeneratorSite& s = src.at(j);
      if (j < a.first() || j > a.last()) {
        w = s.phi.matrix() * w;
        continue;
      }
      const Vec& al = alpha[static_cast<std::size_t>(j - a.first())];
      Vec nw = Vec::Zero(dw);
      for (int c = 0; c < dm; ++c)
        if (al(c) != cplx(0.0, 0.0)) nw += al(c) * (s.E.middleCols(c * dw, dw) * w);
      w = nw;
    }
    total += t.coef * w;
  }
  return W.from_coords(total);
}

struct PsiEstimate {
  cplx value = 0.0;
  long long window_N = 0;
  double truncation_bound = 0.0;
  State z_state;
  bool widen_window = false;  // flanking process not certified contracting
};

/// Psi_omega(a) ~ tau_W(E^{[-N,N]}(a)). The flank gamma_{first-1} o ... o
/// gamma_{-N} pushes tau_W to the state z_state at the first site of a.
inline PsiEstimate psi_value(const GeneratorSource& src, const LocalObservable& a, long long N) {
  if (a.first() < -N || a.last() > N) throw input_error("observable support exceeds the window");
  const TracialAlgebra& W = src.generator().bond();
  PsiEstimate est;
  est.window_N = N;
  Element e = iterate_generator(src, a.first(), a.last(), a);
  Vec z = W.identity_coords();
  for (long long j = -N; j < a.first(); ++j) z = src.at(j).gamma.matrix() * z;
  Tolerances loose;
  loose.trace_tol = 1e-8;
  loose.pos_tol = 1e-8;
  est.z_state = W.normalize(W.hermitian(W.from_coords(z), 1e-8), loose);
  est.value = W.pairing(e, est.z_state.element);
  double c = src.gamma_product_upper(-N, a.first() - 1);
  est.truncation_bound = 8.0 * a.norm_inf() * c;
  est.widen_window = !(c < 1.0 - 1e-6);
  return est;
}

struct CovarianceCheck {
  long long k = 0;
  double deviation = 0.0;
  double budget = 0.0;
  bool pass = true;
};

/// |Psi_omega(alpha_k a) - Psi_{T^k omega}(a)| against the summed truncation bounds.
inline CovarianceCheck translation_covariance_check(const GeneratorSource& src, const LocalObservable& a, long long k, long long N) {
  CovarianceCheck c;
  c.k = k;
  PsiEstimate lhs = psi_value(src, a.shifted(k), N);
  PsiEstimate rhs = psi_value(src.shifted(k), a, N);
  c.deviation = std::abs(lhs.value - rhs.value);
  c.budget = lhs.truncation_bound + rhs.truncation_bound;
  c.pass = c.deviation <= c.budget;
  return c;
}

// ---- clustering ----

/// D_{.,k}: smallest D >= 1 with c(Gamma_{n,k}) <= D kappa^{n-k+1} for
/// k <= n < k + horizon; Gamma_{n,k} = gamma_n o ... o gamma_k.
inline double D_forward(const GeneratorSource& src, long long k, double kappa, int horizon = 40, const Tolerances& tol = {}) {
  double D = 1.0, best = 1.0;
  for (int L = 1; L <= horizon; ++L) {
    best = std::min(best, src.gamma_product_upper(k, k + L - 1));
    if (best <= tol.resolution_floor) break;
    D = std::max(D, best / std::pow(kappa, L));
  }
  return D;
}

/// D_{k-1,.}: the same for Gamma_{k-1,m} with m decreasing.
inline double D_backward(const GeneratorSource& src, long long k, double kappa, int horizon = 40, const Tolerances& tol = {}) {
  double D = 1.0, best = 1.0;
  for (int L = 1; L <= horizon; ++L) {
    best = std::min(best, src.gamma_product_upper(k - L, k - 1));
    if (best <= tol.resolution_floor) break;
    D = std::max(D, best / std::pow(kappa, L));
  }
  return D;
}

struct DecayRow {
  int gap = 0;
  double corr = 0.0;
  double bound_rhs = 0.0;
  double truncation = 0.0;
  long long anchor_k = 0;
  double E_k = 0.0;
  bool pass = true;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  double kappa = 0.0;
  double C = 0.0;
  double kappa_fit = std::numeric_limits<double>::quiet_NaN();
  double E_fit = std::numeric_limits<double>::quiet_NaN();
  double E_k_max = 0.0;
  long long window = 0;
  bool degenerate = false;  // every correlation below 1e-14
  bool hypothesis_certified = false;  // the flank process admits a fitted rate
  bool all_pass = true;
};

/// Rate C of gamma_0 o gamma_{-1} o ... from a gamma_right record.
inline RateFit generator_rate(const GeneratorSource& src, int length = 40, const ProcessOptions& opt = {}) {
  ProcessRecord r = begin_process(Direction::gamma_right, src.generator().bond(), 0, src.estimate_seed());
  while (r.length() < length && !r.collapsed) extend_process(r, src.at(next_index(r)).gamma, opt);
  return estimate_rate_C(r, 5, opt.collapse_tol, opt.tol);
}

inline long long default_window(double kappa) {
  if (!(kappa > 0.0) || kappa >= 1.0) return 30;
  return std::max<long long>(30, static_cast<long long>(std::ceil(5.0 / std::abs(std::log(kappa)))));
}

/// For each gap l, places b at a.last() + l and compares
/// |Psi(ab) - Psi(a)Psi(b)| with E_k kappa^{l-1} ||a|| ||b||, with the anchor
/// k at the middle of the gap.
inline DecayReport clustering_experiment(const GeneratorSource& src, const LocalObservable& a, const LocalObservable& b,
                                         const std::vector<int>& gaps, std::optional<double> kappa_override = std::nullopt,
                                         std::optional<long long> window = std::nullopt, const ProcessOptions& opt = {}) {
  DecayReport rep;
  rep.C = std::numeric_limits<double>::quiet_NaN();
  rep.kappa = std::numeric_limits<double>::quiet_NaN();
  try {
    RateFit f = generator_rate(src, 40, opt);
    rep.C = f.C;
    rep.kappa = choose_kappa(f.C);
    rep.hypothesis_certified = true;
  } catch (const Error&) {
    rep.hypothesis_certified = false;
  }
  if (kappa_override) rep.kappa = *kappa_override;
  bool have_kappa = std::isfinite(rep.kappa);
  if (have_kappa && !(rep.kappa > 0.0 && rep.kappa < 1.0)) throw input_error("clustering needs kappa in (0, 1)");
  int max_gap = gaps.empty() ? 0 : *std::max_element(gaps.begin(), gaps.end());
  long long reach = std::max({std::abs(a.first()), std::abs(a.last() + max_gap + b.length())});
  rep.window = window ? *window : std::max(default_window(have_kappa ? rep.kappa : 0.0), reach + 5);
  long long N = rep.window;
  double na = a.norm_inf(), nb = b.norm_inf();
  PsiEstimate pa = psi_value(src, a, N);
  std::map<long long, double> E_cache;
  std::vector<double> xs, ys;
  for (int gap : gaps) {
    if (gap < 1) throw input_error("clustering gaps must be >= 1");
    LocalObservable bl = b.shifted(a.last() + gap - b.first());
    PsiEstimate pb = psi_value(src, bl, N);
    PsiEstimate pab = psi_value(src, a * bl, N);
    DecayRow row;
    row.gap = gap;
    row.corr = std::abs(pab.value - pa.value * pb.value);
    row.truncation = pab.truncation_bound + std::abs(pb.value) * pa.truncation_bound + std::abs(pa.value) * pb.truncation_bound;
    long long m = a.last();
    row.anchor_k = m + 1 + (gap - 1) / 2;
    if (have_kappa) {
      auto it = E_cache.find(row.anchor_k);
      if (it == E_cache.end()) {
        double E = 8.0 * D_forward(src, row.anchor_k, rep.kappa, 40, opt.tol) * D_backward(src, row.anchor_k, rep.kappa, 40, opt.tol);
        it = E_cache.emplace(row.anchor_k, E).first;
      }
      row.E_k = it->second;
      rep.E_k_max = std::max(rep.E_k_max, row.E_k);
      row.bound_rhs = row.E_k * std::pow(rep.kappa, gap - 1) * na * nb;
      row.pass = row.corr <= row.bound_rhs;
    } else {
      // no rate, so no bound: only a vanishing correlation passes
      row.E_k = std::numeric_limits<double>::infinity();
      row.bound_rhs = std::numeric_limits<double>::infinity();
      row.pass = row.corr <= 1e-14;
    }
    rep.all_pass = rep.all_pass && row.pass;
    if (row.corr > 1e-14) {
      xs.push_back(gap);
      ys.push_back(std::log(row.corr));
    }
    rep.rows.push_back(row);
  }
  if (xs.size() < 2) {
    rep.degenerate = true;
  } else {
    double slope = detail::log_slope(xs, ys);
    if (xs.size() == 2) slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= xs.size();
    rep.kappa_fit = std::exp(slope);
    rep.E_fit = std::exp(my - slope * (mx - 1.0)) / (na * nb);
  }
  return rep;
}

inline const char* decay_csv_header() { return "gap,corr,bound_rhs,pass\n"; }

inline std::string decay_csv_row(const DecayRow& r) {
  return std::to_string(r.gap) + "," + format_double(r.corr) + "," + format_double(r.bound_rhs) + "," + (r.pass ? "1" : "0") + "\n";
}

// ---- Birkhoff averages ----

struct BirkhoffReport {
  std::vector<double> partial;  // partial[N] = (2N+1)^{-1} sum_{|n|<=N} Re Psi_{T^n omega}(a)
  std::vector<double> cauchy;   // |partial[N] - partial[N_max]|
  double final_average = 0.0;
  double shift_deviation = 0.0;  // |avg(alpha_1 a) - avg(a)|
  double budget = 0.0;  // truncation plus the 2||a||/(2N+1) boundary term
};

inline BirkhoffReport birkhoff_average(const GeneratorSource& src, const LocalObservable& a, int N_max, long long window) {
  if (N_max < 0) throw input_error("birkhoff average needs N_max >= 0");
  BirkhoffReport rep;
  auto value = [&](const LocalObservable& obs, long long n, double& trunc) {
    PsiEstimate e = psi_value(src.shifted(n), obs, window);
    trunc = std::max(trunc, e.truncation_bound);
    return e.value.real();
  };
  double sum = 0.0, sum_shift = 0.0, trunc = 0.0;
  LocalObservable a1 = a.shifted(1);
  for (int N = 0; N <= N_max; ++N) {
    if (N == 0) {
      sum += value(a, 0, trunc);
      sum_shift += value(a1, 0, trunc);
    } else {
      sum += value(a, N, trunc) + value(a, -N, trunc);
      sum_shift += value(a1, N, trunc) + value(a1, -N, trunc);
    }
    rep.partial.push_back(sum / (2.0 * N + 1.0));
  }
  rep.final_average = rep.partial.back();
  for (double p : rep.partial) rep.cauchy.push_back(std::abs(p - rep.final_average));
  rep.shift_deviation = std::abs(sum_shift / (2.0 * N_max + 1.0) - rep.final_average);
  rep.budget = 2.0 * trunc + 2.0 * a.norm_inf() / (2.0 * N_max + 1.0);
  return rep;
}

}  // namespace hennion
