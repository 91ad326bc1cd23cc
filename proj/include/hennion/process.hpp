// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hennion/contraction.hpp"
#include "hennion/superop.hpp"

namespace hennion {

// ---- ergodic drivers ----

enum class DriverKind { iid_shift, rotation, cyclic, constant };

inline const char* driver_kind_name(DriverKind k) {
  switch (k) {
    case DriverKind::iid_shift: return "iid_shift";
    case DriverKind::rotation: return "rotation";
    case DriverKind::cyclic: return "cyclic";
    case DriverKind::constant: return "constant";
  }
  return "?";
}

/// The parameter handed to an ensemble at one site of the process.
struct DriverPoint {
  long long index = 0;
  std::uint64_t seed = 0;
  double phase = 0.0;  // in [0, 1)
};

/// Omega with its shift T, realised lazily: point_at(n) is the parameter of
/// T^n omega. shifted(k) is the driver of T^k omega.
class ErgodicDriver {
 public:
  static ErgodicDriver iid_shift(std::uint64_t master_seed) {
    ErgodicDriver d;
    d.kind_ = DriverKind::iid_shift;
    d.seed_ = master_seed;
    return d;
  }
  static ErgodicDriver rotation(double alpha, double omega0, std::uint64_t seed = 0) {
    if (!std::isfinite(alpha) || !std::isfinite(omega0)) throw input_error("rotation driver needs finite alpha and omega0");
    if (alpha - std::floor(alpha) == 0.0) throw input_error("rotation angle must not be an integer");
    if (omega0 < 0.0 || omega0 >= 1.0) throw input_error("rotation omega0 must lie in [0, 1)");
    ErgodicDriver d;
    d.kind_ = DriverKind::rotation;
    d.alpha_ = alpha;
    d.omega0_ = omega0;
    d.seed_ = seed;
    return d;
  }
  static ErgodicDriver cyclic(int period, std::uint64_t seed) {
    if (period < 1) throw input_error("cyclic driver needs period >= 1");
    ErgodicDriver d;
    d.kind_ = DriverKind::cyclic;
    d.period_ = period;
    d.seed_ = seed;
    return d;
  }
  static ErgodicDriver constant(std::uint64_t seed = 0, double phase = 0.0) {
    if (phase < 0.0 || phase >= 1.0) throw input_error("constant driver phase must lie in [0, 1)");
    ErgodicDriver d;
    d.kind_ = DriverKind::constant;
    d.seed_ = seed;
    d.omega0_ = phase;
    return d;
  }

  DriverKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  double alpha() const { return alpha_; }
  double omega0() const { return omega0_; }
  int period() const { return period_; }
  long long offset() const { return offset_; }

  ErgodicDriver shifted(long long k) const {
    ErgodicDriver d = *this;
    d.offset_ += k;
    return d;
  }

  DriverPoint point_at(long long n) const {
    long long j = n + offset_;
    DriverPoint p;
    p.index = n;
    switch (kind_) {
      case DriverKind::iid_shift:
        p.seed = derive_key(seed_, static_cast<std::uint64_t>(j));
        p.phase = Stream(p.seed).substream("phase").uniform();
        break;
      case DriverKind::rotation: {
        long double x = static_cast<long double>(omega0_) + static_cast<long double>(j) * static_cast<long double>(alpha_);
        x -= std::floor(x);
        p.phase = static_cast<double>(x);
        if (p.phase >= 1.0) p.phase = 0.0;
        p.seed = derive_key(seed_, static_cast<std::uint64_t>(std::llround(p.phase * 9007199254740992.0)));
        break;
      }
      case DriverKind::cyclic: {
        long long r = ((j % period_) + period_) % period_;
        p.seed = derive_key(seed_, static_cast<std::uint64_t>(r));
        p.phase = static_cast<double>(r) / period_;
        break;
      }
      case DriverKind::constant:
        p.seed = seed_;
        p.phase = omega0_;
        break;
    }
    return p;
  }

  std::string describe() const {
    std::ostringstream os;
    os << driver_kind_name(kind_) << "(seed=" << seed_;
    if (kind_ == DriverKind::rotation) os << ", alpha=" << alpha_ << ", omega0=" << omega0_;
    if (kind_ == DriverKind::cyclic) os << ", period=" << period_;
    if (offset_ != 0) os << ", offset=" << offset_;
    os << ")";
    return os.str();
  }

 private:
  DriverKind kind_ = DriverKind::constant;
  std::uint64_t seed_ = 0;
  double alpha_ = 0.0;
  double omega0_ = 0.0;
  int period_ = 1;
  long long offset_ = 0;
};

// ---- channel ensembles ----

enum class EnsembleKind { fixed, choice, random_kraus, strongly_summable, interpolated };
enum class KrausNormalization { unital, tracial, none };

inline const char* ensemble_kind_name(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::fixed: return "fixed";
    case EnsembleKind::choice: return "choice";
    case EnsembleKind::random_kraus: return "random_kraus";
    case EnsembleKind::strongly_summable: return "strongly_summable";
    case EnsembleKind::interpolated: return "interpolated";
  }
  return "?";
}

inline const char* normalization_name(KrausNormalization n) {
  switch (n) {
    case KrausNormalization::unital: return "unital";
    case KrausNormalization::tracial: return "tracial";
    case KrausNormalization::none: return "none";
  }
  return "?";
}

namespace detail {
inline Mat inverse_sqrt_psd(const Mat& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (m + m.adjoint())));
  RVec ev = es.eigenvalues();
  if (ev.minCoeff() <= floor * std::max(1.0, ev.maxCoeff())) throw domain_error("inverse square root of a singular element");
  RVec is = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * is.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

inline Element inverse_sqrt(const TracialAlgebra& A, const Element& x, double floor = 1e-14) {
  A.check(x);
  Element r;
  for (const auto& b : x.blocks) r.blocks.push_back(inverse_sqrt_psd(b, floor));
  return r;
}

inline Element inverse(const TracialAlgebra& A, const Element& x, double floor = 1e-14) {
  Element s = inverse_sqrt(A, x, floor);
  return s * s;
}
}  // namespace detail

/// omega -> gamma_omega. channel_at is a pure function of the driver point.
class ChannelEnsemble {
 public:
  static ChannelEnsemble fixed(SuperOperator S) {
    ChannelEnsemble e;
    e.kind_ = EnsembleKind::fixed;
    e.A_ = S.algebra();
    e.maps_ = {std::move(S)};
    return e;
  }
  /// Picks maps[i] with probability weights[i], using the phase of the point.
  static ChannelEnsemble choice(std::vector<SuperOperator> maps, std::vector<double> weights) {
    if (maps.empty() || maps.size() != weights.size()) throw input_error("choice ensemble needs one weight per map");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw input_error("choice weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw input_error("choice weights must not all vanish");
    for (auto& w : weights) w /= total;
    for (const auto& S : maps)
      if (S.algebra() != maps[0].algebra()) throw input_error("choice ensemble maps live on different algebras");
    ChannelEnsemble e;
    e.kind_ = EnsembleKind::choice;
    e.A_ = maps[0].algebra();
    e.maps_ = std::move(maps);
    e.weights_ = std::move(weights);
    return e;
  }
  /// k random Gaussian Kraus operators, normalised, then mixed with the
  /// replacement channel onto target with weight mix_eps.
  static ChannelEnsemble random_kraus(const TracialAlgebra& A, int k, double mix_eps, std::optional<Element> target = std::nullopt,
                                      KrausNormalization norm = KrausNormalization::unital) {
    if (k < 1) throw input_error("random_kraus needs k >= 1");
    if (mix_eps < 0.0 || mix_eps > 1.0) throw input_error("random_kraus mix_eps must lie in [0, 1]");
    ChannelEnsemble e;
    e.kind_ = EnsembleKind::random_kraus;
    e.A_ = A;
    e.k_ = k;
    e.mix_eps_ = mix_eps;
    e.normalization_ = norm;
    e.target_ = target ? A.normalize(*target).element : A.identity();
    return e;
  }
  /// x -> sum_i tau(x a_i) m_i with `terms` random full-rank positive pairs.
  static ChannelEnsemble strongly_summable(const TracialAlgebra& A, int terms) {
    if (terms < 1) throw input_error("strongly_summable ensemble needs terms >= 1");
    ChannelEnsemble e;
    e.kind_ = EnsembleKind::strongly_summable;
    e.A_ = A;
    e.k_ = terms;
    return e;
  }
  /// (1 - phase) S0 + phase S1
  static ChannelEnsemble interpolated(SuperOperator S0, SuperOperator S1) {
    if (S0.algebra() != S1.algebra()) throw input_error("interpolated ensemble maps live on different algebras");
    ChannelEnsemble e;
    e.kind_ = EnsembleKind::interpolated;
    e.A_ = S0.algebra();
    e.maps_ = {std::move(S0), std::move(S1)};
    return e;
  }

  EnsembleKind kind() const { return kind_; }
  const TracialAlgebra& algebra() const { return A_; }
  const std::vector<SuperOperator>& maps() const { return maps_; }
  const std::vector<double>& weights() const { return weights_; }
  int k() const { return k_; }
  double mix_eps() const { return mix_eps_; }
  KrausNormalization normalization() const { return normalization_; }
  const Element& target() const { return target_; }

  SuperOperator channel_at(const DriverPoint& p) const {
    switch (kind_) {
      case EnsembleKind::fixed:
        return maps_[0];
      case EnsembleKind::choice: {
        double acc = 0.0;
        for (std::size_t i = 0; i < maps_.size(); ++i) {
          acc += weights_[i];
          if (p.phase < acc) return maps_[i];
        }
        return maps_.back();
      }
      case EnsembleKind::interpolated:
        return mix(maps_[0], maps_[1], p.phase);
      case EnsembleKind::random_kraus:
        return random_kraus_channel(p);
      case EnsembleKind::strongly_summable: {
        Stream rng = Stream(p.seed).substream("channel");
        std::vector<std::pair<Element, Element>> pairs;
        for (int i = 0; i < k_; ++i) {
          Element a = A_.random_psd(rng, true);
          Element m = A_.random_psd(rng, true);
          pairs.emplace_back(std::move(a), std::move(m));
        }
        return from_strongly_summable(A_, pairs, "strongly_summable");
      }
    }
    throw internal_error("unknown ensemble kind");
  }

  /// Checks positivity and faithfulness of the channels at n_points sample
  /// points of the driver.
  void validate(const ErgodicDriver& driver, int n_points = 8) const {
    for (int i = 0; i < n_points; ++i) {
      SuperOperator S = channel_at(driver.point_at(i));
      if (S.flags().positive == Tri::no) throw hypothesis_error("ensemble emitted a non-positive map at index " + std::to_string(i));
      Tri f = S.flags().faithful;
      if (f != Tri::yes) f = faithfulness_check(S).faithful;
      if (f != Tri::yes) throw hypothesis_error("ensemble emitted a non-faithful map at index " + std::to_string(i));
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os << ensemble_kind_name(kind_) << " on " << A_.describe();
    if (kind_ == EnsembleKind::random_kraus)
      os << " (k=" << k_ << ", mix_eps=" << mix_eps_ << ", " << normalization_name(normalization_) << ")";
    if (kind_ == EnsembleKind::choice || kind_ == EnsembleKind::fixed || kind_ == EnsembleKind::interpolated) {
      os << " [";
      for (std::size_t i = 0; i < maps_.size(); ++i) os << (i ? ", " : "") << maps_[i].provenance().label;
      os << "]";
    }
    return os.str();
  }

 private:
  SuperOperator random_kraus_channel(const DriverPoint& p) const {
    Stream rng = Stream(p.seed).substream("channel");
    std::vector<Element> ops(k_);
    for (auto& K : ops)
      for (int b = 0; b < A_.num_blocks(); ++b) K.blocks.push_back(rng.gaussian_matrix(A_.dim(b), A_.dim(b)));
    if (normalization_ != KrausNormalization::none) {
      Element T = A_.zero();
      for (const auto& K : ops) T += normalization_ == KrausNormalization::unital ? K * adjoint(K) : adjoint(K) * K;
      Element Ti = detail::inverse_sqrt(A_, T);
      for (auto& K : ops) K = normalization_ == KrausNormalization::unital ? Ti * K : K * Ti;
    } else {
      Element T = A_.zero();
      for (const auto& K : ops) T += K * adjoint(K);
      double s = 1.0 / std::sqrt(A_.max_eigenvalue(T));
      for (auto& K : ops) K *= cplx(s, 0.0);
    }
    SuperOperator S = from_kraus(A_, ops, "random_kraus");
    if (mix_eps_ > 0.0) S = mix(S, replacement(A_, target_), mix_eps_);
    return S;
  }

  EnsembleKind kind_ = EnsembleKind::fixed;
  TracialAlgebra A_;
  std::vector<SuperOperator> maps_;
  std::vector<double> weights_;
  int k_ = 1;
  double mix_eps_ = 0.0;
  KrausNormalization normalization_ = KrausNormalization::unital;
  Element target_;
};

/// gamma_{T^n omega} for a fixed omega, with memoisation.
class ChannelSource {
 public:
  ChannelSource(ErgodicDriver driver, std::shared_ptr<const ChannelEnsemble> ensemble)
      : driver_(std::move(driver)), ensemble_(std::move(ensemble)) {}
  ChannelSource(ErgodicDriver driver, const ChannelEnsemble& ensemble)
      : ChannelSource(std::move(driver), std::make_shared<const ChannelEnsemble>(ensemble)) {}

  const SuperOperator& at(long long n) const {
    auto it = cache_.find(n);
    if (it == cache_.end()) it = cache_.emplace(n, ensemble_->channel_at(driver_.point_at(n))).first;
    return it->second;
  }
  const ErgodicDriver& driver() const { return driver_; }
  const ChannelEnsemble& ensemble() const { return *ensemble_; }
  const TracialAlgebra& algebra() const { return ensemble_->algebra(); }
  ChannelSource shifted(long long k) const { return ChannelSource(driver_.shifted(k), ensemble_); }

 private:
  ErgodicDriver driver_;
  std::shared_ptr<const ChannelEnsemble> ensemble_;
  mutable std::map<long long, SuperOperator> cache_;
};

// ---- process records ----

enum class Direction { gamma_right, phi_left };

inline const char* direction_name(Direction d) { return d == Direction::gamma_right ? "gamma_right" : "phi_left"; }

struct TraceEntry {
  int length = 0;
  double lower = 0.0;  // monotone envelope over the whole trace
  double upper = 1.0;
  double raw_lower = 0.0;  // the estimate made at this length
  double raw_upper = 1.0;
  double eta = 0.0;
  bool certified = false;
};

struct ProcessOptions {
  ContractionOptions contraction{200, 20, 3};
  int renorm_every = 25;
  double collapse_tol = 1e-14;  // c_upper below this counts as c = 0
  Tolerances tol;
};

/// Gamma_{n,m} = gamma_n o ... o gamma_m grown by decreasing m, or
/// Phi_{n,m} = phi_n o ... o phi_m grown by increasing n. composed holds the
/// product divided by exp(log_scale).
struct ProcessRecord {
  Direction direction = Direction::gamma_right;
  long long m = 0;
  long long n = -1;
  std::uint64_t seed = 0;
  SuperOperator composed;
  double log_scale = 0.0;
  std::vector<Mat> steps;  // per-site matrices, ordered by site index
  std::vector<TraceEntry> c_trace;
  int nu = -1;  // -1: no certified contraction yet
  int nu_optimistic = -1;
  bool collapsed = false;
  State last_fixed_point;

  int length() const { return static_cast<int>(c_trace.size()); }
  double c_lower() const { return c_trace.empty() ? 1.0 : c_trace.back().lower; }
  double c_upper() const { return c_trace.empty() ? 1.0 : c_trace.back().upper; }
};

inline ProcessRecord begin_process(Direction dir, const TracialAlgebra& A, long long anchor, std::uint64_t seed = 0) {
  ProcessRecord r;
  r.direction = dir;
  r.seed = seed;
  if (dir == Direction::gamma_right) {
    r.n = anchor;
    r.m = anchor + 1;
  } else {
    r.m = anchor;
    r.n = anchor - 1;
  }
  Provenance p;
  p.label = "empty product";
  r.composed = SuperOperator(A, Mat::Identity(A.coord_dim(), A.coord_dim()), p);
  return r;
}

/// Site index of the next channel the record expects.
inline long long next_index(const ProcessRecord& r) { return r.direction == Direction::gamma_right ? r.m - 1 : r.n + 1; }

/// The map whose contraction is tracked: Gamma itself, or the predual of Phi.
inline SuperOperator contraction_target(const ProcessRecord& r, const Tolerances& tol = {}) {
  return r.direction == Direction::gamma_right ? r.composed : predual(r.composed, tol);
}

/// Product of the stored steps, recomputed from scratch (unscaled).
inline Mat recompose(const ProcessRecord& r) {
  int d = r.composed.algebra().coord_dim();
  Mat P = Mat::Identity(d, d);
  for (auto it = r.steps.rbegin(); it != r.steps.rend(); ++it) P = P * (*it);
  return P;
}

inline void extend_process(ProcessRecord& r, const SuperOperator& step, const ProcessOptions& opt = {}) {
  const TracialAlgebra& A = r.composed.algebra();
  if (step.algebra() != A) throw input_error("process step lives on a different algebra");
  bool first = r.c_trace.empty();
  if (r.direction == Direction::gamma_right) {
    r.composed = first ? step : compose(r.composed, step, false, opt.tol);
    r.steps.insert(r.steps.begin(), step.matrix());
    r.m -= 1;
  } else {
    r.composed = first ? step : compose(step, r.composed, false, opt.tol);
    r.steps.push_back(step.matrix());
    r.n += 1;
  }
  int len = r.length() + 1;
  if (opt.renorm_every > 0 && len % opt.renorm_every == 0) {
    double t = A.rtrace(r.composed.apply(A.identity()));
    if (!(t > 0.0)) throw domain_error("composed process annihilates the identity");
    r.composed = scaled(r.composed, 1.0 / t);
    r.log_scale += std::log(t);
  }

  TraceEntry e;
  e.length = len;
  if (r.collapsed) {
    e.raw_lower = 0.0;
    e.raw_upper = r.c_trace.back().raw_upper;
    e.eta = r.c_trace.back().eta;
  } else {
    Stream rng = Stream(r.seed).substream(static_cast<std::uint64_t>(len));
    ContractionEstimate est = contraction_estimate(contraction_target(r, opt.tol), opt.contraction, rng, opt.tol);
    e.raw_lower = est.lower_bound;
    e.raw_upper = est.upper_bound;
    e.eta = est.eta;
    r.last_fixed_point = est.fixed_point;
  }
  e.lower = e.raw_lower;
  e.upper = e.raw_upper;
  if (!r.c_trace.empty()) e.upper = std::min(e.upper, r.c_trace.back().upper);
  e.upper = std::max(e.upper, e.lower);
  for (auto it = r.c_trace.rbegin(); it != r.c_trace.rend() && it->lower < e.lower; ++it) {
    it->lower = e.lower;
    it->upper = std::max(it->upper, it->lower);
  }
  e.certified = e.upper < 1.0 - 1e-6;
  r.c_trace.push_back(e);
  if (r.nu < 0 && e.certified) r.nu = len - 1;
  if (r.nu_optimistic < 0 && e.raw_lower < 1.0 - 1e-6) r.nu_optimistic = len - 1;
  if (e.upper <= opt.collapse_tol) r.collapsed = true;
}

/// Extends r with the channels of src until it has `length` steps or, when
/// stop_on_collapse is set, until c_upper drops below the collapse tolerance.
inline void grow_process(ProcessRecord& r, const ChannelSource& src, int length, const ProcessOptions& opt = {},
                         bool stop_on_collapse = true) {
  while (r.length() < length) {
    if (stop_on_collapse && r.collapsed) break;
    const SuperOperator& g = src.at(next_index(r));
    extend_process(r, r.direction == Direction::gamma_right ? g : predual(g, opt.tol), opt);
  }
}

// ---- rate, prefactor, stopping time ----

struct RateFit {
  double C = 0.0;
  double fit_r2 = 1.0;
  bool exact_zero = false;
  int n_used = 0;
};

/// C = exp(slope) of the least-squares line through log sqrt(lower upper)
/// against length, over entries past the burn-in that are contracting and
/// resolved above the floor. A trace that collapses to c = 0 before ten
/// such entries exist reports C = 0 with exact_zero set.
inline RateFit estimate_rate_C(const ProcessRecord& r, int burn_in = 5, double collapse_tol = 1e-14, const Tolerances& tol = {}) {
  RateFit f;
  std::vector<double> xs, ys;
  bool collapsed = false;
  for (const auto& e : r.c_trace) {
    collapsed = collapsed || e.upper <= collapse_tol;
    if (e.length <= burn_in || e.upper >= 1.0 || e.lower <= tol.resolution_floor) continue;
    xs.push_back(e.length);
    ys.push_back(0.5 * (std::log(e.lower) + std::log(e.upper)));
  }
  if (xs.size() < 10 && collapsed) {
    f.exact_zero = true;
    f.C = 0.0;
    return f;
  }
  if (xs.size() < 10) throw domain_error("not enough contracting entries to fit the rate (" + std::to_string(xs.size()) + " < 10)");
  double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxy / sxx;
  f.C = std::min(std::exp(slope), 1.0);
  f.fit_r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.n_used = static_cast<int>(xs.size());
  return f;
}

/// kappa = C + 0.05, or the midpoint of (C, 1) when that would reach 1.
inline double choose_kappa(double C, double margin = 0.05) {
  if (!(C >= 0.0) || C >= 1.0) throw domain_error("rate must lie in [0, 1) to choose kappa");
  double k = C + margin;
  return k < 1.0 ? k : 0.5 * (C + 1.0);
}

/// Smallest D >= 1 with upper(length) <= D kappa^length over resolved entries.
inline double prefactor_D(const std::vector<TraceEntry>& trace, double kappa, const Tolerances& tol = {}) {
  double D = 1.0;
  for (const auto& e : trace)
    if (e.upper > tol.resolution_floor) D = std::max(D, e.upper / std::pow(kappa, e.length));
  return D;
}

inline int stopping_time_nu(const ProcessRecord& r) { return r.nu; }

// ---- limit objects ----

struct LimitStateEstimate {
  State X;
  double spread = 0.0;  // max pairwise ||Gamma.x_i - Gamma.x_j||_1
};

inline LimitStateEstimate limit_state_estimate(const ProcessRecord& r, const std::vector<State>& probes, const Tolerances& tol = {}) {
  if (r.direction != Direction::gamma_right) throw input_error("limit state needs a gamma_right record");
  if (probes.size() < 2) throw input_error("limit state needs at least two probes");
  if (r.c_trace.empty()) throw input_error("limit state of an empty process");
  const TracialAlgebra& A = r.composed.algebra();
  std::vector<Element> imgs;
  for (const auto& p : probes) imgs.push_back(projective_image(r.composed, p.element, tol));
  LimitStateEstimate out;
  Tolerances loose = tol;
  loose.trace_tol = 1e-8;
  loose.pos_tol = std::max(tol.pos_tol, 1e-8);
  out.X = A.normalize(A.hermitian(imgs[0], 1e-8), loose);
  for (std::size_t i = 0; i < imgs.size(); ++i)
    for (std::size_t j = i + 1; j < imgs.size(); ++j) out.spread = std::max(out.spread, A.norm(imgs[i] - imgs[j], Norm::one));
  return out;
}

struct DualValue {
  double scalar_estimate = 0.0;
  double residual_inf = 0.0;
  double bound = 0.0;  // 8 ||a||_inf c_upper
};

/// Z = Phi(1)^{-1/2} Phi(a) Phi(1)^{-1/2}; reports tau(Z) and ||Z - tau(Z) 1||_inf.
inline DualValue dual_normalized_value(const ProcessRecord& r, const Element& a, const Tolerances& tol = {}) {
  if (r.direction != Direction::phi_left) throw input_error("dual normalized value needs a phi_left record");
  const TracialAlgebra& A = r.composed.algebra();
  Element P1 = r.composed.apply(A.identity());
  double lmax = A.max_eigenvalue(P1);
  double lmin = A.min_eigenvalue(P1);
  if (!(lmax > 0.0) || !(lmin > 1e-10 * lmax)) throw hypothesis_error("Phi(1) is not invertible");
  Element s = detail::inverse_sqrt(A, P1, 1e-10);
  Element Z = s * r.composed.apply(a) * s;
  DualValue v;
  cplx t = A.trace(Z);
  v.scalar_estimate = t.real();
  v.residual_inf = A.norm(Z - t * A.identity(), Norm::inf);
  v.bound = 8.0 * A.norm(a, Norm::inf) * r.c_upper();
  return v;
}

/// ||Gamma^*(Gamma(1)^{-1})||_inf, logged along a run; invariant under the
/// record's rescaling.
inline double final_theorem_quantity(const ProcessRecord& r) {
  if (r.direction != Direction::gamma_right) throw input_error("final-theorem quantity needs a gamma_right record");
  const TracialAlgebra& A = r.composed.algebra();
  Element G1 = r.composed.apply(A.identity());
  double lmax = A.max_eigenvalue(G1);
  if (!(lmax > 0.0) || A.min_eigenvalue(G1) <= 1e-13 * lmax) return std::numeric_limits<double>::infinity();
  return A.norm(r.composed.apply_adjoint(detail::inverse(A, G1, 1e-13)), Norm::inf);
}

// ---- rank-one collapse ----

struct RankOneStep {
  int length = 0;
  long long n = 0, m = 0;
  double lhs = 0.0;
  double ratio = 0.0;  // lhs / (kappa^length ||a||)
  double E = 0.0;      // running sup of ratio
};

struct RankOneReport {
  std::vector<RankOneStep> steps;
  double E_k = 0.0;
  double relative_change = 0.0;  // of E over the last `window` steps
  bool stabilized = false;
};

namespace detail {
inline Vec apply_range(const ChannelSource& src, long long lo, long long hi, Vec v) {
  for (long long j = lo; j <= hi; ++j) v = src.at(j).matrix() * v;
  return v;
}
inline Vec apply_adjoint_range(const ChannelSource& src, long long lo, long long hi, Vec v) {
  for (long long j = hi; j >= lo; --j) v = src.at(j).matrix().transpose() * v;
  return v;
}
inline Vec normalize_coords(const TracialAlgebra& A, Vec v) {
  double t = (A.identity_coords().transpose() * v)(0).real();
  if (!(t > 0.0)) throw domain_error("kernel state in rank-one collapse");
  return v / t;
}
}  // namespace detail

/// Grows Gamma_{n,m} around anchor k (n >= k > m), alternating n += 1 and
/// m -= 1, and compares Gamma(a)/tau(Gamma(1)) with tau(B_m a) X_n. The limit
/// objects are approximated with `tail` extra channels on the far side.
inline RankOneReport rank_one_collapse(const ChannelSource& src, long long k, const Element& a, int max_length, double kappa,
                                       int tail = 40, int window = 20, const Tolerances& tol = {}) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw input_error("rank-one collapse needs kappa in (0, 1)");
  const TracialAlgebra& A = src.algebra();
  double anorm = A.norm(a, Norm::inf);
  if (!(anorm > 0.0)) throw input_error("rank-one collapse needs a non-zero observable");
  Vec one = A.identity_coords();
  Vec ac = A.to_coords(a);
  RankOneReport rep;
  long long n = k, m = k - 1;
  Mat G = src.at(n).matrix() * src.at(m).matrix();
  for (int len = 2; len <= max_length; ++len) {
    if (len > 2) {
      if (len % 2 == 1) {
        ++n;
        G = src.at(n).matrix() * G;
      } else {
        --m;
        G = G * src.at(m).matrix();
      }
      double s = G.cwiseAbs().maxCoeff();
      if (s > 0.0) G /= s;
    }
    Vec X = detail::normalize_coords(A, G * detail::apply_range(src, m - tail, m - 1, one));
    Vec B = detail::normalize_coords(A, G.transpose() * detail::apply_adjoint_range(src, n + 1, n + tail, one));
    Vec Ga = G * ac;
    double t1 = (one.transpose() * (G * one))(0).real();
    if (!(t1 > 0.0)) throw domain_error("Gamma(1) has vanishing trace");
    cplx tba = (B.transpose() * ac)(0);
    Vec diff = Ga / t1 - tba * X;
    RankOneStep st;
    st.length = len;
    st.n = n;
    st.m = m;
    st.lhs = A.norm(A.from_coords(diff), Norm::one);
    st.ratio = st.lhs / (std::pow(kappa, len) * anorm);
    double prev = rep.steps.empty() ? 0.0 : rep.steps.back().E;
    st.E = st.lhs > tol.resolution_floor ? std::max(prev, st.ratio) : prev;
    rep.steps.push_back(st);
  }
  if (rep.steps.empty()) throw input_error("rank-one collapse needs max_length >= 2");
  rep.E_k = rep.steps.back().E;
  int w = std::min<int>(window, static_cast<int>(rep.steps.size()) - 1);
  double before = rep.steps[rep.steps.size() - 1 - w].E;
  rep.relative_change = rep.E_k > 0.0 ? (rep.E_k - before) / rep.E_k : 0.0;
  rep.stabilized = static_cast<int>(rep.steps.size()) > window && rep.relative_change < 0.01;
  return rep;
}

// ---- experiment orchestration ----

struct ProcessPlan {
  long long anchor = 0;
  int length = 40;
  int n_probes = 3;
  std::vector<Element> observables;  // for the dual value; defaults to one random Hermitian element
  std::optional<double> kappa;
  int burn_in = 5;
  bool gamma = true;
  bool phi = true;
  bool rank_one = true;
  int tail = 40;
  ProcessOptions options;
};

struct ProcessRow {
  std::string run_id;
  Direction direction = Direction::gamma_right;
  int length = 0;
  double c_lower = 0.0, c_upper = 1.0;
  double spread_l1 = std::numeric_limits<double>::quiet_NaN();
  double residual_inf = std::numeric_limits<double>::quiet_NaN();
  bool nu_hit = false;
  double log_norm_accum = 0.0;
};

struct ProcessSummary {
  double C = std::numeric_limits<double>::quiet_NaN();
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
  bool exact_zero = false;
  double C_dual = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double D = std::numeric_limits<double>::quiet_NaN();
  int nu = -1;
  int nu_optimistic = -1;
  double E_k = std::numeric_limits<double>::quiet_NaN();
  bool E_stabilized = false;
  double equivariance_residual = std::numeric_limits<double>::quiet_NaN();
  double final_quantity_sup = std::numeric_limits<double>::quiet_NaN();
  double spread_slope = std::numeric_limits<double>::quiet_NaN();
  bool spread_bound_ok = true;
  bool dual_bound_ok = true;
  std::vector<std::string> flags;
};

struct ProcessRun {
  std::string run_id;
  std::optional<ProcessRecord> gamma;
  std::optional<ProcessRecord> phi;
  std::optional<LimitStateEstimate> limit;
  std::optional<RankOneReport> rank_one;
  std::vector<ProcessRow> rows;
  ProcessSummary summary;
};

namespace detail {
inline double log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  double n = static_cast<double>(xs.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxy / sxx;
}

inline std::vector<State> make_probes(const TracialAlgebra& A, int n, Stream rng) {
  std::vector<State> probes;
  for (int i = 0; i < n; ++i) {
    StateKind kind = i % 3 == 0 ? StateKind::full : (i % 3 == 1 ? StateKind::pure : StateKind::boundary);
    probes.push_back(A.random_state(kind, rng));
  }
  return probes;
}
}  // namespace detail

/// Runs both directions of the process for one omega and collects the
/// per-length diagnostics. seed drives the probes and the estimators.
inline ProcessRun run_experiment(const ChannelSource& src, const ProcessPlan& plan, std::uint64_t seed, const std::string& run_id = "0") {
  if (plan.length < 1) throw input_error("process plan length must be >= 1");
  const TracialAlgebra& A = src.algebra();
  const Tolerances& tol = plan.options.tol;
  ProcessRun run;
  run.run_id = run_id;
  ProcessSummary& sum = run.summary;
  Stream master(seed);
  std::vector<State> probes = detail::make_probes(A, std::max(2, plan.n_probes), master.substream("probes"));
  std::vector<Element> observables = plan.observables;
  if (observables.empty()) {
    Stream orng = master.substream("observables");
    observables.push_back(A.random_hermitian(orng));
  }
  std::uint64_t est_seed = master.substream("sampling").key();

  if (plan.gamma) {
    ProcessRecord r = begin_process(Direction::gamma_right, A, plan.anchor, derive_key(est_seed, 1));
    std::vector<double> sx, sy;
    double fq = 0.0;
    while (r.length() < plan.length && !r.collapsed) {
      extend_process(r, src.at(next_index(r)), plan.options);
      ProcessRow row;
      row.run_id = run_id;
      row.direction = Direction::gamma_right;
      row.length = r.length();
      row.c_lower = r.c_lower();
      row.c_upper = r.c_upper();
      LimitStateEstimate L = limit_state_estimate(r, probes, tol);
      row.spread_l1 = L.spread;
      if (L.spread > 2.0 * r.c_upper() + 1e-12) sum.spread_bound_ok = false;
      if (L.spread > 1e-13) {
        sx.push_back(row.length);
        sy.push_back(std::log(L.spread));
      }
      row.nu_hit = r.c_trace.back().certified;
      row.log_norm_accum = r.log_scale;
      run.rows.push_back(row);
      fq = std::max(fq, final_theorem_quantity(r));
      run.limit = L;
    }
    // rows computed before later entries may have raised the lower envelope
    for (auto& row : run.rows)
      if (row.direction == Direction::gamma_right) row.c_lower = r.c_trace[row.length - 1].lower;
    sum.final_quantity_sup = fq;
    if (!std::isfinite(fq)) sum.flags.push_back("final_theorem_quantity_unbounded");
    std::vector<double> tx, ty;
    for (std::size_t i = 0; i < sx.size(); ++i)
      if (sx[i] > plan.burn_in) {
        tx.push_back(sx[i]);
        ty.push_back(sy[i]);
      }
    sum.spread_slope = detail::log_slope(tx, ty);
    sum.nu = r.nu;
    sum.nu_optimistic = r.nu_optimistic;
    if (r.nu < 0) sum.flags.push_back("no_certified_contraction");
    try {
      RateFit f = estimate_rate_C(r, plan.burn_in, plan.options.collapse_tol, tol);
      sum.C = f.C;
      sum.fit_r2 = f.fit_r2;
      sum.exact_zero = f.exact_zero;
    } catch (const Error& e) {
      sum.flags.push_back(std::string("rate: ") + e.what());
    }
    if (plan.kappa) {
      sum.kappa = *plan.kappa;
    } else if (std::isfinite(sum.C)) {
      sum.kappa = choose_kappa(sum.C);
    }
    if (std::isfinite(sum.kappa)) sum.D = prefactor_D(r.c_trace, sum.kappa, tol);

    if (r.nu >= 0) {
      // X_{n+1} from an independent probe, against gamma_{n+1}.X_n
      Vec x2 = A.to_coords(probes[1].element);
      Vec Xn1 = detail::apply_range(src, r.m, r.n + 1, x2);
      Vec pushed = src.at(r.n + 1).matrix() * A.to_coords(run.limit->X.element);
      try {
        Xn1 = detail::normalize_coords(A, Xn1);
        pushed = detail::normalize_coords(A, pushed);
        sum.equivariance_residual = A.norm(A.from_coords(pushed - Xn1), Norm::one);
      } catch (const Error& e) {
        sum.flags.push_back(std::string("equivariance: ") + e.what());
      }
    }
    run.gamma = std::move(r);
  }

  if (plan.phi) {
    ProcessRecord r = begin_process(Direction::phi_left, A, plan.anchor, derive_key(est_seed, 2));
    while (r.length() < plan.length && !r.collapsed) {
      extend_process(r, predual(src.at(next_index(r)), tol), plan.options);
      ProcessRow row;
      row.run_id = run_id;
      row.direction = Direction::phi_left;
      row.length = r.length();
      row.c_lower = r.c_lower();
      row.c_upper = r.c_upper();
      try {
        double res = 0.0;
        for (const auto& a : observables) {
          DualValue v = dual_normalized_value(r, a, tol);
          res = std::max(res, v.residual_inf);
          if (v.residual_inf > v.bound + 1e-10 * std::max(1.0, A.norm(a, Norm::inf))) sum.dual_bound_ok = false;
        }
        row.residual_inf = res;
      } catch (const Error&) {
        if (std::find(sum.flags.begin(), sum.flags.end(), "phi_unit_not_invertible") == sum.flags.end())
          sum.flags.push_back("phi_unit_not_invertible");
      }
      row.nu_hit = r.c_trace.back().certified;
      row.log_norm_accum = r.log_scale;
      run.rows.push_back(row);
    }
    for (auto& row : run.rows)
      if (row.direction == Direction::phi_left) row.c_lower = r.c_trace[row.length - 1].lower;
    try {
      sum.C_dual = estimate_rate_C(r, plan.burn_in, plan.options.collapse_tol, tol).C;
    } catch (const Error&) {
    }
    run.phi = std::move(r);
  }

  if (plan.rank_one && std::isfinite(sum.kappa) && sum.kappa > 0.0 && sum.kappa < 1.0) {
    run.rank_one = rank_one_collapse(src, plan.anchor, observables.front(), std::max(2, plan.length), sum.kappa, plan.tail, 20, tol);
    sum.E_k = run.rank_one->E_k;
    sum.E_stabilized = run.rank_one->stabilized;
  }
  return run;
}

// ---- CSV ----

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* process_csv_header() {
  return "run_id,direction,length,c_lower,c_upper,spread_l1,residual_inf,nu_hit,log_norm_accum\n";
}

inline std::string process_csv_row(const ProcessRow& r) {
  std::string s = r.run_id + "," + direction_name(r.direction) + "," + std::to_string(r.length) + "," + format_double(r.c_lower) + "," +
                  format_double(r.c_upper) + "," + format_double(r.spread_l1) + "," + format_double(r.residual_inf) + "," +
                  (r.nu_hit ? "1" : "0") + "," + format_double(r.log_norm_accum) + "\n";
  return s;
}

}  // namespace hennion
