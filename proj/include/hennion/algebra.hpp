// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "hennion/core.hpp"
#include "hennion/rng.hpp"

namespace hennion {

/// Block-diagonal element of a multimatrix algebra.
struct Element {
  std::vector<Mat> blocks;

  int num_blocks() const { return static_cast<int>(blocks.size()); }

  Element& operator+=(const Element& o) {
    same_shape(o);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] += o.blocks[i];
    return *this;
  }
  Element& operator-=(const Element& o) {
    same_shape(o);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] -= o.blocks[i];
    return *this;
  }
  Element& operator*=(cplx s) {
    for (auto& b : blocks) b *= s;
    return *this;
  }

  void same_shape(const Element& o) const {
    bool ok = blocks.size() == o.blocks.size();
    for (std::size_t i = 0; ok && i < blocks.size(); ++i)
      ok = blocks[i].rows() == o.blocks[i].rows() && blocks[i].cols() == o.blocks[i].cols();
    if (!ok) throw input_error("element shape mismatch");
  }
};

inline Element operator+(Element a, const Element& b) { return a += b; }
inline Element operator-(Element a, const Element& b) { return a -= b; }
inline Element operator*(cplx s, Element a) { return a *= s; }
inline Element operator*(double s, Element a) { return a *= cplx(s, 0.0); }
inline Element operator*(const Element& a, const Element& b) {
  a.same_shape(b);
  Element r;
  r.blocks.reserve(a.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) r.blocks.push_back(a.blocks[i] * b.blocks[i]);
  return r;
}
inline Element adjoint(const Element& a) {
  Element r;
  r.blocks.reserve(a.blocks.size());
  for (const auto& b : a.blocks) r.blocks.push_back(b.adjoint());
  return r;
}

enum class Norm { one, two, inf };

enum class Component { invertible, singular };

inline const char* component_name(Component c) {
  return c == Component::invertible ? "invertible" : "singular";
}

/// Positive trace-one element together with its spectral summary.
struct State {
  Element element;
  double min_eigenvalue = 0.0;
  Component component = Component::singular;

  operator const Element&() const { return element; }
};

struct PositivityReport {
  bool positive = true;
  double min_eigenvalue = 0.0;
  int block = -1;
  Vec eigenvector;
};

enum class StateKind { pure, ranked, full, boundary };

/// Finite-dimensional tracial algebra: direct sum of full matrix blocks
/// with trace tau = sum_i c_i Tr_i and tau(1) = 1.
class TracialAlgebra {
 public:
  TracialAlgebra() = default;

  TracialAlgebra(std::vector<int> dims, std::vector<double> weights)
      : dims_(std::move(dims)), weights_(std::move(weights)) {
    if (dims_.empty()) throw input_error("algebra needs at least one block");
    if (dims_.size() != weights_.size()) throw input_error("dims and weights differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i] <= 0) throw input_error("block dimension must be positive");
      if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) throw input_error("trace weight must be positive");
      total += weights_[i] * dims_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw input_error("trace weights do not give tau(1) = 1");
    offsets_.resize(dims_.size() + 1, 0);
    for (std::size_t i = 0; i < dims_.size(); ++i) offsets_[i + 1] = offsets_[i] + dims_[i] * dims_[i];
  }

  /// Rescales raw weights so that tau(1) = 1.
  static TracialAlgebra make(const std::vector<int>& dims, const std::vector<double>& raw_weights) {
    if (dims.empty()) throw input_error("algebra needs at least one block");
    if (dims.size() != raw_weights.size()) throw input_error("dims and weights differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] <= 0) throw input_error("block dimension must be positive");
      if (!(raw_weights[i] > 0.0) || !std::isfinite(raw_weights[i])) throw input_error("trace weight must be positive");
      total += raw_weights[i] * dims[i];
    }
    std::vector<double> w(raw_weights);
    for (auto& c : w) c /= total;
    return TracialAlgebra(dims, w);
  }

  /// Single block M_n with the normalized trace.
  static TracialAlgebra matrix(int n) { return make({n}, {1.0}); }

  const std::vector<int>& dims() const { return dims_; }
  const std::vector<double>& weights() const { return weights_; }
  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[i]; }
  double weight(int i) const { return weights_[i]; }
  int coord_dim() const { return offsets_.back(); }
  int block_offset(int i) const { return offsets_[i]; }
  int max_block_dim() const { return *std::max_element(dims_.begin(), dims_.end()); }

  bool operator==(const TracialAlgebra& o) const {
    if (dims_ != o.dims_) return false;
    for (std::size_t i = 0; i < weights_.size(); ++i)
      if (std::abs(weights_[i] - o.weights_[i]) > 1e-14) return false;
    return true;
  }
  bool operator!=(const TracialAlgebra& o) const { return !(*this == o); }

  std::string describe() const {
    std::ostringstream os;
    os << "dims [";
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << "] weights [";
    for (std::size_t i = 0; i < weights_.size(); ++i) os << (i ? "," : "") << weights_[i];
    os << "]";
    return os.str();
  }

  Element zero() const {
    Element x;
    for (int n : dims_) x.blocks.push_back(Mat::Zero(n, n));
    return x;
  }
  Element identity() const {
    Element x;
    for (int n : dims_) x.blocks.push_back(Mat::Identity(n, n));
    return x;
  }
  Element embed(int block, const Mat& m) const {
    Element x = zero();
    if (m.rows() != dims_[block] || m.cols() != dims_[block]) throw input_error("block shape mismatch");
    x.blocks[block] = m;
    return x;
  }
  Element diagonal(const std::vector<std::vector<double>>& diags) const {
    Element x = zero();
    if (diags.size() != dims_.size()) throw input_error("diagonal block count mismatch");
    for (std::size_t i = 0; i < diags.size(); ++i) {
      if (static_cast<int>(diags[i].size()) != dims_[i]) throw input_error("diagonal length mismatch");
      for (int j = 0; j < dims_[i]; ++j) x.blocks[i](j, j) = diags[i][j];
    }
    return x;
  }

  void check(const Element& x) const {
    bool ok = static_cast<int>(x.blocks.size()) == num_blocks();
    for (int i = 0; ok && i < num_blocks(); ++i)
      ok = x.blocks[i].rows() == dims_[i] && x.blocks[i].cols() == dims_[i];
    if (!ok) throw input_error("element does not belong to algebra " + describe());
  }

  cplx trace(const Element& x) const {
    check(x);
    cplx t = 0.0;
    for (int i = 0; i < num_blocks(); ++i) t += weights_[i] * x.blocks[i].trace();
    return t;
  }
  double rtrace(const Element& x) const { return trace(x).real(); }

  /// tau(x y)
  cplx pairing(const Element& x, const Element& y) const {
    check(x);
    check(y);
    cplx t = 0.0;
    for (int i = 0; i < num_blocks(); ++i)
      t += weights_[i] * (x.blocks[i].transpose().cwiseProduct(y.blocks[i])).sum();
    return t;
  }

  double norm(const Element& x, Norm which) const {
    check(x);
    double r = 0.0;
    for (int i = 0; i < num_blocks(); ++i) {
      switch (which) {
        case Norm::one: {
          Eigen::JacobiSVD<Mat> svd(x.blocks[i]);
          r += weights_[i] * svd.singularValues().sum();
          break;
        }
        case Norm::two:
          r += weights_[i] * x.blocks[i].squaredNorm();
          break;
        case Norm::inf: {
          Eigen::JacobiSVD<Mat> svd(x.blocks[i]);
          if (svd.singularValues().size() > 0) r = std::max(r, svd.singularValues()(0));
          break;
        }
      }
    }
    return which == Norm::two ? std::sqrt(r) : r;
  }

  double max_abs_entry(const Element& x) const {
    double m = 0.0;
    for (const auto& b : x.blocks) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
  }

  double asymmetry(const Element& x) const {
    check(x);
    double a = 0.0;
    for (const auto& b : x.blocks) a = std::max(a, (b - b.adjoint()).cwiseAbs().maxCoeff());
    return a;
  }

  /// Returns (x + x*)/2, rejecting inputs whose skew part exceeds herm_tol
  /// relative to the entry scale.
  Element hermitian(const Element& x, double herm_tol = 1e-10) const {
    double scale = std::max(1.0, max_abs_entry(x));
    if (asymmetry(x) > herm_tol * scale) throw input_error("element is not Hermitian");
    Element h;
    for (const auto& b : x.blocks) h.blocks.push_back(0.5 * (b + b.adjoint()));
    return h;
  }

  /// Eigen-decomposition of each block of a Hermitian element.
  std::vector<Eigen::SelfAdjointEigenSolver<Mat>> spectra(const Element& x) const {
    check(x);
    std::vector<Eigen::SelfAdjointEigenSolver<Mat>> out;
    out.reserve(x.blocks.size());
    for (const auto& b : x.blocks) out.emplace_back(Mat(0.5 * (b + b.adjoint())));
    return out;
  }

  double max_eigenvalue(const Element& x) const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : spectra(x)) m = std::max(m, s.eigenvalues().maxCoeff());
    return m;
  }
  double min_eigenvalue(const Element& x) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : spectra(x)) m = std::min(m, s.eigenvalues().minCoeff());
    return m;
  }

  PositivityReport is_positive(const Element& x, double tol, double herm_tol = 1e-10) const {
    double scale = std::max(1.0, max_abs_entry(x));
    if (asymmetry(x) > herm_tol * scale) throw input_error("positivity test on non-Hermitian element");
    PositivityReport rep;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    auto sp = spectra(x);
    for (int i = 0; i < num_blocks(); ++i) {
      const auto& ev = sp[i].eigenvalues();
      if (ev(0) < rep.min_eigenvalue) {
        rep.min_eigenvalue = ev(0);
        rep.block = i;
        rep.eigenvector = sp[i].eigenvectors().col(0);
      }
    }
    rep.positive = rep.min_eigenvalue >= -tol;
    return rep;
  }

  /// Projection onto eigenvectors with eigenvalue > rank_tol * lambda_max.
  Element support_projection(const Element& x, double rank_tol = 1e-12) const {
    auto sp = spectra(x);
    double lmax = 0.0;
    for (const auto& s : sp) lmax = std::max(lmax, s.eigenvalues().maxCoeff());
    Element p = zero();
    if (lmax <= 0.0) return p;
    for (int i = 0; i < num_blocks(); ++i) {
      const auto& ev = sp[i].eigenvalues();
      for (int j = 0; j < ev.size(); ++j)
        if (ev(j) > rank_tol * lmax) {
          Vec v = sp[i].eigenvectors().col(j);
          p.blocks[i] += v * v.adjoint();
        }
    }
    return p;
  }

  // Coordinates in the tau-orthonormal Hermitian basis. Per block: the
  // diagonal units, then for each pair j < k the symmetric and the
  // antisymmetric Gell-Mann elements, all scaled by 1/sqrt(c_i).

  Vec to_coords(const Element& x) const {
    check(x);
    Vec v(coord_dim());
    for (int i = 0; i < num_blocks(); ++i) {
      const Mat& b = x.blocks[i];
      int n = dims_[i];
      int o = offsets_[i];
      double sc = std::sqrt(weights_[i]);
      double sh = std::sqrt(weights_[i] / 2.0);
      for (int j = 0; j < n; ++j) v(o++) = sc * b(j, j);
      for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          v(o++) = sh * (b(j, k) + b(k, j));
          v(o++) = cplx(0.0, 1.0) * sh * (b(k, j) - b(j, k));
        }
    }
    return v;
  }

  Element from_coords(const Vec& v) const {
    if (v.size() != coord_dim()) throw input_error("coordinate vector length mismatch");
    Element x = zero();
    const cplx I(0.0, 1.0);
    for (int i = 0; i < num_blocks(); ++i) {
      Mat& b = x.blocks[i];
      int n = dims_[i];
      int o = offsets_[i];
      double sc = 1.0 / std::sqrt(weights_[i]);
      double sh = 1.0 / std::sqrt(2.0 * weights_[i]);
      for (int j = 0; j < n; ++j) b(j, j) = sc * v(o++);
      for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          cplx s = v(o++);
          cplx a = v(o++);
          b(j, k) += sh * (s + I * a);
          b(k, j) += sh * (s - I * a);
        }
    }
    return x;
  }

  Vec identity_coords() const { return to_coords(identity()); }

  Element basis_element(int k) const {
    Vec e = Vec::Zero(coord_dim());
    e(k) = 1.0;
    return from_coords(e);
  }

  /// Validates and tags a state; symmetrizes tiny skew parts.
  State make_state(const Element& x, const Tolerances& tol = {}) const {
    Element h = hermitian(x, tol.herm_tol);
    double t = rtrace(h);
    if (std::abs(t - 1.0) > tol.trace_tol) throw input_error("state must have unit trace");
    return tag_state(std::move(h), tol);
  }

  /// Divides a non-zero positive element by its trace and tags it.
  State normalize(const Element& x, const Tolerances& tol = {}) const {
    Element h = hermitian(x, tol.herm_tol);
    double t = rtrace(h);
    if (!(t > 0.0)) throw domain_error("cannot normalize an element with non-positive trace");
    h *= cplx(1.0 / t, 0.0);
    return tag_state(std::move(h), tol);
  }

  State random_state(StateKind kind, Stream& rng, int rank = 1) const {
    switch (kind) {
      case StateKind::pure: {
        int b = rng.index(num_blocks());
        Vec v = rng.gaussian_vector(dims_[b]);
        return normalize(embed(b, v * v.adjoint()));
      }
      case StateKind::ranked: {
        if (rank < 1 || rank > max_block_dim()) throw input_error("rank exceeds largest block");
        std::vector<int> eligible;
        for (int i = 0; i < num_blocks(); ++i)
          if (dims_[i] >= rank) eligible.push_back(i);
        int b = eligible[rng.index(static_cast<int>(eligible.size()))];
        Mat g = rng.gaussian_matrix(dims_[b], rank);
        return normalize(embed(b, g * g.adjoint()));
      }
      case StateKind::full: return normalize(random_full(rng));
      case StateKind::boundary: {
        Element x = random_full(rng);
        int b = rng.index(num_blocks());
        Eigen::SelfAdjointEigenSolver<Mat> es(x.blocks[b]);
        RVec ev = es.eigenvalues();
        ev(0) = 0.0;
        x.blocks[b] = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
        return normalize(x);
      }
    }
    throw internal_error("unknown state kind");
  }

  /// Random positive element; full rank when requested, rank one otherwise.
  Element random_psd(Stream& rng, bool full_rank) const {
    if (full_rank) return random_full(rng);
    int b = rng.index(num_blocks());
    Vec v = rng.gaussian_vector(dims_[b]);
    return embed(b, v * v.adjoint());
  }

  Element random_hermitian(Stream& rng) const {
    Element x = zero();
    for (int i = 0; i < num_blocks(); ++i) {
      Mat g = rng.gaussian_matrix(dims_[i], dims_[i]);
      x.blocks[i] = 0.5 * (g + g.adjoint());
    }
    return x;
  }

  Element random_element(Stream& rng) const {
    Element x = zero();
    for (int i = 0; i < num_blocks(); ++i) x.blocks[i] = rng.gaussian_matrix(dims_[i], dims_[i]);
    return x;
  }

 private:
  Element random_full(Stream& rng) const {
    Element x = zero();
    for (int i = 0; i < num_blocks(); ++i) {
      Mat g = rng.gaussian_matrix(dims_[i], dims_[i]);
      x.blocks[i] = g.adjoint() * g + 1e-3 * Mat::Identity(dims_[i], dims_[i]);
    }
    return x;
  }

  State tag_state(Element h, const Tolerances& tol) const {
    auto sp = spectra(h);
    double lmin = std::numeric_limits<double>::infinity();
    double lmax = 0.0;
    for (const auto& s : sp) {
      lmin = std::min(lmin, s.eigenvalues().minCoeff());
      lmax = std::max(lmax, s.eigenvalues().maxCoeff());
    }
    if (lmin < -tol.pos_tol) throw input_error("state is not positive");
    State s;
    s.element = std::move(h);
    s.min_eigenvalue = lmin;
    s.component = lmin > tol.rank_tol * lmax ? Component::invertible : Component::singular;
    return s;
  }

  std::vector<int> dims_;
  std::vector<double> weights_;
  std::vector<int> offsets_{0};
};

}  // namespace hennion
