// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hennion {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Numerical thresholds shared by every module. Passed explicitly.
struct Tolerances {
  double pos_tol = 1e-9;
  double rank_tol = 1e-12;     // relative to the largest eigenvalue
  double herm_tol = 1e-10;
  double support_tol = 1e-8;
  double kernel_tol = 1e-12;
  double state_equal_tol = 1e-8;
  double trace_tol = 1e-10;
  double fixed_point_tol = 1e-12;
  int fixed_point_max_iter = 200000;
  double mproduct_floor = 1e-15;
  double resolution_floor = 1e-12;
  double flag_tol = 1e-10;
  double choi_tol = 1e-9;
};

enum class ErrorKind { input = 2, math_domain = 3, hypothesis = 4, internal = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error input_error(const std::string& what) { return {ErrorKind::input, what}; }
inline Error domain_error(const std::string& what) { return {ErrorKind::math_domain, what}; }
inline Error hypothesis_error(const std::string& what) { return {ErrorKind::hypothesis, what}; }
inline Error internal_error(const std::string& what) { return {ErrorKind::internal, what}; }

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::input: return "input";
    case ErrorKind::math_domain: return "math_domain";
    case ErrorKind::hypothesis: return "hypothesis_violation";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

}  // namespace hennion
