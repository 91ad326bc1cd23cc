// SPDX-License-Identifier: Apache-2.0
// The Hennion metric on M_2 with the normalized trace: m-quantities,
// the line decomposition, and the two components of the state space.
#include <cstdio>

#include "hennion/metric.hpp"

using namespace hennion;

int main() {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  Element x = A.diagonal({{1.5, 0.5}});
  Element y = A.diagonal({{0.5, 1.5}});
  DistanceReport r = hennion_distance_report(A, x, y);
  LineDecomposition L = line_decomposition(A, x, y);
  std::printf("m(x,y) = %.6f  m(y,x) = %.6f  d = %.6f\n", r.m_xy, r.m_yx, r.d);
  std::printf("t+ = %.6f  t- = %.6f  d from line = %.6f\n", L.t_plus, L.t_minus, L.distance());

  for (double eta : {0.5, 0.25, 0.1, 0.01}) {
    Element X = A.diagonal({{2.0 / (1.0 + eta), 2.0 * eta / (1.0 + eta)}});
    Element P = A.diagonal({{2.0, 0.0}});
    std::printf("eta = %-5g  d(X_eta, X_0.5) = %.6f  d(X_eta, P) = %.1f\n", eta,
                hennion_distance(A, X, A.diagonal({{4.0 / 3.0, 2.0 / 3.0}})), hennion_distance(A, X, P));
  }

  Stream rng(1);
  State s = A.random_state(StateKind::pure, rng);
  State f = A.random_state(StateKind::full, rng);
  std::printf("pure vs full: %s\n", verdict_name(classify_component(A, s, f)));
  return 0;
}
