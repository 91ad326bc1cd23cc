// SPDX-License-Identifier: Apache-2.0
// Constant depolarizing process: the contraction of Gamma_{n,m} against the
// closed form, and the fitted Kingman rate.
#include <cmath>
#include <cstdio>

#include "hennion/process.hpp"

using namespace hennion;

int main() {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  const double eps = 0.5;
  ChannelSource src(ErgodicDriver::constant(), ChannelEnsemble::fixed(depolarizing(A, eps)));
  ProcessRecord r = begin_process(Direction::gamma_right, A, 0, 11);
  grow_process(r, src, 30);
  std::printf("%6s %12s %12s %12s\n", "length", "lower", "upper", "closed form");
  for (const auto& e : r.c_trace) {
    double l = std::pow(1.0 - eps, e.length);
    double exact = 2.0 * l / (2.0 * l + (1.0 - l) * (1.0 - l));
    if (e.length % 5 == 0 || e.length <= 3) std::printf("%6d %12.4e %12.4e %12.4e\n", e.length, e.lower, e.upper, exact);
  }
  RateFit f = estimate_rate_C(r);
  std::printf("C = %.6f (r2 %.6f), nu = %d\n", f.C, f.fit_r2, r.nu);
  return 0;
}
