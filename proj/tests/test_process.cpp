// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "hennion/parallel.hpp"
#include "hennion/process.hpp"

using namespace hennion;

namespace {

double depolarizing_closed_form(double eps, int k) {
  double l = std::pow(1.0 - eps, k);
  return 2.0 * l / (2.0 * l + (1.0 - l) * (1.0 - l));
}

ProcessPlan plan_of(int length) {
  ProcessPlan p;
  p.length = length;
  return p;
}

}  // namespace

TEST(Process, DepolarizingTraceMatchesClosedForm) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::constant(), ChannelEnsemble::fixed(depolarizing(A, 0.5)));
  ProcessRecord r = begin_process(Direction::gamma_right, A, 0, 1);
  grow_process(r, src, 40);
  for (const auto& e : r.c_trace) {
    double c = depolarizing_closed_form(0.5, e.length);
    EXPECT_LE(e.lower, c * (1.0 + 1e-9) + 1e-15);
    EXPECT_GE(e.upper, c * (1.0 - 1e-9));
    if (c > 1e-10) EXPECT_NEAR(e.lower / c, 1.0, 1e-3);
  }
  EXPECT_EQ(r.nu, 0);
  RateFit f = estimate_rate_C(r);
  EXPECT_NEAR(f.C, 0.5, 1e-3);
}

TEST(Process, ReplacementCollapsesInOneStep) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::constant(), ChannelEnsemble::fixed(replacement(A, A.diagonal({{1.5, 0.5}}))));
  ProcessRun run = run_experiment(src, plan_of(40), 3);
  EXPECT_TRUE(run.summary.exact_zero);
  EXPECT_EQ(run.summary.C, 0.0);
  EXPECT_EQ(run.summary.nu, 0);
  int gamma_rows = 0;
  for (const auto& row : run.rows) gamma_rows += row.direction == Direction::gamma_right;
  EXPECT_EQ(gamma_rows, 1);
}

TEST(Process, ShiftedSourceReindexes) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::iid_shift(77), ChannelEnsemble::random_kraus(A, 2, 0.1));
  for (long long k : {1, 2, 5})
    for (long long n : {-3, 0, 4}) EXPECT_LT((src.shifted(k).at(n).matrix() - src.at(n + k).matrix()).norm(), 1e-15);
}

TEST(Process, RotationDriverIsQuasiPeriodic) {
  ErgodicDriver d = ErgodicDriver::rotation(0.25 + 1e-9, 0.1);
  EXPECT_NEAR(d.point_at(4).phase, 0.1, 1e-7);
  EXPECT_THROW(ErgodicDriver::rotation(2.0, 0.1), Error);
}

TEST(Process, TheoremACollapseOnRandomKraus) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::iid_shift(31), ChannelEnsemble::random_kraus(A, 2, 0.1));
  ProcessPlan p = plan_of(50);
  p.rank_one = false;
  ProcessRun run = run_experiment(src, p, 32);
  EXPECT_TRUE(run.summary.spread_bound_ok);
  EXPECT_TRUE(run.summary.dual_bound_ok);
  EXPECT_LE(run.summary.equivariance_residual, 1e-6);
  EXPECT_NEAR(run.summary.spread_slope, std::log(run.summary.C), 0.05);
  EXPECT_NEAR(run.summary.C, run.summary.C_dual, 0.05);
}

TEST(Process, KappaAndPrefactor) {
  EXPECT_NEAR(choose_kappa(0.5), 0.55, 1e-15);
  EXPECT_LT(choose_kappa(0.97), 1.0);
  std::vector<TraceEntry> t(3);
  for (int i = 0; i < 3; ++i) {
    t[i].length = i + 1;
    t[i].upper = std::pow(0.5, i + 1);
  }
  EXPECT_NEAR(prefactor_D(t, 0.5), 1.0, 1e-12);
  EXPECT_NEAR(prefactor_D(t, 0.25), std::pow(2.0, 3), 1e-9);
}

TEST(Process, RunIsDeterministic) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto ens = std::make_shared<const ChannelEnsemble>(ChannelEnsemble::random_kraus(A, 2, 0.2));
  ProcessRun a = run_experiment(ChannelSource(ErgodicDriver::iid_shift(5), ens), plan_of(15), 9);
  ProcessRun b = run_experiment(ChannelSource(ErgodicDriver::iid_shift(5), ens), plan_of(15), 9);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(process_csv_row(a.rows[i]), process_csv_row(b.rows[i]));
}

TEST(Process, DualValueNeedsInvertibleUnit) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ProcessRecord r = begin_process(Direction::phi_left, A, 0);
  r.composed = replacement(A, A.diagonal({{2.0, 0.0}}));
  r.c_trace.push_back(TraceEntry{});
  EXPECT_THROW(dual_normalized_value(r, A.identity()), Error);
}

TEST(Parallel, OrderedResultsAndErrorPropagation) {
  std::vector<int> out = parallel_map<int>(50, [](int i) { return i * i; }, 4);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(out[i], i * i);
  EXPECT_THROW(parallel_map<int>(10, [](int i) -> int { if (i == 7) throw input_error("boom"); return i; }, 3), Error);
}

TEST(Parallel, WorkerCountFromEnvironment) {
  ::setenv("HENNION_LAB_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  ::setenv("HENNION_LAB_THREADS", "zero", 1);
  EXPECT_THROW(worker_count(), Error);
  ::unsetenv("HENNION_LAB_THREADS");
  EXPECT_GE(worker_count(), 1);
}
