// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/QR>
#include <boost/math/distributions/chi_squared.hpp>

#include "hennion/experiment.hpp"

namespace hennion {

struct CheckResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Check {
  std::string id;
  std::string name;
  std::function<CheckResult()> run;
};

namespace suite {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline CheckResult result(bool pass, std::string detail) {
  CheckResult r;
  r.pass = pass;
  r.detail = std::move(detail);
  return r;
}

inline CheckResult timed(const Check& c) {
  auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = c.run();
  } catch (const std::exception& e) {
    r = result(false, std::string("exception: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.id = c.id;
  r.name = c.name;
  return r;
}

inline std::vector<TracialAlgebra> metric_algebras() {
  return {TracialAlgebra::matrix(2), TracialAlgebra::matrix(3), TracialAlgebra({2, 2}, {0.125, 0.375})};
}

inline Mat random_unitary(Stream& rng, int n) {
  Eigen::HouseholderQR<Mat> qr(rng.gaussian_matrix(n, n));
  return qr.householderQ() * Mat::Identity(n, n);
}

/// Convex mixture of random unitary conjugations and the depolarizing
/// channel; unital and tracial.
inline SuperOperator random_unital_tracial(const TracialAlgebra& A, Stream& rng, int terms, double dep) {
  std::vector<double> p(terms);
  double total = 0.0;
  for (auto& x : p) total += (x = rng.uniform() + 0.1);
  std::vector<Element> ops;
  for (int k = 0; k < terms; ++k) {
    Element e = A.zero();
    for (int b = 0; b < A.num_blocks(); ++b) e.blocks[b] = std::sqrt(p[k] / total) * random_unitary(rng, A.dim(b));
    ops.push_back(e);
  }
  return mix(from_kraus(A, ops), replacement(A, A.identity()), dep);
}

inline SuperOperator random_channel(const TracialAlgebra& A, std::uint64_t seed, int k, double eps) {
  ChannelEnsemble e = ChannelEnsemble::random_kraus(A, k, eps);
  return e.channel_at(DriverPoint{0, seed, 0.5});
}

inline double closed_form_depolarizing(double eps, int k) {
  double l = std::pow(1.0 - eps, k);
  return 2.0 * l / (2.0 * l + (1.0 - l) * (1.0 - l));
}

/// tau(predual(S)(x) a) = tau(x S(a)) on random elements.
inline double pairing_defect(const std::function<SuperOperator(const SuperOperator&)>& predual_fn, int n_maps, Stream rng) {
  double worst = 0.0;
  for (int i = 0; i < n_maps; ++i) {
    TracialAlgebra A = metric_algebras()[i % 3];
    SuperOperator S = random_channel(A, rng(), 2, 0.1 * rng.uniform());
    SuperOperator P = predual_fn(S);
    for (int t = 0; t < 5; ++t) {
      Element x = A.random_element(rng), a = A.random_element(rng);
      worst = std::max(worst, std::abs(A.trace(P.apply(x) * a) - A.trace(x * S.apply(a))));
    }
  }
  return worst;
}

inline CheckResult check_pairing_identity(const std::function<SuperOperator(const SuperOperator&)>& predual_fn, int n_maps = 20) {
  double worst = pairing_defect(predual_fn, n_maps, Stream(0x9a11));
  return result(worst <= 1e-10, "max defect " + fmt(worst));
}

inline std::vector<bool> byte_compare(const std::filesystem::path& a, const std::filesystem::path& b, std::string& detail) {
  std::vector<bool> same;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    auto rel = std::filesystem::relative(e.path(), a);
    auto read = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    bool eq = std::filesystem::exists(b / rel) && read(e.path()) == read(b / rel);
    if (!eq) detail += rel.string() + " differs; ";
    same.push_back(eq);
  }
  return same;
}

// ---- acceptance criteria ----

inline CheckResult m_oracles(int pairs) {
  double worst_bis = 0.0, worst_samp = 0.0;
  Stream rng(101);
  const StateKind kinds[] = {StateKind::full, StateKind::full, StateKind::boundary, StateKind::pure};
  for (const auto& A : metric_algebras()) {
    for (int i = 0; i < pairs; ++i) {
      State x = A.random_state(kinds[i % 4], rng), y = A.random_state(kinds[(i / 4) % 4], rng);
      double me = m_quantity(A, x.element, y.element).value;
      double mb = m_quantity_bisection(A, x.element, y.element).value;
      double ms = m_quantity_inf_sampling(A, x.element, y.element, 200, rng).value;
      worst_bis = std::max(worst_bis, std::abs(me - mb));
      worst_samp = std::max(worst_samp, me - ms);
    }
  }
  return result(worst_bis <= 1e-8 && worst_samp <= 1e-9,
                "max |eigen-bisection| " + fmt(worst_bis) + ", max eigen-sampling " + fmt(worst_samp));
}

inline CheckResult d_formulas(int pairs) {
  double worst = 0.0;
  Stream rng(202);
  for (int i = 0; i < pairs; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    State x = A.random_state(StateKind::full, rng), y = A.random_state(StateKind::full, rng);
    double d = hennion_distance(A, x.element, y.element);
    double dl = line_decomposition(A, x.element, y.element).distance();
    worst = std::max(worst, std::abs(d - dl));
  }
  return result(worst <= 1e-6, "max |d_m - d_line| " + fmt(worst));
}

inline CheckResult x_eta_example() {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto X = [&](double eta) { return A.diagonal({{2.0 / (1.0 + eta), 2.0 * eta / (1.0 + eta)}}); };
  Element a = X(0.5), b = X(0.25);
  double mm = m_quantity(A, a, b).value * m_quantity(A, b, a).value;
  double d = hennion_distance(A, a, b);
  return result(std::abs(mm - 0.5) <= 1e-12 && std::abs(d - 1.0 / 3.0) <= 1e-12,
                "mm - 1/2 = " + fmt(mm - 0.5) + ", d - 1/3 = " + fmt(d - 1.0 / 3.0));
}

inline CheckResult metric_axioms(int triples) {
  Stream rng(303);
  int sym = 0, tri = 0, ident = 0, dom = 0;
  const StateKind kinds[] = {StateKind::full, StateKind::full, StateKind::full, StateKind::boundary};
  for (int i = 0; i < triples; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    State x = A.random_state(kinds[i % 4], rng), y = A.random_state(StateKind::full, rng), z = A.random_state(kinds[(i / 4) % 4], rng);
    double dxy = hennion_distance(A, x.element, y.element), dyx = hennion_distance(A, y.element, x.element);
    double dyz = hennion_distance(A, y.element, z.element), dxz = hennion_distance(A, x.element, z.element);
    sym += std::abs(dxy - dyx) > 1e-12;
    tri += dxz > dxy + dyz + 1e-9;
    ident += hennion_distance(A, x.element, x.element) > 1e-9;
    dom += 0.5 * A.norm(x.element - y.element, Norm::one) > dxy + 1e-9;
  }
  int total = sym + tri + ident + dom;
  return result(total == 0, "violations: symmetry " + std::to_string(sym) + ", triangle " + std::to_string(tri) + ", identity " +
                                std::to_string(ident) + ", domination " + std::to_string(dom));
}

inline CheckResult component_geometry(int instances) {
  Stream rng(404);
  int bad_mixed = 0, bad_inv = 0;
  for (int i = 0; i < instances; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    State x = A.random_state(StateKind::full, rng);
    State s = A.random_state(i % 2 ? StateKind::boundary : StateKind::pure, rng);
    State y = A.random_state(StateKind::full, rng);
    bad_mixed += hennion_distance(A, x.element, s.element) != 1.0 || classify_component(A, x, s) != ComponentVerdict::distance_one;
    bad_inv += !(hennion_distance(A, x.element, y.element) < 1.0) || classify_component(A, x, y) != ComponentVerdict::same_component;
  }
  return result(bad_mixed + bad_inv == 0, "mixed violations " + std::to_string(bad_mixed) + ", invertible violations " + std::to_string(bad_inv));
}

inline CheckResult contraction_anchors() {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ContractionOptions opt;
  auto rep = contraction_estimate(replacement(A, A.diagonal({{1.5, 0.5}})), opt, 1);
  auto tr = contraction_estimate(transpose_map(A), opt, 2);
  auto dep = contraction_estimate(depolarizing(A, 0.5), opt, 3);
  bool ok = rep.lower_bound == 0.0 && rep.upper_bound <= 1e-12 && tr.lower_bound >= 0.99 && dep.lower_bound >= 0.799 &&
            dep.lower_bound <= 0.8 && dep.upper_bound >= 0.8;
  return result(ok, "replacement [" + fmt(rep.lower_bound) + ", " + fmt(rep.upper_bound) + "], transpose lower " + fmt(tr.lower_bound) +
                        ", depolarizing [" + std::to_string(dep.lower_bound) + ", " + std::to_string(dep.upper_bound) + "]");
}

inline CheckResult sandwich_round_trip(int maps, int samples) {
  Stream rng(505);
  int certified = 0, violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < maps; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    SuperOperator S = [&] {
      switch (i % 5) {
        case 0: return transpose_map(A);
        case 1: return random_unital_tracial(A, rng, 2, 0.0);
        default: return random_channel(A, rng(), 1 + i % 3, 0.2 * rng.uniform());
      }
    }();
    ContractionEstimate est = contraction_estimate(S, ContractionOptions{}, rng());
    bool yes = is_strict_contraction(est) == ContractionVerdict::certified_yes;
    bool holds = true;
    Stream fresh = rng.substream(static_cast<std::uint64_t>(i));
    for (int s = 0; s < samples; ++s) {
      State x = A.random_state(s % 2 ? StateKind::pure : StateKind::full, fresh);
      double margin = est.eta > 0.0 ? sandwich_margin(S, est.fixed_point.element, est.eta, x.element) : -1.0;
      if (margin < -1e-9) holds = false;
      if (yes) worst = std::min(worst, margin);
    }
    certified += yes;
    if (yes && !holds) ++violations;
  }
  return result(violations == 0 && certified > 0,
                std::to_string(certified) + "/" + std::to_string(maps) + " certified, min margin " + fmt(worst) + ", violations " +
                    std::to_string(violations));
}

inline CheckResult duality(int maps) {
  Stream rng(606);
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < maps; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    SuperOperator S = random_unital_tracial(A, rng, 3 + i % 4, 0.3 * rng.uniform());
    auto e1 = contraction_estimate(S, ContractionOptions{}, rng());
    auto e2 = contraction_estimate(predual(S), ContractionOptions{}, rng());
    bool overlap = e1.lower_bound <= e2.upper_bound && e2.lower_bound <= e1.upper_bound;
    double md = std::abs(e1.midpoint() - e2.midpoint());
    worst = std::max(worst, md);
    bad += !overlap || md > 1e-2;
  }
  return result(bad == 0, "failures " + std::to_string(bad) + ", max midpoint difference " + fmt(worst));
}

inline CheckResult submultiplicativity(int compositions) {
  Stream rng(707);
  int bad = 0;
  double worst = -1.0;
  for (int i = 0; i < compositions; ++i) {
    const TracialAlgebra A = metric_algebras()[i % 3];
    SuperOperator a = random_channel(A, rng(), 1 + i % 3, 0.3 * rng.uniform());
    SuperOperator b = random_channel(A, rng(), 1 + (i / 3) % 3, 0.3 * rng.uniform());
    ContractionOptions opt{300, 20, 3};
    auto ea = contraction_estimate(a, opt, rng()), eb = contraction_estimate(b, opt, rng());
    auto eab = contraction_estimate(compose(a, b), opt, rng());
    double gap = eab.lower_bound - ea.upper_bound * eb.upper_bound;
    worst = std::max(worst, gap);
    bad += gap > 1e-6;
  }
  return result(bad == 0, "violations " + std::to_string(bad) + ", max lower(ab) - upper(a)upper(b) " + fmt(worst));
}

inline ProcessPlan gamma_plan(int length, bool phi = false, bool rank_one = false) {
  ProcessPlan p;
  p.length = length;
  p.phi = phi;
  p.rank_one = rank_one;
  return p;
}

inline CheckResult kingman_depolarizing() {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::constant(1), ChannelEnsemble::fixed(depolarizing(A, 0.5)));
  ProcessRun run = run_experiment(src, gamma_plan(40), 10);
  double worst = 0.0;
  for (const auto& e : run.gamma->c_trace) {
    double c = closed_form_depolarizing(0.5, e.length);
    if (c > 1e-12) worst = std::max(worst, std::abs(e.lower - c) / c);
  }
  return result(std::abs(run.summary.C - 0.5) <= 1e-3, "C " + std::to_string(run.summary.C) + ", max relative lower-vs-closed-form " + fmt(worst));
}

inline CheckResult rate_constancy(int streams) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto ens = std::make_shared<const ChannelEnsemble>(
      ChannelEnsemble::choice({depolarizing(A, 0.5), compose(transpose_map(A), depolarizing(A, 0.4))}, {0.5, 0.5}));
  std::vector<double> Cs = parallel_map<double>(streams, [&](int s) {
    ChannelSource src(ErgodicDriver::iid_shift(derive_key(1111, s)), ens);
    return run_experiment(src, gamma_plan(60), derive_key(2222, s)).summary.C;
  });
  double sd = sample_std(Cs);
  return result(sd <= 0.02, "mean C " + fmt(mean_of(Cs)) + ", sample std " + fmt(sd));
}

inline CheckResult theorem_a(int length) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::iid_shift(31), ChannelEnsemble::random_kraus(A, 2, 0.1));
  ProcessRun run = run_experiment(src, gamma_plan(length), 32);
  const ProcessSummary& s = run.summary;
  double slope_gap = std::abs(s.spread_slope - std::log(s.C));
  bool ok = s.spread_bound_ok && slope_gap <= 0.05 && s.equivariance_residual <= 1e-6;
  return result(ok, std::string("spread bound ") + (s.spread_bound_ok ? "ok" : "violated") + ", |slope - log C| " + fmt(slope_gap) +
                        ", equivariance " + fmt(s.equivariance_residual));
}

inline CheckResult theorem_b(int length) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  ChannelSource src(ErgodicDriver::iid_shift(41), ChannelEnsemble::random_kraus(A, 2, 0.1, std::nullopt, KrausNormalization::none));
  ProcessPlan plan = gamma_plan(length, true, false);
  plan.gamma = false;
  ProcessRun run = run_experiment(src, plan, 42);
  Element P1 = run.phi->composed.apply(A.identity());
  double final_res = run.rows.empty() ? 1.0 : run.rows.back().residual_inf;
  bool non_unital = A.norm((1.0 / A.rtrace(P1)) * P1 - A.identity(), Norm::inf) > 1e-6;
  bool ok = run.summary.dual_bound_ok && final_res < 1e-6 && non_unital;
  return result(ok, std::string("bound ") + (run.summary.dual_bound_ok ? "ok" : "violated") + ", residual at " + std::to_string(length) +
                        " steps " + fmt(final_res) + (non_unital ? "" : ", ensemble is unital"));
}

inline CheckResult rank_one_stabilizes(int streams) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto ens = std::make_shared<const ChannelEnsemble>(ChannelEnsemble::random_kraus(A, 2, 0.1));
  std::vector<int> ok = parallel_map<int>(streams, [&](int s) {
    ChannelSource src(ErgodicDriver::iid_shift(derive_key(5151, s)), ens);
    ProcessPlan plan = gamma_plan(60, false, true);
    return run_experiment(src, plan, derive_key(5252, s)).summary.E_stabilized ? 1 : 0;
  });
  int n = 0;
  for (int v : ok) n += v;
  return result(n == streams, std::to_string(n) + "/" + std::to_string(streams) + " streams stabilized");
}

inline CheckResult stopping_time(int streams) {
  TracialAlgebra A = TracialAlgebra::matrix(2);
  auto ens = std::make_shared<const ChannelEnsemble>(ChannelEnsemble::choice({transpose_map(A), depolarizing(A, 0.5)}, {0.5, 0.5}));
  ProcessOptions opt;
  opt.contraction = ContractionOptions{60, 10, 2};
  std::vector<int> nus = parallel_map<int>(streams, [&](int s) {
    ChannelSource src(ErgodicDriver::iid_shift(derive_key(1515, s)), ens);
    ProcessRecord r = begin_process(Direction::gamma_right, A, 0, derive_key(1616, s));
    while (r.nu < 0 && r.length() < 60) extend_process(r, src.at(next_index(r)), opt);
    return r.nu;
  });
  const int bins = 8;  // 0..6 and >= 7
  std::vector<double> obs(bins, 0.0), expct(bins, 0.0);
  int missing = 0;
  for (int nu : nus) {
    if (nu < 0) ++missing;
    else obs[std::min(nu, bins - 1)] += 1.0;
  }
  for (int k = 0; k < bins - 1; ++k) expct[k] = streams * std::pow(0.5, k + 1);
  expct[bins - 1] = streams * std::pow(0.5, bins - 1);
  double chi2 = 0.0;
  for (int k = 0; k < bins; ++k) chi2 += (obs[k] - expct[k]) * (obs[k] - expct[k]) / expct[k];
  boost::math::chi_squared dist(bins - 1);
  double p = boost::math::cdf(boost::math::complement(dist, chi2));
  return result(p > 0.01 && missing == 0, "chi2 " + fmt(chi2) + ", p " + fmt(p) + ", uncertified streams " + std::to_string(missing));
}

inline Element pauli_z(const TracialAlgebra& M) { return M.diagonal({{1.0, -1.0}}); }
inline Element pauli_x(const TracialAlgebra& M) {
  Element x = M.zero();
  x.blocks[0] << 0.0, 1.0, 1.0, 0.0;
  return x;
}

inline CheckResult fcs_clustering() {
  TracialAlgebra M = TracialAlgebra::matrix(2);
  LocalObservable a = LocalObservable::single(M, 0, pauli_z(M)), b = LocalObservable::single(M, 0, pauli_x(M) + pauli_z(M));
  std::vector<int> gaps{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  GeneratorSource prod(ErgodicDriver::iid_shift(61), GeneratorMap::product(M, M));
  DecayReport rp = clustering_experiment(prod, a, b, gaps);
  double max_prod = 0.0;
  for (const auto& r : rp.rows) max_prod = std::max(max_prod, r.corr);
  GeneratorSource kr(ErgodicDriver::iid_shift(3), GeneratorMap::kraus(M, M, 2, 0.0), ContractionOptions{200, 20, 3}, 7);
  DecayReport rk = clustering_experiment(kr, a, b, gaps);
  bool ok = max_prod < 1e-12 && rk.all_pass && std::isfinite(rk.kappa_fit) && rk.kappa_fit <= rk.kappa + 0.05;
  return result(ok, "product max corr " + fmt(max_prod) + "; kraus kappa " + fmt(rk.kappa) + ", kappa_fit " + fmt(rk.kappa_fit) +
                        ", bound " + (rk.all_pass ? "passes" : "fails") + " at all gaps");
}

inline CheckResult fcs_covariance() {
  TracialAlgebra M = TracialAlgebra::matrix(2);
  GeneratorSource src(ErgodicDriver::iid_shift(71), GeneratorMap::kraus(M, M, 2, 0.0), ContractionOptions{200, 20, 3}, 8);
  LocalObservable a = LocalObservable::product(M, 0, {pauli_z(M), pauli_x(M)});
  std::string detail;
  bool ok = true;
  for (long long k : {1, 2, 3}) {
    CovarianceCheck c = translation_covariance_check(src, a, k, 30);
    ok = ok && c.pass;
    detail += "k=" + std::to_string(k) + ": " + fmt(c.deviation) + " <= " + fmt(c.budget) + "; ";
  }
  return result(ok, detail);
}

inline json determinism_process_config(const std::string& out) {
  return json{{"seed", 20240601},
              {"output_dir", out},
              {"algebra", {{"dims", {2}}, {"weights", {0.5}}}},
              {"driver", {{"kind", "iid_shift"}}},
              {"ensemble", {{"kind", "random_kraus"}, {"k", 2}, {"mix_eps", 0.1}}},
              {"plan", {{"streams", 2}, {"length", 20}}}};
}

inline json determinism_fcs_config(const std::string& out) {
  return json{{"seed", 20240602},
              {"output_dir", out},
              {"algebra", {{"dims", {2}}, {"weights", {0.5}}}},
              {"bond", {{"dims", {2}}, {"weights", {0.5}}}},
              {"driver", {{"kind", "iid_shift"}}},
              {"generator", {{"kind", "kraus"}, {"k", 2}, {"mix_eps", 0.0}}},
              {"fcs", {{"gaps", {1, 2, 3, 4}}, {"birkhoff_N", 3}}}};
}

inline CheckResult determinism() {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / ("hennion-determinism-" + std::to_string(::getpid()));
  fs::remove_all(root);
  const char* prev = std::getenv("SOURCE_DATE_EPOCH");
  std::string saved = prev ? prev : "";
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  std::string detail;
  bool ok = true;
  try {
    for (int rep = 0; rep < 2; ++rep) {
      cmd_process(config_from_json(determinism_process_config((root / ("process" + std::to_string(rep))).string())));
      cmd_fcs(config_from_json(determinism_fcs_config((root / ("fcs" + std::to_string(rep))).string())));
    }
    int files = 0;
    for (const char* kind : {"process", "fcs"}) {
      auto same = byte_compare(root / (std::string(kind) + "0"), root / (std::string(kind) + "1"), detail);
      for (bool s : same) ok = ok && s;
      files += static_cast<int>(same.size());
    }
    if (detail.empty()) detail = std::to_string(files) + " files byte-identical";
  } catch (...) {
    if (prev) ::setenv("SOURCE_DATE_EPOCH", saved.c_str(), 1);
    else ::unsetenv("SOURCE_DATE_EPOCH");
    fs::remove_all(root);
    throw;
  }
  if (prev) ::setenv("SOURCE_DATE_EPOCH", saved.c_str(), 1);
  else ::unsetenv("SOURCE_DATE_EPOCH");
  fs::remove_all(root);
  return result(ok, detail);
}

}  // namespace suite

/// The acceptance criteria, in order.
inline std::vector<Check> acceptance_checks() {
  using namespace suite;
  return {
      {"AC01", "m-oracle equivalence", [] { return m_oracles(200); }},
      {"AC02", "d-formula equivalence", [] { return d_formulas(200); }},
      {"AC03", "X_eta example", [] { return x_eta_example(); }},
      {"AC04", "metric axioms and norm domination", [] { return metric_axioms(10000); }},
      {"AC05", "component geometry", [] { return component_geometry(1000); }},
      {"AC06", "contraction anchors", [] { return contraction_anchors(); }},
      {"AC07", "sandwich round trip", [] { return sandwich_round_trip(50, 1000); }},
      {"AC08", "duality", [] { return duality(50); }},
      {"AC09", "submultiplicativity", [] { return submultiplicativity(100); }},
      {"AC10", "Kingman rate", [] { return kingman_depolarizing(); }},
      {"AC11", "rate constancy", [] { return rate_constancy(20); }},
      {"AC12", "Theorem A collapse", [] { return theorem_a(60); }},
      {"AC13", "Theorem B collapse", [] { return theorem_b(60); }},
      {"AC14", "rank-one collapse bound", [] { return rank_one_stabilizes(20); }},
      {"AC15", "stopping time", [] { return stopping_time(1000); }},
      {"AC16", "FCS clustering", [] { return fcs_clustering(); }},
      {"AC17", "translation covariance", [] { return fcs_covariance(); }},
      {"AC18", "determinism", [] { return determinism(); }},
  };
}

/// Fast invariant suite: smaller instances of the same checks.
inline std::vector<Check> quick_checks() {
  using namespace suite;
  return {
      {"Q01", "m-oracle equivalence", [] { return m_oracles(20); }},
      {"Q02", "d-formula equivalence", [] { return d_formulas(30); }},
      {"Q03", "X_eta example", [] { return x_eta_example(); }},
      {"Q04", "metric axioms", [] { return metric_axioms(500); }},
      {"Q05", "component geometry", [] { return component_geometry(100); }},
      {"Q06", "contraction anchors", [] { return contraction_anchors(); }},
      {"Q07", "pairing identity", [] { return check_pairing_identity([](const SuperOperator& S) { return predual(S); }); }},
      {"Q08", "Kingman rate", [] { return kingman_depolarizing(); }},
      {"Q09", "Theorem A collapse", [] { return theorem_a(40); }},
      {"Q10", "FCS clustering", [] { return fcs_clustering(); }},
  };
}

inline std::vector<CheckResult> run_checks(const std::vector<Check>& checks, const std::function<void(const CheckResult&)>& on_result = {}) {
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    out.push_back(suite::timed(c));
    if (on_result) on_result(out.back());
  }
  return out;
}

inline std::string check_line(const CheckResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.2fs", r.seconds);
  return std::string(r.pass ? "PASS" : "FAIL") + " " + r.id + " " + r.name + " (" + secs + "): " + r.detail;
}

}  // namespace hennion
