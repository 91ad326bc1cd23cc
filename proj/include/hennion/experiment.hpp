// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hennion/contraction.hpp"
#include "hennion/fcs.hpp"
#include "hennion/io.hpp"
#include "hennion/metric.hpp"
#include "hennion/parallel.hpp"
#include "hennion/process.hpp"

#ifndef HENNION_VERSION
#define HENNION_VERSION "0.1.0"
#endif

namespace hennion {

namespace fs = std::filesystem;

// ---- config ----

struct ExperimentConfig {
  json raw;  // as read, overrides applied, output_dir removed
  std::uint64_t master_seed = 0;
  fs::path output_dir = "hennion-out";
  Tolerances tol;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> samples;
};

inline Tolerances tolerances_from_json(const json& j) {
  Tolerances t;
  if (!j.is_object()) throw input_error("tolerances must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (!it->is_number()) throw input_error("tolerance " + k + " must be a number");
    double v = it->get<double>();
    if (!(v > 0.0)) throw input_error("tolerance " + k + " must be positive");
    if (k == "pos_tol") t.pos_tol = v;
    else if (k == "rank_tol") t.rank_tol = v;
    else if (k == "herm_tol") t.herm_tol = v;
    else if (k == "support_tol") t.support_tol = v;
    else if (k == "kernel_tol") t.kernel_tol = v;
    else if (k == "state_equal_tol") t.state_equal_tol = v;
    else if (k == "trace_tol") t.trace_tol = v;
    else if (k == "fixed_point_tol") t.fixed_point_tol = v;
    else if (k == "fixed_point_max_iter") t.fixed_point_max_iter = static_cast<int>(v);
    else if (k == "mproduct_floor") t.mproduct_floor = v;
    else if (k == "resolution_floor") t.resolution_floor = v;
    else if (k == "flag_tol") t.flag_tol = v;
    else if (k == "choi_tol") t.choi_tol = v;
    else throw input_error("unknown tolerance: " + k);
  }
  return t;
}

inline std::uint64_t seed_from_json(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  if (j.is_string()) {
    try {
      std::size_t pos = 0;
      std::uint64_t v = std::stoull(j.get<std::string>(), &pos, 0);
      if (pos == j.get<std::string>().size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw input_error("seed must be a non-negative 64-bit integer");
}

inline ExperimentConfig config_from_json(json j, const Overrides& ov = {}) {
  if (!j.is_object()) throw input_error("config must be a JSON object");
  detail::allow_keys(j, {"algebra", "bond", "driver", "ensemble", "generator", "plan", "fcs", "tolerances", "seed", "output_dir"},
                     "config");
  ExperimentConfig c;
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.out) j["output_dir"] = *ov.out;
  if (ov.samples) {
    if (*ov.samples < 1) throw input_error("--samples must be >= 1");
    if (j.contains("fcs"))
      j["fcs"]["omega_samples"] = *ov.samples;
    else
      j["plan"]["streams"] = *ov.samples;
  }
  c.master_seed = j.contains("seed") ? seed_from_json(j.at("seed")) : 0;
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw input_error("output_dir must be a string");
    c.output_dir = j.at("output_dir").get<std::string>();
    j.erase("output_dir");
  }
  if (j.contains("tolerances")) c.tol = tolerances_from_json(j.at("tolerances"));
  c.raw = std::move(j);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& ov = {}) { return config_from_json(read_json_file(path), ov); }

/// Hash of the canonical serialization (sorted keys, no whitespace).
inline std::uint64_t config_hash(const json& raw) { return fnv1a(raw.dump()); }

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw input_error(std::string("bad value for ") + key + ": " + e.what());
  }
}

inline const json& section(const json& raw, const char* name) {
  if (!raw.contains(name)) throw input_error(std::string("config needs a ") + name + " section");
  const json& s = raw.at(name);
  if (!s.is_object()) throw input_error(std::string(name) + " must be an object");
  return s;
}

}  // namespace detail

/// Driver of the s-th omega stream. Stream seeds come from the "ensemble"
/// substream of the master seed.
inline ErgodicDriver driver_from_json(const json& j, std::uint64_t master_seed, int stream = 0) {
  if (!j.is_object() || !j.contains("kind")) throw input_error("driver needs a kind");
  std::string kind = j.at("kind").get<std::string>();
  Stream base = Stream(master_seed).substream("ensemble").substream(static_cast<std::uint64_t>(stream));
  std::uint64_t seed = base.key();
  if (kind == "iid_shift") {
    detail::allow_keys(j, {"kind"}, "iid_shift driver");
    return ErgodicDriver::iid_shift(seed);
  }
  if (kind == "rotation") {
    detail::allow_keys(j, {"kind", "alpha", "omega0"}, "rotation driver");
    double alpha = detail::get_or<double>(j, "alpha", (std::sqrt(5.0) - 1.0) / 2.0);
    double omega0 = detail::get_or<double>(j, "omega0", 0.0);
    if (stream > 0) omega0 = base.substream("omega0").uniform();
    return ErgodicDriver::rotation(alpha, omega0, seed);
  }
  if (kind == "cyclic") {
    detail::allow_keys(j, {"kind", "period"}, "cyclic driver");
    return ErgodicDriver::cyclic(detail::get_or<int>(j, "period", 2), seed);
  }
  if (kind == "constant") {
    detail::allow_keys(j, {"kind", "phase"}, "constant driver");
    return ErgodicDriver::constant(seed, detail::get_or<double>(j, "phase", 0.0));
  }
  throw input_error("unknown driver kind: " + kind);
}

inline ChannelEnsemble ensemble_from_json(const json& j, const TracialAlgebra& A) {
  if (!j.is_object() || !j.contains("kind")) throw input_error("ensemble needs a kind");
  std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "fixed") {
      detail::allow_keys(j, {"kind", "map"}, "fixed ensemble");
      return ChannelEnsemble::fixed(map_from_json(j.at("map"), &A));
    }
    if (kind == "choice") {
      detail::allow_keys(j, {"kind", "maps", "weights"}, "choice ensemble");
      std::vector<SuperOperator> maps;
      for (const auto& m : j.at("maps")) maps.push_back(map_from_json(m, &A));
      std::vector<double> w = j.contains("weights") ? j.at("weights").get<std::vector<double>>() : std::vector<double>(maps.size(), 1.0);
      return ChannelEnsemble::choice(std::move(maps), std::move(w));
    }
    if (kind == "random_kraus") {
      detail::allow_keys(j, {"kind", "k", "mix_eps", "target", "normalization"}, "random_kraus ensemble");
      std::optional<Element> target;
      if (j.contains("target")) target = blocks_from_json(A, j.at("target"));
      std::string nm = detail::get_or<std::string>(j, "normalization", "unital");
      KrausNormalization norm = KrausNormalization::unital;
      if (nm == "tracial")
        norm = KrausNormalization::tracial;
      else if (nm == "none")
        norm = KrausNormalization::none;
      else if (nm != "unital")
        throw input_error("unknown normalization: " + nm);
      return ChannelEnsemble::random_kraus(A, detail::get_or<int>(j, "k", 2), detail::get_or<double>(j, "mix_eps", 0.1), target, norm);
    }
    if (kind == "strongly_summable") {
      detail::allow_keys(j, {"kind", "terms"}, "strongly_summable ensemble");
      return ChannelEnsemble::strongly_summable(A, detail::get_or<int>(j, "terms", 2));
    }
    if (kind == "interpolated") {
      detail::allow_keys(j, {"kind", "maps"}, "interpolated ensemble");
      const json& m = j.at("maps");
      if (!m.is_array() || m.size() != 2) throw input_error("interpolated ensemble needs two maps");
      return ChannelEnsemble::interpolated(map_from_json(m[0], &A), map_from_json(m[1], &A));
    }
  } catch (const json::exception& e) {
    throw input_error(std::string("malformed ensemble: ") + e.what());
  }
  throw input_error("unknown ensemble kind: " + kind);
}

inline GeneratorMap generator_from_json(const json& j, const TracialAlgebra& M, const TracialAlgebra& W) {
  if (!j.is_object() || !j.contains("kind")) throw input_error("generator needs a kind");
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "product") {
    detail::allow_keys(j, {"kind"}, "product generator");
    return GeneratorMap::product(M, W);
  }
  if (kind == "kraus") {
    detail::allow_keys(j, {"kind", "k", "mix_eps"}, "kraus generator");
    return GeneratorMap::kraus(M, W, detail::get_or<int>(j, "k", 2), detail::get_or<double>(j, "mix_eps", 0.0));
  }
  throw input_error("unknown generator kind: " + kind);
}

inline ProcessPlan plan_from_json(const json& j, const Tolerances& tol) {
  ProcessPlan p;
  p.options.tol = tol;
  if (j.is_null()) return p;
  if (!j.is_object()) throw input_error("plan must be an object");
  detail::allow_keys(j,
                     {"streams", "anchor", "length", "probes", "kappa", "burn_in", "gamma", "phi", "rank_one", "tail",
                      "contraction_samples", "refine_iters", "refine_starts", "renorm_every", "observables"},
                     "plan");
  p.anchor = detail::get_or<long long>(j, "anchor", 0);
  p.length = detail::get_or<int>(j, "length", 40);
  p.n_probes = detail::get_or<int>(j, "probes", 3);
  if (j.contains("kappa")) p.kappa = j.at("kappa").get<double>();
  p.burn_in = detail::get_or<int>(j, "burn_in", 5);
  p.gamma = detail::get_or<bool>(j, "gamma", true);
  p.phi = detail::get_or<bool>(j, "phi", true);
  p.rank_one = detail::get_or<bool>(j, "rank_one", true);
  p.tail = detail::get_or<int>(j, "tail", 40);
  p.options.contraction.n_samples = detail::get_or<int>(j, "contraction_samples", 200);
  p.options.contraction.refine_iters = detail::get_or<int>(j, "refine_iters", 20);
  p.options.contraction.refine_starts = detail::get_or<int>(j, "refine_starts", 3);
  p.options.renorm_every = detail::get_or<int>(j, "renorm_every", 25);
  if (p.length < 1) throw input_error("plan length must be >= 1");
  if (p.options.contraction.n_samples < 1) throw input_error("contraction_samples must be >= 1");
  if (p.kappa && !(*p.kappa > 0.0 && *p.kappa < 1.0)) throw input_error("plan kappa must lie in (0, 1)");
  return p;
}

// ---- manifest ----

inline std::string iso_time(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Wall clock, or SOURCE_DATE_EPOCH when set.
inline std::string timestamp_now() {
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return iso_time(static_cast<std::time_t>(std::stoll(e)));
    } catch (const std::exception&) {
      throw input_error(std::string("SOURCE_DATE_EPOCH must be an integer, got ") + e);
    }
  }
  return iso_time(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  void write(const std::string& rel, const std::string& content) {
    write_file_atomic(root_ / rel, content);
    files_[rel] = json{{"path", rel}, {"bytes", content.size()}, {"fnv1a", hex64(fnv1a(content))}};
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  json index() const {
    json a = json::array();
    for (const auto& [k, v] : files_) a.push_back(v);
    return a;
  }

 private:
  fs::path root_;
  std::map<std::string, json> files_;
};

struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  std::string started_at;
  std::string finished_at;
  json suites = json::object();
  std::string status = "ok";
  json error;
};

/// Writes config.json and manifest.json; manifest last so every listed file exists.
inline void finish_run(OutputSet& out, const ExperimentConfig& cfg, RunManifest m) {
  out.write_json("config.json", cfg.raw);
  m.finished_at = timestamp_now();
  json j{{"subcommand", m.subcommand},
         {"config_hash", m.config_hash},
         {"code_version", HENNION_VERSION},
         {"started_at", m.started_at},
         {"finished_at", m.finished_at},
         {"master_seed", cfg.master_seed},
         {"files", out.index()},
         {"suites", m.suites},
         {"status", m.status}};
  if (!m.error.is_null()) j["error"] = m.error;
  write_json_file(out.root() / "manifest.json", j);
}

inline json error_json(const Error& e) { return json{{"kind", kind_name(e.kind())}, {"exit_code", e.exit_code()}, {"message", e.what()}}; }

inline json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// ---- metric ----

inline json cmd_metric(const json& fx, const json& fy, int n_samples = 1000, std::uint64_t seed = 0, const Tolerances& tol = {}) {
  LoadedElement X = element_from_json(fx);
  LoadedElement Y = element_from_json(fy);
  if (X.algebra != Y.algebra) throw input_error("matrix files live on different algebras");
  const TracialAlgebra& A = X.algebra;
  for (const Element* e : {&X.element, &Y.element}) {
    if (A.asymmetry(*e) > tol.herm_tol) throw domain_error("input is not Hermitian");
    auto pr = A.is_positive(*e, tol.pos_tol);
    if (!pr.positive) throw domain_error("input is not positive semidefinite (min eigenvalue " + format_double(pr.min_eigenvalue) + ")");
    if (!(A.rtrace(*e) > tol.trace_tol)) throw domain_error("input has zero trace");
  }
  State x = A.normalize(X.element, tol);
  State y = A.normalize(Y.element, tol);
  DistanceReport rep = hennion_distance_report(A, x.element, y.element, tol);
  double bxy = m_quantity_bisection(A, x.element, y.element, 1e-12, tol).value;
  double byx = m_quantity_bisection(A, y.element, x.element, 1e-12, tol).value;
  Stream rng = Stream(seed).substream("sampling");
  double sxy = m_quantity_inf_sampling(A, x.element, y.element, n_samples, rng).value;
  double syx = m_quantity_inf_sampling(A, y.element, x.element, n_samples, rng).value;
  json j{{"algebra", algebra_to_json(A)},
         {"m_xy", rep.m_xy},
         {"m_yx", rep.m_yx},
         {"d", rep.d},
         {"components", {component_name(x.component), component_name(y.component)}},
         {"verdict", verdict_name(classify_component(A, x, y, tol))},
         {"half_trace_distance", 0.5 * A.norm(x.element - y.element, Norm::one)}};
  json oracle{{"m_xy_bisection_delta", std::abs(bxy - rep.m_xy)},
              {"m_yx_bisection_delta", std::abs(byx - rep.m_yx)},
              {"m_xy_sampling_gap", sxy - rep.m_xy},
              {"m_yx_sampling_gap", syx - rep.m_yx}};
  if (A.norm(x.element - y.element, Norm::one) > tol.state_equal_tol) {
    LineDecomposition L = line_decomposition(A, x.element, y.element, tol);
    j["t_plus"] = L.t_plus;
    j["t_minus"] = L.t_minus;
    oracle["d_line_delta"] = std::abs(L.distance() - rep.d);
  } else {
    j["t_plus"] = nullptr;
    j["t_minus"] = nullptr;
    oracle["d_line_delta"] = 0.0;
  }
  j["oracle"] = oracle;
  return j;
}

// ---- contraction ----

struct ContractionCommand {
  json report;
  ContractionEstimate estimate;
};

inline ContractionCommand cmd_contraction(const json& map_file, int n_samples, bool refine, std::uint64_t seed, const fs::path& out_dir,
                                          const Tolerances& tol = {}) {
  SuperOperator S = map_from_json(map_file);
  if (S.flags().positive == Tri::no) throw hypothesis_error("map is not positive");
  FaithfulnessReport fr = faithfulness_check(S, tol);
  if (fr.faithful == Tri::no) throw hypothesis_error("map is not faithful: " + fr.diagnosis);
  ContractionOptions opt;
  opt.n_samples = n_samples;
  opt.refine_iters = refine ? 50 : 0;
  ContractionCommand out;
  out.estimate = contraction_estimate(S, opt, Stream(seed).substream("sampling"), tol);
  const ContractionEstimate& e = out.estimate;
  fs::path fp = out_dir / "fixed_point.json";
  write_json_file(fp, element_to_json(S.algebra(), e.fixed_point.element));
  out.report = json{{"lower", e.lower_bound},
                    {"upper", e.upper_bound},
                    {"eta", e.eta},
                    {"n_samples", e.n_samples},
                    {"refine_iters", e.refine_iters},
                    {"fixed_point", fp.string()},
                    {"fixed_point_converged", e.fixed_point_converged},
                    {"fixed_point_residual", e.fixed_point_residual},
                    {"status", e.status},
                    {"verdict", verdict_name(is_strict_contraction(e))},
                    {"flags", flags_to_json(S.flags())}};
  return out;
}

// ---- process ----

struct StreamOutcome {
  std::optional<ProcessRun> run;
  std::optional<Error> error;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / v.size();
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

inline json summary_to_json(const ProcessSummary& s) {
  return json{{"C", num(s.C)},
              {"fit_r2", num(s.fit_r2)},
              {"exact_zero", s.exact_zero},
              {"C_dual", num(s.C_dual)},
              {"kappa", num(s.kappa)},
              {"D", num(s.D)},
              {"nu", s.nu},
              {"nu_optimistic", s.nu_optimistic},
              {"E_k", num(s.E_k)},
              {"E_stabilized", s.E_stabilized},
              {"equivariance_residual", num(s.equivariance_residual)},
              {"final_theorem_quantity_sup", num(s.final_quantity_sup)},
              {"spread_slope", num(s.spread_slope)},
              {"spread_bound_ok", s.spread_bound_ok},
              {"dual_bound_ok", s.dual_bound_ok},
              {"flags", s.flags}};
}

struct ProcessCommand {
  json summary;
  std::vector<StreamOutcome> streams;
  std::optional<Error> first_error;
};

/// Runs every omega stream, writes the outputs, and rethrows the first
/// stream error after the partial results are on disk.
inline ProcessCommand cmd_process(const ExperimentConfig& cfg) {
  RunManifest man;
  man.subcommand = "process";
  man.config_hash = hex64(config_hash(cfg.raw));
  man.started_at = timestamp_now();
  const json& raw = cfg.raw;
  TracialAlgebra A = algebra_from_json(detail::section(raw, "algebra"));
  json plan_json = raw.contains("plan") ? raw.at("plan") : json();
  ProcessPlan plan = plan_from_json(plan_json, cfg.tol);
  int streams = detail::get_or<int>(plan_json.is_object() ? plan_json : json::object(), "streams", 1);
  if (streams < 1) throw input_error("plan streams must be >= 1");
  if (plan_json.is_object() && plan_json.contains("observables")) {
    for (const auto& o : plan_json.at("observables")) plan.observables.push_back(blocks_from_json(A, o));
  }
  auto ensemble = std::make_shared<const ChannelEnsemble>(ensemble_from_json(detail::section(raw, "ensemble"), A));
  const json& djson = detail::section(raw, "driver");
  ensemble->validate(driver_from_json(djson, cfg.master_seed, 0));

  ProcessCommand cmd;
  cmd.streams = parallel_map<StreamOutcome>(streams, [&](int s) {
    StreamOutcome o;
    try {
      ChannelSource src(driver_from_json(djson, cfg.master_seed, s), ensemble);
      std::uint64_t seed = Stream(cfg.master_seed).substream("probes").substream(static_cast<std::uint64_t>(s)).key();
      o.run = run_experiment(src, plan, seed, std::to_string(s));
    } catch (const Error& e) {
      o.error = e;
    } catch (const std::exception& e) {
      o.error = internal_error(e.what());
    }
    return o;
  });

  OutputSet out(cfg.output_dir);
  std::string csv = process_csv_header();
  std::vector<double> Cs;
  std::map<int, int> nu_hist;
  json per_stream = json::array();
  std::string spread_dat = "# length spread_l1\n", upper_dat = "# length c_upper\n";
  for (std::size_t s = 0; s < cmd.streams.size(); ++s) {
    const StreamOutcome& o = cmd.streams[s];
    if (o.error) {
      if (!cmd.first_error) cmd.first_error = o.error;
      per_stream.push_back(json{{"stream", s}, {"error", error_json(*o.error)}});
      continue;
    }
    const ProcessRun& r = *o.run;
    for (const auto& row : r.rows) {
      csv += process_csv_row(row);
      if (s == 0 && row.direction == Direction::gamma_right) {
        spread_dat += std::to_string(row.length) + " " + format_double(row.spread_l1) + "\n";
        upper_dat += std::to_string(row.length) + " " + format_double(row.c_upper) + "\n";
      }
    }
    if (std::isfinite(r.summary.C)) Cs.push_back(r.summary.C);
    nu_hist[r.summary.nu]++;
    json js = summary_to_json(r.summary);
    js["stream"] = s;
    per_stream.push_back(js);
    if (r.limit) out.write_json("limit_states/stream_" + std::to_string(s) + ".json", element_to_json(A, r.limit->X.element));
  }
  out.write("process.csv", csv);
  json hist = json::object();
  std::string nu_dat = "# nu count\n";
  for (const auto& [nu, c] : nu_hist) {
    hist[std::to_string(nu)] = c;
    nu_dat += std::to_string(nu) + " " + std::to_string(c) + "\n";
  }
  cmd.summary = json{{"streams", streams},
                     {"C_mean", num(mean_of(Cs))},
                     {"C_std", num(sample_std(Cs))},
                     {"C_fitted", Cs.size()},
                     {"nu_histogram", hist},
                     {"master_seed", cfg.master_seed},
                     {"per_stream", per_stream}};
  int failed = 0;
  for (const auto& o : cmd.streams) failed += o.error ? 1 : 0;
  cmd.summary["completed"] = streams - failed;
  out.write_json("process_summary.json", cmd.summary);
  out.write("plots/spread.dat", spread_dat);
  out.write("plots/c_upper.dat", upper_dat);
  out.write("plots/nu_hist.dat", nu_dat);
  bool spread_ok = true, dual_ok = true;
  for (const auto& o : cmd.streams)
    if (o.run) {
      spread_ok = spread_ok && o.run->summary.spread_bound_ok;
      dual_ok = dual_ok && o.run->summary.dual_bound_ok;
    }
  man.suites = json{{"spread_bound", spread_ok ? "pass" : "fail"}, {"dual_bound", dual_ok ? "pass" : "fail"}};
  if (cmd.first_error) {
    man.status = "partial";
    man.error = error_json(*cmd.first_error);
  }
  finish_run(out, cfg, man);
  if (cmd.first_error) throw *cmd.first_error;
  return cmd;
}

// ---- fcs ----

struct FcsCommand {
  json summary;
  std::vector<DecayReport> decay;
  std::vector<CovarianceCheck> covariance;
  std::optional<BirkhoffReport> birkhoff;
};

inline LocalObservable observable_from_json(const json& j, const TracialAlgebra& M, const Element& fallback) {
  if (j.is_null()) return LocalObservable::single(M, 0, fallback);
  if (j.is_array()) return LocalObservable::single(M, 0, blocks_from_json(M, j));
  if (!j.is_object()) throw input_error("observable must be blocks or {sites: [...]}");
  detail::allow_keys(j, {"sites", "first"}, "observable");
  std::vector<Element> sites;
  for (const auto& s : j.at("sites")) sites.push_back(blocks_from_json(M, s));
  if (sites.empty()) throw input_error("observable needs at least one site");
  return LocalObservable::product(M, detail::get_or<long long>(j, "first", 0), std::move(sites));
}

inline FcsCommand cmd_fcs(const ExperimentConfig& cfg) {
  RunManifest man;
  man.subcommand = "fcs";
  man.config_hash = hex64(config_hash(cfg.raw));
  man.started_at = timestamp_now();
  const json& raw = cfg.raw;
  TracialAlgebra M = algebra_from_json(detail::section(raw, "algebra"));
  TracialAlgebra W = algebra_from_json(detail::section(raw, "bond"));
  auto gen = std::make_shared<const GeneratorMap>(generator_from_json(detail::section(raw, "generator"), M, W));
  const json& djson = detail::section(raw, "driver");
  json f = raw.contains("fcs") ? raw.at("fcs") : json::object();
  if (!f.is_object()) throw input_error("fcs must be an object");
  detail::allow_keys(f,
                     {"gaps", "window", "kappa", "covariance_shifts", "covariance_window", "birkhoff_N", "birkhoff_window", "omega_samples",
                      "observable_a", "observable_b", "contraction_samples"},
                     "fcs");
  std::vector<int> gaps = detail::get_or<std::vector<int>>(f, "gaps", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  std::optional<long long> window;
  if (f.contains("window")) window = f.at("window").get<long long>();
  std::optional<double> kappa;
  if (f.contains("kappa")) kappa = f.at("kappa").get<double>();
  std::vector<long long> shifts = detail::get_or<std::vector<long long>>(f, "covariance_shifts", {1, 2, 3});
  long long cov_N = detail::get_or<long long>(f, "covariance_window", 30);
  int birk_N = detail::get_or<int>(f, "birkhoff_N", 10);
  int samples = detail::get_or<int>(f, "omega_samples", 1);
  if (samples < 1) throw input_error("omega_samples must be >= 1");
  ProcessOptions popt;
  popt.tol = cfg.tol;
  popt.contraction.n_samples = detail::get_or<int>(f, "contraction_samples", 200);

  Stream probes = Stream(cfg.master_seed).substream("probes");
  Stream pa = probes.substream("a"), pb = probes.substream("b");
  LocalObservable a = observable_from_json(f.contains("observable_a") ? f.at("observable_a") : json(), M, M.random_hermitian(pa));
  LocalObservable b = observable_from_json(f.contains("observable_b") ? f.at("observable_b") : json(), M, M.random_hermitian(pb));
  std::uint64_t est_seed = Stream(cfg.master_seed).substream("sampling").key();
  ContractionOptions copt = popt.contraction;
  auto source = [&](int s) { return GeneratorSource(driver_from_json(djson, cfg.master_seed, s), gen, copt, est_seed); };
  gen->validate(driver_from_json(djson, cfg.master_seed, 0), 4, 64, cfg.tol);

  FcsCommand cmd;
  cmd.decay = parallel_map<DecayReport>(samples, [&](int s) { return clustering_experiment(source(s), a, b, gaps, kappa, window, popt); });
  GeneratorSource src0 = source(0);
  std::vector<CovarianceCheck> cov = parallel_map<CovarianceCheck>(static_cast<int>(shifts.size()), [&](int i) {
    return translation_covariance_check(src0, a, shifts[i], cov_N);
  });
  cmd.covariance = cov;
  long long birk_window = detail::get_or<long long>(f, "birkhoff_window", cmd.decay[0].window);
  cmd.birkhoff = birkhoff_average(src0, a, birk_N, birk_window);

  OutputSet out(cfg.output_dir);
  json per_sample = json::array();
  bool all_pass = true;
  for (int s = 0; s < samples; ++s) {
    const DecayReport& rep = cmd.decay[s];
    std::string csv = decay_csv_header();
    std::string dat = "# gap corr bound_rhs\n";
    for (const auto& row : rep.rows) {
      csv += decay_csv_row(row);
      dat += std::to_string(row.gap) + " " + format_double(row.corr) + " " + format_double(row.bound_rhs) + "\n";
    }
    std::string suffix = s == 0 ? "" : "_" + std::to_string(s);
    out.write("decay_report" + suffix + ".csv", csv);
    out.write("plots/decay" + suffix + ".dat", dat);
    all_pass = all_pass && rep.all_pass;
    json E = json::array();
    for (const auto& row : rep.rows) E.push_back(json{{"gap", row.gap}, {"anchor_k", row.anchor_k}, {"E_k", num(row.E_k)}});
    per_sample.push_back(json{{"sample", s},
                              {"C", num(rep.C)},
                              {"kappa", num(rep.kappa)},
                              {"kappa_fit", num(rep.kappa_fit)},
                              {"E_fit", num(rep.E_fit)},
                              {"E_k_max", num(rep.E_k_max)},
                              {"E_k", E},
                              {"window", rep.window},
                              {"degenerate", rep.degenerate},
                              {"hypothesis_certified", rep.hypothesis_certified},
                              {"all_pass", rep.all_pass}});
  }
  json covj = json::array();
  std::string cov_csv = "k,deviation,budget,pass\n";
  bool cov_pass = true;
  for (const auto& c : cmd.covariance) {
    covj.push_back(json{{"k", c.k}, {"deviation", c.deviation}, {"budget", c.budget}, {"pass", c.pass}});
    cov_csv += std::to_string(c.k) + "," + format_double(c.deviation) + "," + format_double(c.budget) + "," + (c.pass ? "1" : "0") + "\n";
    cov_pass = cov_pass && c.pass;
  }
  out.write("covariance.csv", cov_csv);
  const BirkhoffReport& B = *cmd.birkhoff;
  std::string birk = "# N partial_average\n";
  for (std::size_t n = 0; n < B.partial.size(); ++n) birk += std::to_string(n) + " " + format_double(B.partial[n]) + "\n";
  out.write("plots/birkhoff.dat", birk);
  cmd.summary = json{{"generator", gen->describe()},
                     {"seeds", {{"master", cfg.master_seed}, {"sampling", est_seed}}},
                     {"samples", per_sample},
                     {"covariance", covj},
                     {"birkhoff",
                      {{"final_average", B.final_average}, {"shift_deviation", B.shift_deviation}, {"budget", B.budget}, {"N", birk_N}, {"window", birk_window}}}};
  out.write_json("fcs_summary.json", cmd.summary);
  man.suites = json{{"clustering_bound", all_pass ? "pass" : "fail"},
                    {"translation_covariance", cov_pass ? "pass" : "fail"},
                    {"birkhoff_shift", B.shift_deviation <= B.budget ? "pass" : "fail"}};
  finish_run(out, cfg, man);
  return cmd;
}

}  // namespace hennion
