// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hennion/experiment.hpp"
#include "hennion/selftest.hpp"

using namespace hennion;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> samples;
  bool json_out = false;
  std::string x_file, y_file, map_file;
  bool refine = false;
  std::string level = "quick";
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

int run_metric(const Options& o) {
  json rep = cmd_metric(read_json_file(o.x_file), read_json_file(o.y_file), o.samples.value_or(1000), o.seed.value_or(0));
  if (o.json_out) {
    print_json(rep);
    return 0;
  }
  std::cout << "m(x,y) = " << format_double(rep["m_xy"].get<double>()) << "\n"
            << "m(y,x) = " << format_double(rep["m_yx"].get<double>()) << "\n"
            << "d      = " << format_double(rep["d"].get<double>()) << "\n"
            << "t+, t- = " << rep["t_plus"].dump() << ", " << rep["t_minus"].dump() << "\n"
            << "verdict: " << rep["verdict"].get<std::string>() << "\n"
            << "oracle deltas: " << rep["oracle"].dump() << "\n";
  return 0;
}

int run_contraction(const Options& o) {
  fs::path out = o.out.value_or(".");
  ContractionCommand c = cmd_contraction(read_json_file(o.map_file), o.samples.value_or(1000), o.refine, o.seed.value_or(0), out);
  if (o.json_out) {
    print_json(c.report);
    return 0;
  }
  std::cout << "c in [" << format_double(c.estimate.lower_bound) << ", " << format_double(c.estimate.upper_bound) << "]\n"
            << "eta = " << format_double(c.estimate.eta) << "\n"
            << "fixed point: " << c.report["fixed_point"].get<std::string>() << "\n"
            << "verdict: " << c.report["verdict"].get<std::string>() << "\n";
  return 0;
}

ExperimentConfig config_for(const Options& o) {
  if (o.config.empty()) throw input_error("--config is required");
  return load_config(o.config, Overrides{o.seed, o.out, o.samples});
}

int run_process(const Options& o) {
  ExperimentConfig cfg = config_for(o);
  ProcessCommand c = cmd_process(cfg);
  if (o.json_out) {
    print_json(c.summary);
    return 0;
  }
  std::cout << "streams: " << c.summary["streams"] << ", C mean " << c.summary["C_mean"] << ", C std " << c.summary["C_std"] << " (" << c.summary["C_fitted"] << " streams fitted)\n"
            << "nu histogram: " << c.summary["nu_histogram"].dump() << "\n"
            << "outputs in " << cfg.output_dir.string() << "\n";
  return 0;
}

int run_fcs(const Options& o) {
  ExperimentConfig cfg = config_for(o);
  FcsCommand c = cmd_fcs(cfg);
  if (o.json_out) {
    print_json(c.summary);
    return 0;
  }
  const DecayReport& r = c.decay.front();
  std::cout << "kappa " << format_double(r.kappa) << ", kappa_fit " << format_double(r.kappa_fit) << ", E_k max " << format_double(r.E_k_max)
            << "\nclustering bound: " << (r.all_pass ? "pass" : "fail") << "\noutputs in " << cfg.output_dir.string() << "\n";
  return 0;
}

int run_selftest(const Options& o) {
  std::vector<Check> checks;
  if (o.level == "quick")
    checks = quick_checks();
  else if (o.level == "full")
    checks = acceptance_checks();
  else
    throw input_error("selftest level must be quick or full");
  int failed = 0;
  json results = json::array();
  run_checks(checks, [&](const CheckResult& r) {
    failed += r.pass ? 0 : 1;
    if (o.json_out)
      results.push_back(json{{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
    else
      std::cout << check_line(r) << std::endl;
  });
  if (o.json_out) print_json(json{{"level", o.level}, {"failed", failed}, {"results", results}});
  // an invariant failure means the code is wrong
  return failed == 0 ? 0 : static_cast<int>(ErrorKind::internal);
}

void report_error(const std::string& kind, int code, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hennion-lab: Hennion metric, contraction and ergodic process experiments"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "Master seed (64-bit)");
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; }, "Output directory");
    sub->add_option_function<int>("--samples", [&](const int& v) { o.samples = v; }, "Sample count (meaning depends on subcommand)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--json", o.json_out, "Print the report as JSON");
    sub->add_option("--config", o.config, "Experiment config (JSON)");
  };

  CLI::App* metric = app.add_subcommand("metric", "m-quantities and Hennion distance of two matrix files");
  metric->add_option("x", o.x_file, "First matrix file")->required()->check(CLI::ExistingFile);
  metric->add_option("y", o.y_file, "Second matrix file")->required()->check(CLI::ExistingFile);
  add_common(metric);

  CLI::App* contraction = app.add_subcommand("contraction", "Interval estimate of the Hennion contraction constant of a map");
  contraction->add_option("map", o.map_file, "Map file")->required()->check(CLI::ExistingFile);
  contraction->add_flag("--refine", o.refine, "Run the alternating refinement on the best samples");
  add_common(contraction);

  CLI::App* process = app.add_subcommand("process", "Ergodic quantum process experiment");
  add_common(process);
  CLI::App* fcs = app.add_subcommand("fcs", "Finitely correlated state clustering experiment");
  add_common(fcs);

  CLI::App* selftest = app.add_subcommand("selftest", "Run the invariant suites");
  selftest->add_option("--level", o.level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  add_common(selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("input", 2, e.what());
    return 2;
  }

  try {
    if (*metric) return run_metric(o);
    if (*contraction) return run_contraction(o);
    if (*process) return run_process(o);
    if (*fcs) return run_fcs(o);
    if (*selftest) return run_selftest(o);
  } catch (const Error& e) {
    report_error(kind_name(e.kind()), e.exit_code(), e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    report_error("input", 2, e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("internal", 5, e.what());
    return 5;
  }
  return 5;
}
