// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hennion/experiment.hpp"

using namespace hennion;
namespace fs = std::filesystem;

namespace {

fs::path data(const std::string& name) { return fs::path(HENNION_DEMO_DIR) / "data" / name; }
fs::path config(const std::string& name) { return fs::path(HENNION_DEMO_DIR) / "configs" / name; }

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hennion-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(HENNION_LAB_EXE) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, RejectsUnknownKeys) {
  json j = read_json_file(config("depolarizing_process.json").string());
  j["colour"] = "blue";
  EXPECT_THROW(config_from_json(j), Error);
  json k = read_json_file(config("depolarizing_process.json").string());
  k["plan"]["lenght"] = 3;
  ExperimentConfig c = config_from_json(k, Overrides{std::nullopt, scratch("typo").string(), std::nullopt});
  EXPECT_THROW(cmd_process(c), Error);
}

TEST(Config, OverridesAndHash) {
  json j = read_json_file(config("depolarizing_process.json").string());
  ExperimentConfig a = config_from_json(j, Overrides{42, "x", 3});
  EXPECT_EQ(a.master_seed, 42u);
  EXPECT_EQ(a.output_dir, fs::path("x"));
  EXPECT_EQ(a.raw["plan"]["streams"], 3);
  EXPECT_FALSE(a.raw.contains("output_dir"));
  ExperimentConfig b = config_from_json(j, Overrides{42, "y", 3});
  EXPECT_EQ(config_hash(a.raw), config_hash(b.raw));
  ExperimentConfig c = config_from_json(j, Overrides{43, "x", 3});
  EXPECT_NE(config_hash(a.raw), config_hash(c.raw));
}

TEST(Metric, CommandExamples) {
  json same = cmd_metric(read_json_file(data("diag_15_05.json").string()), read_json_file(data("diag_15_05.json").string()));
  EXPECT_LT(same["d"].get<double>(), 1e-12);
  json pair = cmd_metric(read_json_file(data("diag_15_05.json").string()), read_json_file(data("diag_05_15.json").string()));
  EXPECT_NEAR(pair["d"].get<double>(), 0.8, 1e-12);
  EXPECT_LT(pair["oracle"]["d_line_delta"].get<double>(), 1e-9);
  json edge = cmd_metric(read_json_file(data("diag_2_0.json").string()), read_json_file(data("identity_m2.json").string()));
  EXPECT_EQ(edge["d"].get<double>(), 1.0);
  EXPECT_EQ(edge["verdict"], "distance_one");
}

TEST(Process, ManifestListsEveryFile) {
  fs::path out = scratch("manifest");
  ExperimentConfig cfg = load_config(config("depolarizing_process.json").string(), Overrides{std::nullopt, out.string(), std::nullopt});
  ProcessCommand c = cmd_process(cfg);
  EXPECT_NEAR(c.summary["C_mean"].get<double>(), 0.5, 1e-3);
  json man = read_json_file((out / "manifest.json").string());
  ASSERT_TRUE(man["files"].is_array());
  for (const auto& f : man["files"]) {
    fs::path p = out / f["path"].get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(fs::file_size(p), f["bytes"].get<std::size_t>());
    EXPECT_EQ(hex64(fnv1a(slurp(p))), f["fnv1a"].get<std::string>());
  }
  json stored = read_json_file((out / "config.json").string());
  EXPECT_EQ(hex64(config_hash(stored)), man["config_hash"].get<std::string>());
  EXPECT_TRUE(fs::exists(out / "limit_states" / "stream_0.json"));
  EXPECT_TRUE(fs::exists(out / "plots" / "spread.dat"));
}

TEST(Process, ReplacementConfigCollapses) {
  fs::path out = scratch("replacement");
  ExperimentConfig cfg = load_config(config("replacement_process.json").string(), Overrides{std::nullopt, out.string(), std::nullopt});
  ProcessCommand c = cmd_process(cfg);
  EXPECT_TRUE(c.summary["per_stream"][0]["exact_zero"].get<bool>());
  std::string csv = slurp(out / "process.csv");
  EXPECT_NE(csv.find("0,gamma_right,1,"), std::string::npos);
  EXPECT_EQ(csv.find("0,gamma_right,2,"), std::string::npos);
}

TEST(Process, SeedRepetitionGivesIdenticalCsv) {
  fs::path a = scratch("rep_a"), b = scratch("rep_b");
  for (const fs::path& out : {a, b})
    cmd_process(load_config(config("random_kraus_process.json").string(), Overrides{5, out.string(), 2}));
  EXPECT_EQ(slurp(a / "process.csv"), slurp(b / "process.csv"));
  EXPECT_EQ(slurp(a / "process_summary.json"), slurp(b / "process_summary.json"));
}

TEST(Fcs, ProductConfigAndKShift) {
  fs::path out = scratch("fcs_product");
  FcsCommand c = cmd_fcs(load_config(config("product_fcs.json").string(), Overrides{std::nullopt, out.string(), std::nullopt}));
  for (const auto& r : c.decay[0].rows) EXPECT_LT(r.corr, 1e-12);
  EXPECT_TRUE(fs::exists(out / "decay_report.csv"));
  EXPECT_EQ(slurp(out / "decay_report.csv").substr(0, 20), "gap,corr,bound_rhs,p");
  for (const auto& cv : c.covariance) EXPECT_TRUE(cv.pass);
}

TEST(Cli, ExitCodes) {
  fs::path out = scratch("cli");
  fs::create_directories(out);
  EXPECT_EQ(run_cli("metric " + data("diag_15_05.json").string() + " " + data("diag_05_15.json").string() + " --json"), 0);
  EXPECT_EQ(run_cli("metric " + data("diag_15_05.json").string() + " " + data("not_positive.json").string()), 3);
  EXPECT_EQ(run_cli("metric " + data("diag_15_05.json").string() + " /nonexistent.json"), 2);
  EXPECT_EQ(run_cli("contraction " + data("compression.json").string() + " --out " + out.string()), 4);
  EXPECT_EQ(run_cli("contraction " + data("replacement.json").string() + " --samples 100 --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "fixed_point.json"));
  EXPECT_EQ(run_cli("process"), 2);
  EXPECT_EQ(run_cli("bogus"), 2);
}
