#include <extremis/experiment.hpp>
#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace extremis;
namespace fs = std::filesystem;

namespace {

fs::path tmp_path(const std::string& name) { return fs::path(testing::TempDir()) / ("extremis_" + name); }

std::string tmp(const std::string& name) {
  const auto p = fs::path(testing::TempDir()) / ("extremis_" + name);
  fs::remove_all(p);
  return p.string();
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const std::string err_path = tmp("stderr.txt");
  const std::string cmd = std::string(EXTREMIS_CLI_PATH) + " " + args + " 2>" + err_path;
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(err_path);
  std::stringstream ss;
  ss << f.rdbuf();
  r.err = ss.str();
  return r;
}

nlohmann::json last_json_line(const std::string& text) {
  std::istringstream is(text);
  std::string line, last;
  while (std::getline(is, line))
    if (!line.empty() && line[0] == '{') last = line;
  return nlohmann::json::parse(last);
}

ExperimentConfig small_iform(const std::string& name = "iform") {
  return parse_experiment_config({{"name", name},
                                  {"method", "iform"},
                                  {"params", {{"years", {50, 100}}, {"points", 36}, {"seeds", 6}, {"bootstrap", 50}}}});
}

ExperimentConfig small_brute() {
  return parse_experiment_config({{"name", "brute"}, {"method", "brute"}, {"params", {{"years", 200}, {"bootstrap", 50}}}});
}

}  // namespace

TEST(ExperimentConfig, DefaultsAndValidation) {
  const auto c = parse_experiment_config({{"method", "sequential"}});
  EXPECT_EQ(c.method, Method::sequential);
  EXPECT_EQ(c.params.at("seeds"), 18);
  EXPECT_EQ(c.seed, 7u);
  auto field_of = [](const nlohmann::json& j) {
    try {
      parse_experiment_config(j);
    } catch (const Error& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of({{"method", "montecarlo"}}), "method");
  EXPECT_EQ(field_of({{"name", "x"}}), "method");
  EXPECT_EQ(field_of({{"method", 3}}), "method");
  EXPECT_EQ(field_of({{"method", "brute"}, {"params", {{"iterations", 3}}}}), "params.iterations");
  EXPECT_EQ(field_of({{"method", "brute"}, {"colour", 1}}), "colour");
  EXPECT_THROW(parse_experiment_config(nlohmann::json::array()), ParseError);
}

TEST(ExperimentConfig, HashIgnoresThreadsOnly) {
  auto a = small_iform();
  auto b = small_iform();
  b.threads = 8;
  EXPECT_EQ(json_hash(config_echo(a)), json_hash(config_echo(b)));
  b.seed = 8;
  EXPECT_NE(json_hash(config_echo(a)), json_hash(config_echo(b)));
}

TEST(RunExperiment, IformTableAndFiles) {
  const auto dir = tmp("iform");
  const auto s = run_experiment(small_iform(), dir);
  EXPECT_EQ(s.at("code_version"), kVersion);
  EXPECT_TRUE(s.at("estimates").contains("rv50"));
  EXPECT_TRUE(s.at("estimates").contains("rv100"));
  EXPECT_GE(s.at("estimates").at("rv100").get<double>(), 0.0);
  // One row per (return period, quantile) with the argmax condition.
  ASSERT_EQ(s.at("table").size(), 6u);
  for (const auto& row : s.at("table")) {
    EXPECT_GE(row.at("u").get<double>(), 3.0);
    EXPECT_LE(row.at("u").get<double>(), 25.0);
  }
  const std::string hash = s.at("config_hash");
  for (const auto& f : s.at("files")) {
    std::ifstream in(fs::path(dir) / f.get<std::string>());
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "# config_hash=" + hash) << f;
  }
  EXPECT_TRUE(fs::exists(fs::path(dir) / "summary.json"));
}

TEST(RunExperiment, IdenticalAcrossRepeatsAndThreads) {
  auto c = small_brute();
  const auto a = run_experiment(c, tmp("brute_a"));
  c.threads = 4;
  const auto b = run_experiment(c, tmp("brute_b"));
  EXPECT_EQ(a.dump(), b.dump());
  std::ifstream fa(tmp_path("brute_a") / "annual_maxima.csv");
  std::ifstream fb(tmp_path("brute_b") / "annual_maxima.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_FALSE(sa.str().empty());
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(CompareRuns, RelativeDifferencesAgainstBrute) {
  const auto brute = run_experiment(small_brute(), tmp("cmp_brute"));
  const auto iform = run_experiment(small_iform(), tmp("cmp_iform"));
  const auto rows = compare_runs({iform, brute});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "iform");
  const double ref = brute.at("estimates").at("rv50");
  EXPECT_NEAR(*rows[0].rv50_rel, (*rows[0].rv50 - ref) / ref, 1e-15);
  EXPECT_EQ(*rows[1].rv50_rel, 0.0);
  EXPECT_FALSE(rows[0].pf.has_value());
  std::ostringstream os;
  write_comparison_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "name,method,rv50_mnm,rv100_mnm,pf,rv50_rel_diff,rv100_rel_diff,pf_rel_diff");
  int n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 2);

  EXPECT_THROW(compare_runs({brute}), IncompatibleError);
  auto other = iform;
  other["setting_hash"] = "0000000000000000";
  EXPECT_THROW(compare_runs({brute, other}), IncompatibleError);
  EXPECT_THROW(compare_runs({brute, nlohmann::json{{"format", "x"}}}), ParseError);
}

TEST(Cli, InvalidMethodExitsTwoWithFieldInErrorJson) {
  const auto cfg = tmp("bad.json");
  std::ofstream(cfg) << R"({"method": "montecarlo"})";
  const auto r = run_cli("run --config " + cfg + " --out-dir " + tmp("bad_out"));
  EXPECT_EQ(r.code, 2);
  const auto e = last_json_line(r.err);
  EXPECT_EQ(e.at("error").at("field"), "method");
  EXPECT_EQ(e.at("error").at("kind"), "validation_error");
}

TEST(Cli, UsageAndParseErrors) {
  EXPECT_EQ(run_cli("nonsense").code, 2);
  const auto cfg = tmp("broken.json");
  std::ofstream(cfg) << "{ not json";
  const auto r = run_cli("run --config " + cfg);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(last_json_line(r.err).at("error").at("kind"), "parse_error");
}

TEST(Cli, CompareSingleSummaryIsIncompatible) {
  run_experiment(small_iform(), tmp("cli_one"));
  const auto r = run_cli("compare " + (tmp_path("cli_one") / "summary.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(last_json_line(r.err).at("error").at("kind"), "incompatible");
}

TEST(Cli, BruteWritesJsonAndEnvSampleIsDeterministic) {
  const auto out = tmp("brute.json");
  const auto r = run_cli("brute --env brittany-like --sim brittany-like --years 100 --seed 3 --out " + out);
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(out);
  const auto j = nlohmann::json::parse(f);
  for (const char* k : {"rv50", "rv100", "fraction_simulated", "bootstrap_se"}) EXPECT_TRUE(j.contains(k)) << k;
  const auto a = run_cli("env sample --config site-a-like --n 20 --seed 5");
  const auto b = run_cli("--threads 3 env sample --config site-a-like --n 20 --seed 5");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
}

TEST(Presets, FilesMatchBuiltinsAndConfigsParse) {
  const fs::path dir = fs::path(EXTREMIS_SOURCE_DIR) / "presets";
  for (const char* p : {"site-a-like", "brittany-like"}) {
    EXPECT_EQ(to_json(load_env_config((dir / (std::string("env-") + p + ".json")).string())).dump(),
              to_json(load_env_config(p)).dump());
    EXPECT_EQ(to_json(load_sim_preset((dir / (std::string("sim-") + p + ".json")).string())).dump(),
              to_json(load_sim_preset(p)).dump());
  }
  int configs = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("env-", 0) == 0 || name.rfind("sim-", 0) == 0) continue;
    const auto c = load_experiment_config(e.path().string());
    EXPECT_NO_THROW(load_env_config((fs::path(EXTREMIS_SOURCE_DIR) / c.env).string())) << name;
    EXPECT_NO_THROW(load_sim_preset((fs::path(EXTREMIS_SOURCE_DIR) / c.sim).string())) << name;
    ++configs;
  }
  EXPECT_GE(configs, 9);
}
