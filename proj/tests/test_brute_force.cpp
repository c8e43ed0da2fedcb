#include <extremis/brute_force.hpp>
#include <gtest/gtest.h>

using namespace extremis;

namespace {

BruteForceOptions opts(std::size_t years, double cu, double cs) {
  BruteForceOptions o;
  o.years = years;
  o.truncation = {cu, cs};
  o.bootstrap_replicates = 50;
  return o;
}

}  // namespace

TEST(BruteForce, ConstantSimulatorGivesConstantReturnValues) {
  SimPreset sim;
  sim.name = "constant";
  sim.median.base = 4.25;
  const auto r = brute_force_return_values(site_a_like_env(), sim, opts(100, 0, 0));
  EXPECT_EQ(r.rv50, 4.25);
  EXPECT_EQ(r.rv100, 4.25);
  EXPECT_EQ(r.bootstrap_se50, 0.0);
  EXPECT_EQ(r.run.annual_maxima.size(), 100u);
}

TEST(BruteForce, NegligibleTruncationLeavesReturnValuesUnchanged) {
  const auto env = site_a_like_env();
  const auto a = brute_force_return_values(env, site_a_like_sim(), opts(100, 0, 0));
  const auto b = brute_force_return_values(env, site_a_like_sim(), opts(100, 4.0, 0.0));
  EXPECT_EQ(a.run.annual_maxima, b.run.annual_maxima);
  EXPECT_NEAR(a.rv100, b.rv100, 1e-12);
  EXPECT_LT(b.fraction_simulated, a.fraction_simulated);
}

TEST(BruteForce, TighterCutoffsNeverIncreaseReturnValues) {
  const auto env = site_a_like_env();
  const std::vector<std::pair<double, double>> ladder{{0, 0}, {5, 1.0}, {5, 3.0}, {8, 3.5}, {11, 4.0}, {14, 5.0}};
  BruteForceResult prev;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto r = brute_force_return_values(env, site_a_like_sim(), opts(100, ladder[i].first, ladder[i].second));
    if (i > 0) {
      EXPECT_LE(r.rv50, prev.rv50) << i;
      EXPECT_LE(r.rv100, prev.rv100) << i;
      EXPECT_LE(r.fraction_simulated, prev.fraction_simulated) << i;
      for (std::size_t y = 0; y < r.run.annual_maxima.size(); ++y)
        EXPECT_LE(r.run.annual_maxima[y], prev.run.annual_maxima[y]);
    }
    prev = r;
  }
  EXPECT_LT(prev.fraction_simulated, 0.05);
}

TEST(BruteForce, DeterministicAcrossThreadCounts) {
  auto o = opts(100, 5, 3);
  const auto a = brute_force_return_values(brittany_like_env(), brittany_like_sim(), o);
  o.threads = 3;
  const auto b = brute_force_return_values(brittany_like_env(), brittany_like_sim(), o);
  EXPECT_EQ(a.run.annual_maxima, b.run.annual_maxima);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(BruteForce, ValidationAndRetries) {
  EXPECT_THROW(brute_force_return_values(site_a_like_env(), site_a_like_sim(), opts(99, 0, 0)), DomainError);
  EXPECT_THROW(brute_force_return_values(site_a_like_env(), site_a_like_sim(), opts(100, -1, 0)), ValidationError);
  try {
    brute_force_return_values(site_a_like_env(), site_a_like_sim(), opts(100, 0, -0.5));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "cutoff_sigma");
  }
  auto sim = brittany_like_sim();
  sim.failure_probability = 0.02;
  const auto r = brute_force_return_values(brittany_like_env(), sim, opts(100, 0, 0));
  EXPECT_GT(r.retries, 0u);
  const auto j = to_json(r);
  for (const char* k : {"rv50", "rv100", "fraction_simulated", "bootstrap_se"}) EXPECT_TRUE(j.contains(k)) << k;
}
