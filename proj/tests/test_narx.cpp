#include <extremis/narx.hpp>
#include <extremis/random.hpp>
#include <extremis/response_sim.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"

#include <sstream>

using namespace extremis;

namespace {

// y(t) = 0.5 y(t-1) + 0.3 x(t), y(0) = 0.
NarxSeries linear_system(std::size_t n, std::uint64_t seed) {
  Stream r(seed);
  NarxSeries s;
  s.inputs.assign(1, Series(n));
  s.output.assign(n, 0.0);
  for (auto& v : s.inputs[0]) v = r.normal();
  for (std::size_t t = 1; t < n; ++t) s.output[t] = 0.5 * s.output[t - 1] + 0.3 * s.inputs[0][t];
  return s;
}

const LagSpec kLinearSpec{{1}, {{0}}};

NarxSeries sim_series(std::uint64_t seed, double duration = 1000.0) {
  const auto ts = simulate_timeseries({12.0, 1.5}, seed, duration, 0.1, site_a_like_sim());
  return NarxSeries{{ts.wind}, ts.y};
}

}  // namespace

TEST(LagVector, HandExample) {
  const LagSpec s{{1}, {{0}}};
  const std::vector<Series> x{{2, 3}};
  const Series y{5, 7};
  EXPECT_EQ(build_lag_vector(x, y, s, 1), (std::vector<double>{5, 3}));
  EXPECT_THROW(build_lag_vector(x, y, LagSpec{{2}, {{0}}}, 1), IndexError);
  const LagSpec ar_only{{1, 2}, {}};
  EXPECT_EQ(build_lag_vector({}, Series{1, 2, 3}, ar_only, 2), (std::vector<double>{2, 1}));
}

TEST(LagVector, LengthMatchesLagCounts) {
  Stream r(1);
  for (int trial = 0; trial < 50; ++trial) {
    LagSpec s;
    for (int l = 1; l <= 5; ++l)
      if (r.uniform() < 0.5) s.autoregressive.push_back(l);
    const int channels = static_cast<int>(r.uniform() * 4);
    std::size_t expected = s.autoregressive.size();
    for (int j = 0; j < channels; ++j) {
      std::vector<int> lags;
      for (int l = 0; l <= 4; ++l)
        if (r.uniform() < 0.5) lags.push_back(l);
      expected += lags.size();
      s.exogenous.push_back(lags);
    }
    std::vector<Series> x(static_cast<std::size_t>(channels), Series(10, 1.0));
    EXPECT_EQ(s.size(), expected);
    EXPECT_EQ(build_lag_vector(x, Series(10, 0.0), s, 9).size(), expected);
  }
}

TEST(LagSpecText, ParseRoundTripAndValidation) {
  const auto s = parse_lag_spec("y:1,2;x:0,1;x:");
  EXPECT_EQ(s.autoregressive, (std::vector<int>{1, 2}));
  ASSERT_EQ(s.exogenous.size(), 2u);
  EXPECT_TRUE(s.exogenous[1].empty());
  EXPECT_EQ(parse_lag_spec(to_string(s)), s);
  EXPECT_THROW(parse_lag_spec("y:0"), ValidationError);
  EXPECT_THROW(parse_lag_spec("y:2,1"), ValidationError);
  EXPECT_THROW(parse_lag_spec("y:1;x:-1"), ValidationError);
  EXPECT_THROW(parse_lag_spec("y:a"), ParseError);
}

TEST(Monomials, CountsAndInteractionCap) {
  // C(n + d, d) monomials of total degree <= d.
  EXPECT_EQ(monomial_set(3, 2).size(), 10u);
  EXPECT_EQ(monomial_set(4, 3).size(), 35u);
  // Cap 1: no cross terms.
  EXPECT_EQ(monomial_set(3, 3, 1).size(), 1u + 3 * 3);
  const auto m = monomial_set(2, 1);
  EXPECT_EQ(m[0], (std::vector<int>{0, 0}));
}

TEST(FitNarx, RecoversNoiselessLinearSystem) {
  const auto m = fit_narx({linear_system(500, 2)}, kLinearSpec, {});
  ASSERT_EQ(m.coefficients.size(), 3);
  EXPECT_NEAR(m.coefficients[0], 0.0, 1e-10);
  EXPECT_NEAR(m.coefficients[1], 0.5, 1e-10);
  EXPECT_NEAR(m.coefficients[2], 0.3, 1e-10);
  EXPECT_LT(m.training_rmse, 1e-12);
  EXPECT_EQ(static_cast<std::size_t>(m.coefficients.size()), m.multi_indices.size());
}

TEST(FitNarx, ConstantOutput) {
  NarxSeries s;
  Stream r(3);
  s.inputs.assign(1, Series(100));
  for (auto& v : s.inputs[0]) v = r.normal();
  s.output.assign(100, 2.5);
  const auto m = fit_narx({s}, LagSpec{{}, {{0, 1}}}, {});
  EXPECT_NEAR(m.coefficients[0], 2.5, 1e-12);
  for (Eigen::Index i = 1; i < m.coefficients.size(); ++i) EXPECT_NEAR(m.coefficients[i], 0.0, 1e-12);
  // With an AR lag the y column duplicates the intercept.
  EXPECT_THROW(fit_narx({s}, kLinearSpec, {}), RankDeficiencyError);
  NarxFitOptions ridge;
  ridge.regularization = 1e-6;
  const auto mr = fit_narx({s}, kLinearSpec, ridge);
  const auto p = predict_narx(mr, s.inputs, Series{2.5});
  for (double v : p) EXPECT_NEAR(v, 2.5, 1e-4);
}

TEST(FitNarx, Errors) {
  const auto s = linear_system(5, 4);
  NarxFitOptions o;
  o.degree = 3;
  EXPECT_THROW(fit_narx({s}, LagSpec{{1, 2}, {{0, 1}}}, o), InsufficientSamplesError);
  o.regularization = -1;
  EXPECT_THROW(fit_narx({linear_system(100, 4)}, kLinearSpec, o), DomainError);
}

TEST(FitNarx, ResidualsOrthogonalToRegressors) {
  const auto d = sim_series(5, 300);
  NarxFitOptions o;
  o.degree = 2;
  const LagSpec spec{{1, 2}, {{0, 1}}};
  const auto m = fit_narx({d}, spec, o);
  // Rebuild the regression matrix independently.
  const std::size_t T = d.output.size(), L = 2;
  std::vector<std::vector<double>> cols(m.multi_indices.size());
  std::vector<double> res;
  for (std::size_t t = L; t < T; ++t) {
    const double phi[4] = {d.output[t - 1], d.output[t - 2], d.inputs[0][t], d.inputs[0][t - 1]};
    double pred = 0;
    for (std::size_t a = 0; a < m.multi_indices.size(); ++a) {
      double v = 1;
      for (int i = 0; i < 4; ++i) v *= std::pow(phi[i], m.multi_indices[a][static_cast<std::size_t>(i)]);
      cols[a].push_back(v);
      pred += m.coefficients[static_cast<Eigen::Index>(a)] * v;
    }
    res.push_back(d.output[t] - pred);
  }
  for (const auto& c : cols) {
    double dot = 0, cn = 0, rn = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      dot += c[i] * res[i];
      cn += c[i] * c[i];
      rn += res[i] * res[i];
    }
    EXPECT_LT(std::abs(dot) / std::sqrt(cn * rn), 1e-8);
  }
}

TEST(FitNarx, SimulatorSeriesOneStepAccuracy) {
  const auto d = sim_series(6);
  NarxFitOptions o;
  o.degree = 2;
  const auto m = fit_narx({d}, LagSpec{{1, 2}, {{0, 1}}}, o);
  const auto [mean, sd] = oracle::mean_sd(d.output);
  (void)mean;
  const double rmse = one_step_rmse(m, {sim_series(60)});
  EXPECT_LT(rmse, 0.05 * sd);
}

TEST(PredictNarx, ZeroInputZeroInit) {
  const auto m = fit_narx({linear_system(300, 7)}, kLinearSpec, {});
  const auto y = predict_narx(m, {Series(1000, 0.0)}, Series{0.0});
  for (double v : y) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(PredictNarx, ExactModelMatchesRecursion) {
  const auto m = fit_narx({linear_system(300, 8)}, kLinearSpec, {});
  const auto s = linear_system(10000, 9);
  const auto y = predict_narx(m, s.inputs, Series{s.output[0]});
  ASSERT_EQ(y.size(), s.output.size());
  double worst = 0;
  for (std::size_t t = 0; t < y.size(); ++t) worst = std::max(worst, std::abs(y[t] - s.output[t]));
  EXPECT_LT(worst, 1e-8);
}

TEST(PredictNarx, CausalityUnderInputPerturbation) {
  const auto d = sim_series(10, 200);
  NarxFitOptions o;
  o.degree = 2;
  const LagSpec spec{{1, 2}, {{0, 1}}};
  const auto m = fit_narx({d}, spec, o);
  const Series init(d.output.begin(), d.output.begin() + 2);
  const auto base = predict_narx(m, d.inputs, init);
  for (std::size_t t0 : {50u, 700u, 1500u}) {
    auto x = d.inputs;
    x[0][t0] += 0.5;
    const auto p = predict_narx(m, x, init);
    for (std::size_t t = 0; t < t0; ++t) ASSERT_EQ(p[t], base[t]) << t0 << " " << t;
    EXPECT_NE(p[t0], base[t0]);
  }
}

TEST(PredictNarx, DivergenceIsReportedWithIndex) {
  NarxModel m;
  m.lags = LagSpec{{1}, {{0}}};
  m.degree = 2;
  m.multi_indices = monomial_set(2, 2);
  m.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.multi_indices.size()));
  m.coefficients[3] = 1.5;  // y(t-1)^2
  m.output_min = 0;
  m.output_max = 1;
  try {
    predict_narx(m, {Series(200, 0.0)}, Series{2.0});
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("index"), std::string::npos);
  }
  EXPECT_THROW(predict_narx(m, {Series(200, 0.0)}, Series{}), DomainError);
  // A low-degree fit on a strongly nonlinear series stays finite or throws.
  const auto d = sim_series(11, 200);
  const auto lin = fit_narx({d}, LagSpec{{1}, {{0}}}, {});
  try {
    for (double v : predict_narx(lin, d.inputs, Series{d.output[0]})) ASSERT_TRUE(std::isfinite(v));
  } catch (const DivergenceError&) {
  }
}

TEST(NarxJson, RoundTrip) {
  NarxFitOptions o;
  o.degree = 2;
  o.channel_names = {"wind"};
  const auto d = sim_series(12, 100);
  const auto m = fit_narx({d}, LagSpec{{1, 2}, {{0, 1}}}, o);
  const auto back = narx_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.lags, m.lags);
  EXPECT_EQ(back.multi_indices, m.multi_indices);
  EXPECT_EQ(back.channel_names, m.channel_names);
  const Series init(d.output.begin(), d.output.begin() + 2);
  EXPECT_EQ(predict_narx(back, d.inputs, init), predict_narx(m, d.inputs, init));
  auto bad = to_json(m);
  bad["coefficients"].push_back(1.0);
  EXPECT_THROW(narx_from_json(bad), ParseError);
}

TEST(Manifold, SingleAnalyticStage) {
  const Series wind{1, 2, 3, 4, 5, 6};
  ManifoldStage s{"wind_lp", StageBuilder::analytic_map, {"wind"}, moving_average_map(3), {}, {}};
  const auto z = build_manifold({s}, {"wind"}, {wind});
  EXPECT_EQ(z.names, (std::vector<std::string>{"wind", "wind_lp"}));
  EXPECT_EQ(z.at("wind_lp"), (Series{1, 1.5, 2, 3, 4, 5}));
}

TEST(Manifold, OrderIndependentOfDeclaration) {
  const Series wind{1, 4, 2, 8, 5, 7};
  ManifoldStage a{"lp", StageBuilder::analytic_map, {"wind"}, moving_average_map(2), {}, {}};
  ManifoldStage b{"sq", StageBuilder::analytic_map, {"lp"}, pointwise_map([](double v) { return v * v; }), {}, {}};
  const auto z1 = build_manifold({a, b}, {"wind"}, {wind});
  const auto z2 = build_manifold({b, a}, {"wind"}, {wind});
  EXPECT_EQ(z1.names, z2.names);
  EXPECT_EQ(z1.channels, z2.channels);
  EXPECT_EQ(z1.at("sq")[1], 2.5 * 2.5);

  ManifoldStage c{"c", StageBuilder::analytic_map, {"missing"}, moving_average_map(2), {}, {}};
  try {
    build_manifold({a, c}, {"wind"}, {wind});
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.field(), "c");
  }
  ManifoldStage p{"p", StageBuilder::analytic_map, {"q"}, moving_average_map(2), {}, {}};
  ManifoldStage q{"q", StageBuilder::analytic_map, {"p"}, moving_average_map(2), {}, {}};
  EXPECT_THROW(build_manifold({p, q}, {"wind"}, {wind}), DependencyError);
}

TEST(Manifold, NarxSubmodelStageDoesNotDegradeFinalFit) {
  const auto sim = site_a_like_sim();
  std::vector<NarxSeries> design;
  for (std::uint64_t s = 0; s < 3; ++s) design.push_back(sim_series(100 + s, 600));

  // Stage: emulated static load from wind, trained then frozen.
  std::vector<NarxSeries> stage_design;
  for (const auto& d : design) {
    Series f(d.inputs[0].size());
    for (std::size_t t = 0; t < f.size(); ++t) f[t] = static_load(sim, d.inputs[0][t]);
    stage_design.push_back({d.inputs, f});
  }
  NarxFitOptions so;
  so.degree = 3;
  const auto stage_model = fit_narx(stage_design, LagSpec{{}, {{0}}}, so);
  ManifoldStage stage{"load", StageBuilder::narx_submodel, {"wind"}, {}, stage_model, {}};

  std::vector<NarxSeries> augmented;
  for (const auto& d : design) {
    const auto z = build_manifold({stage}, {"wind"}, d.inputs);
    augmented.push_back({z.channels, d.output});
  }
  NarxFitOptions o;
  o.degree = 2;
  const auto plain = fit_narx(design, LagSpec{{1, 2}, {{0, 1}}}, o);
  const auto with_stage = fit_narx(augmented, LagSpec{{1, 2}, {{0, 1}, {1}}}, o);
  EXPECT_LE(with_stage.training_rmse, plain.training_rmse);
  EXPECT_LE(one_step_rmse(with_stage, augmented), one_step_rmse(plain, design) * (1 + 1e-12));
}

TEST(DesignFiles, CsvRoundTrip) {
  const auto d = linear_system(20, 13);
  std::ostringstream os;
  write_design_csv(os, {"x"}, d);
  const std::string dir = testing::TempDir() + "/narx_design";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir + "/a.csv");
    f << os.str();
  }
  std::vector<std::string> names;
  const auto back = read_design_dir(dir, &names);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(names, (std::vector<std::string>{"x"}));
  EXPECT_EQ(back[0].output, d.output);
  EXPECT_EQ(back[0].inputs, d.inputs);
  EXPECT_THROW(read_design_dir(dir + "/none"), ValidationError);
}
