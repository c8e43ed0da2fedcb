// extremis: command-line front end.

#include "extremis/extremis.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace extremis;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path, "out");
  return f;
}

// Writes to the file when a path is given, else to stdout.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
  } else {
    auto f = open_out(path);
    fn(f);
  }
}

Condition parse_condition(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ParseError("condition must be 'u,sigma_u'", "cond");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ParseError("condition must be 'u,sigma_u'", "cond");
  }
}

// "a..b" is the half-open seed range [a, b); a single number is one seed.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  try {
    const auto dots = s.find("..");
    if (dots == std::string::npos) {
      const auto v = std::stoull(s);
      return {v, v + 1};
    }
    const auto a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
    if (b <= a) throw ParseError("seed range must satisfy a < b", "seeds");
    return {a, b};
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("seeds must be 'a..b' or a single seed", "seeds");
  }
}

std::pair<double, double> parse_crop(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ParseError("crop must be 'u_min:u_max'", "crop");
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ParseError("crop must be 'u_min:u_max'", "crop");
  }
}

std::vector<double> parse_list(const std::string& s, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ParseError("'" + item + "' is not a number", field);
    }
  }
  return out;
}

// One value per line; a header is skipped. With several columns the column
// named max_response_mnm is used, else the last one.
std::vector<double> read_samples(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open samples file " + path, "samples");
  std::vector<double> out;
  std::string line;
  long col = -1;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (col < 0) {
      col = static_cast<long>(cells.size()) - 1;
      bool header = false;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "max_response_mnm") col = static_cast<long>(i);
        try {
          std::size_t pos = 0;
          std::stod(cells[i], &pos);
          if (pos != cells[i].size()) header = true;
        } catch (const std::exception&) {
          header = true;
        }
      }
      if (header) continue;
    }
    if (col >= static_cast<long>(cells.size()))
      throw ParseError(path + ":" + std::to_string(lineno) + ": missing column", "samples");
    try {
      out.push_back(std::stod(cells[static_cast<std::size_t>(col)]));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": not a number", "samples");
    }
  }
  return out;
}

nlohmann::json read_json(const std::string& path, const std::string& field) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path, field);
  try {
    nlohmann::json j;
    f >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), field);
  }
}

void print_error(const std::exception& e) { std::cerr << error_json(e).dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"extremis: long-term extreme response estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker threads (EXTREMIS_THREADS overrides)");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::function<void()> action;

  // env -------------------------------------------------------------------
  auto* env_cmd = app.add_subcommand("env", "environmental model");
  env_cmd->require_subcommand(1);
  std::string env_cfg = "site-a-like", out;
  std::size_t n = 1000;
  std::uint64_t seed = 7;
  auto* env_sample = env_cmd->add_subcommand("sample", "draw conditions (u, sigma_u)");
  env_sample->add_option("--config", env_cfg, "env config path or preset name");
  env_sample->add_option("--n", n, "number of draws");
  env_sample->add_option("--seed", seed, "master seed");
  env_sample->add_option("--out", out, "output CSV (u,sigma_u)");
  env_sample->callback([&] {
    action = [&] {
      const EnvModel m = load_env_config(env_cfg);
      Stream rng = make_stream(seed, "env-sample");
      emit(out, [&](std::ostream& os) {
        os.precision(17);
        os << "u,sigma_u\n";
        for (std::size_t i = 0; i < n; ++i) {
          const auto x = sample_condition(m, rng);
          os << x.u << ',' << x.sigma_u << '\n';
        }
      });
    };
  });
  auto* env_show = env_cmd->add_subcommand("show", "validate a config and print it normalized");
  env_show->add_option("--config", env_cfg, "env config path or preset name");
  env_show->callback([&] {
    action = [&] { std::cout << to_json(load_env_config(env_cfg)).dump(2) << '\n'; };
  });

  // sim -------------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("sim", "synthetic short-term simulator");
  std::string sim_preset = "site-a-like", cond_text = "12,3", seeds_text = "0..100", series_out;
  int blocks = 1;
  double duration = 600.0, dt = 0.05;
  sim_cmd->add_option("--sim", sim_preset, "preset name or JSON file");
  sim_cmd->add_option("--cond", cond_text, "condition u,sigma_u");
  sim_cmd->add_option("--seeds", seeds_text, "seed range a..b (half-open) or one seed");
  sim_cmd->add_option("--blocks", blocks, "10-minute blocks per sample (maximum taken)");
  sim_cmd->add_option("--out", out, "output CSV (seed,max_response_mnm)");
  sim_cmd->add_option("--series", series_out, "also write the time series of the first seed to this CSV");
  sim_cmd->add_option("--duration", duration, "time-series duration [s]");
  sim_cmd->add_option("--dt", dt, "time-series step [s]");
  sim_cmd->callback([&] {
    action = [&] {
      const SimPreset p = load_sim_preset(sim_preset);
      const Condition c = parse_condition(cond_text);
      const auto [a, b] = parse_seed_range(seeds_text);
      std::size_t retries = 0;
      emit(out, [&](std::ostream& os) {
        os.precision(17);
        os << "seed,max_response_mnm\n";
        for (std::uint64_t s = a; s < b; ++s) {
          const auto r = simulate_with_retry(c, s, p, blocks);
          retries += static_cast<std::size_t>(r.retries);
          os << s << ',' << r.value << '\n';
        }
      });
      if (retries && !quiet) std::cerr << "note: " << retries << " simulator failures retried with new seeds\n";
      if (!series_out.empty()) {
        const auto s = simulate_timeseries(c, a, duration, dt, p);
        auto f = open_out(series_out);
        f.precision(17);
        f << "t,wind,y\n";
        for (std::size_t i = 0; i < s.y.size(); ++i) f << s.t[i] << ',' << s.wind[i] << ',' << s.y[i] << '\n';
      }
    };
  });

  // contour ---------------------------------------------------------------
  auto* contour_cmd = app.add_subcommand("contour", "environmental contour");
  std::string method = "iform", crop_text = "3:25";
  double years = 50.0;
  std::size_t points = 72, ds_samples = 10000000;
  contour_cmd->add_option("--config", env_cfg, "env config path or preset name");
  contour_cmd->add_option("--method", method, "iform or ds");
  contour_cmd->add_option("--years", years, "return period [years]");
  contour_cmd->add_option("--points", points, "contour points (angles)");
  contour_cmd->add_option("--crop", crop_text, "operational band u_min:u_max ('none' keeps all)");
  contour_cmd->add_option("--samples", ds_samples, "direct-sampling sample count");
  contour_cmd->add_option("--seed", seed, "master seed (ds)");
  bool raw_axes = false;
  contour_cmd->add_flag("--raw-axes", raw_axes, "ds: space directions uniformly in raw (u, sigma_u) instead of standardized axes");
  contour_cmd->add_option("--out", out, "output CSV (theta_deg,u,sigma_u)");
  contour_cmd->callback([&] {
    action = [&] {
      const EnvModel m = load_env_config(env_cfg);
      const double pe = exceedance_probability(years, m.state_duration_hours);
      Contour c;
      if (method == "iform") {
        c = iform_contour(m, pe, points);
      } else if (method == "ds") {
        Stream rng = make_stream(seed, "ds-samples", {0});
        c = ds_contour(m, ds_samples, pe, points, rng, !raw_axes);
      } else {
        throw ValidationError("method: expected iform or ds, got '" + method + "'", "method");
      }
      c.return_period_years = years;
      if (crop_text != "none") {
        const auto [lo, hi] = parse_crop(crop_text);
        c = crop_contour(c, lo, hi);
      }
      emit(out, [&](std::ostream& os) { write_contour_csv(c, os); });
      if (!quiet) std::cerr << "pe=" << pe << " points=" << c.points.size() << '\n';
    };
  });

  // contour-response ------------------------------------------------------
  auto* cr_cmd = app.add_subcommand("contour-response", "short-term extreme responses along a contour");
  std::string contour_path, quantiles_text = "0.5,0.9,0.99";
  std::size_t n_seeds = 18;
  cr_cmd->add_option("--contour", contour_path, "contour CSV")->required();
  cr_cmd->add_option("--sim", sim_preset, "preset name or JSON file");
  cr_cmd->add_option("--seeds", n_seeds, "seeds per contour point");
  cr_cmd->add_option("--quantiles", quantiles_text, "comma-separated quantile levels");
  cr_cmd->add_option("--blocks", blocks, "10-minute blocks per state");
  cr_cmd->add_option("--seed", seed, "master seed");
  cr_cmd->add_option("--out", out, "output CSV (u,sigma_u,quantile,response_mnm)");
  cr_cmd->callback([&] {
    action = [&] {
      std::ifstream f(contour_path);
      if (!f) throw ValidationError("cannot open contour " + contour_path, "contour");
      const Contour c = read_contour_csv(f);
      const SimPreset p = load_sim_preset(sim_preset);
      const auto t = contour_extreme_response(c, p, n_seeds, parse_list(quantiles_text, "quantiles"), seed, blocks,
                                              resolve_threads(threads));
      emit(out, [&](std::ostream& os) { write_response_csv(t, os); });
      if (!quiet)
        for (const auto& m : t.maxima)
          std::cerr << "q=" << m.quantile << " max=" << m.response << " at u=" << m.argmax.u
                    << " sigma_u=" << m.argmax.sigma_u << '\n';
    };
  });

  // fit -------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Gaussian likelihood approximation of block maxima");
  std::string samples_path, family = "gumbel";
  double tol = 0.01;
  std::string fit_cond;
  fit_cmd->add_option("--samples", samples_path, "CSV of block maxima")->required();
  fit_cmd->add_option("--family", family, "gumbel or gev");
  fit_cmd->add_option("--tol", tol, "relative convergence tolerance");
  fit_cmd->add_option("--seed", seed, "MCMC seed");
  fit_cmd->add_option("--cond", fit_cond, "condition u,sigma_u recorded with the fit (needed by gp fit)");
  fit_cmd->add_option("--out", out, "output JSON");
  fit_cmd->callback([&] {
    action = [&] {
      const auto y = read_samples(samples_path);
      LikelihoodApproxOptions o;
      o.rel_tol = tol;
      const auto fit = gaussian_likelihood_approx(y, parse_family(family), derive_seed(seed, "cli-fit"), o);
      auto j = to_json(fit);
      if (!fit_cond.empty()) {
        const auto c = parse_condition(fit_cond);
        j["u"] = c.u;
        j["sigma_u"] = c.sigma_u;
      }
      emit(out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    };
  });

  // gp --------------------------------------------------------------------
  auto* gp_cmd = app.add_subcommand("gp", "Gaussian-process surrogate of fit parameters");
  gp_cmd->require_subcommand(1);
  std::string fits_dir, model_path;
  auto* gp_fit = gp_cmd->add_subcommand("fit", "train on a directory of fit records");
  gp_fit->add_option("--fits", fits_dir, "directory of fit JSON files with u and sigma_u")->required();
  gp_fit->add_option("--out", out, "model JSON");
  gp_fit->callback([&] {
    action = [&] {
      std::vector<fs::path> files;
      if (!fs::is_directory(fits_dir)) throw ValidationError("fits directory " + fits_dir + " does not exist", "fits");
      for (const auto& e : fs::directory_iterator(fits_dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::vector<GpTrainingPoint> pts;
      for (const auto& p : files) {
        const auto j = read_json(p.string(), "fits");
        if (!j.contains("u") || !j.contains("sigma_u"))
          throw ValidationError(p.string() + ": fit record lacks u/sigma_u (use fit --cond)", "fits");
        const auto fit = short_term_fit_from_json(j);
        pts.push_back({{j.at("u").get<double>(), j.at("sigma_u").get<double>()}, fit.mean, fit.cov});
      }
      const auto g = fit_gp(pts);
      emit(out, [&](std::ostream& os) { os << to_json(g).dump(1) << '\n'; });
    };
  });
  auto* gp_predict = gp_cmd->add_subcommand("predict", "posterior mean and sd at a condition");
  gp_predict->add_option("--model", model_path, "model JSON")->required();
  gp_predict->add_option("--cond", cond_text, "condition u,sigma_u");
  gp_predict->callback([&] {
    action = [&] {
      const auto g = gp_from_json(read_json(model_path, "model"));
      const auto p = g.posterior(parse_condition(cond_text));
      nlohmann::json j = {{"mean", std::vector<double>(p.mean.begin(), p.mean.end())},
                          {"sd", std::vector<double>(p.sd.begin(), p.sd.end())}};
      std::cout << j.dump() << '\n';
    };
  });

  // narx ------------------------------------------------------------------
  auto* narx_cmd = app.add_subcommand("narx", "polynomial NARX surrogate");
  narx_cmd->require_subcommand(1);
  std::string design_dir, lags_text = "y:1,2;x:0,1";
  int degree = 2;
  double reg = 0.0;
  auto* narx_fit = narx_cmd->add_subcommand("fit", "fit on a directory of design CSVs");
  narx_fit->add_option("--design", design_dir, "directory of CSV files (inputs..., y)")->required();
  narx_fit->add_option("--lags", lags_text, "lag spec, e.g. y:1,2;x:0,1");
  narx_fit->add_option("--degree", degree, "maximum total degree");
  narx_fit->add_option("--reg", reg, "ridge regularization");
  narx_fit->add_option("--out", out, "model JSON");
  narx_fit->callback([&] {
    action = [&] {
      std::vector<std::string> names;
      const auto design = read_design_dir(design_dir, &names);
      NarxFitOptions o;
      o.degree = degree;
      o.regularization = reg;
      o.channel_names = names;
      const auto m = fit_narx(design, parse_lag_spec(lags_text), o);
      emit(out, [&](std::ostream& os) { os << to_json(m).dump(1) << '\n'; });
      if (!quiet) std::cerr << "one-step rmse=" << m.training_rmse << '\n';
    };
  });
  auto* narx_predict = narx_cmd->add_subcommand("predict", "free-running prediction on design CSVs");
  narx_predict->add_option("--model", model_path, "model JSON")->required();
  narx_predict->add_option("--design", design_dir, "directory of CSV files (inputs..., y)")->required();
  narx_predict->add_option("--out", out, "output CSV (file,t,y,y_pred)");
  narx_predict->callback([&] {
    action = [&] {
      const auto m = narx_from_json(read_json(model_path, "model"));
      std::vector<fs::path> files;
      if (!fs::is_directory(design_dir))
        throw ValidationError("design directory " + design_dir + " does not exist", "design");
      for (const auto& e : fs::directory_iterator(design_dir))
        if (e.path().extension() == ".csv") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      emit(out, [&](std::ostream& os) {
        os.precision(17);
        os << "file,t,y,y_pred\n";
        for (const auto& p : files) {
          const auto d = read_design_csv(p.string());
          const std::size_t k = static_cast<std::size_t>(m.lags.max_lag());
          if (d.output.size() < k) throw ValidationError(p.string() + " is shorter than the largest lag", "design");
          const auto yp = predict_narx(m, d.inputs, std::span<const double>(d.output.data(), k));
          for (std::size_t t = 0; t < yp.size(); ++t)
            os << p.filename().string() << ',' << t << ',' << d.output[t] << ',' << yp[t] << '\n';
        }
      });
    };
  });

  // seq -------------------------------------------------------------------
  auto* seq_cmd = app.add_subcommand("seq", "sequential-sampling estimator");
  SequentialOptions so;
  std::string checkpoint, exceed_out, gp_out, norm_text = "euclidean";
  bool resume = false, no_stop = false;
  seq_cmd->add_option("--env", env_cfg, "env config path or preset name");
  seq_cmd->add_option("--sim", sim_preset, "preset name or JSON file");
  seq_cmd->add_option("--family", family, "gumbel or gev");
  seq_cmd->add_option("--seeds", so.n_seeds, "short-term seeds per training point");
  seq_cmd->add_option("--iters", so.max_iters, "maximum iterations");
  seq_cmd->add_option("--years", so.years, "long-term years per iteration");
  seq_cmd->add_option("--init-design", so.init_design, "initial design size");
  seq_cmd->add_option("--candidates", so.n_candidates, "fresh acquisition candidates");
  seq_cmd->add_option("--kde-candidates", so.n_kde_candidates, "acquisition candidates drawn from the exceedance KDE");
  seq_cmd->add_option("--pf-threshold", so.pf_threshold, "failure threshold [MNm]");
  seq_cmd->add_option("--sigma-norm", norm_text, "euclidean, product or max");
  seq_cmd->add_flag("--resample", so.resample_conditions, "redraw the long-term conditions every iteration");
  seq_cmd->add_flag("--no-stop", no_stop, "run all iterations (ignore the convergence rule)");
  seq_cmd->add_option("--seed", so.master_seed, "master seed");
  seq_cmd->add_option("--checkpoint", checkpoint, "checkpoint JSON written after each iteration");
  seq_cmd->add_flag("--resume", resume, "resume from --checkpoint when it exists");
  seq_cmd->add_option("--exceedances", exceed_out, "write the last exceedance conditions to this CSV");
  seq_cmd->add_option("--gp-out", gp_out, "write the final GP model to this JSON");
  seq_cmd->add_option("--out", out, "history CSV");
  seq_cmd->callback([&] {
    action = [&] {
      const EnvModel m = load_env_config(env_cfg);
      const SimPreset p = load_sim_preset(sim_preset);
      so.family = parse_family(family);
      so.norm = parse_sigma_norm(norm_text);
      so.stop_on_convergence = !no_stop;
      so.threads = resolve_threads(threads);
      so.checkpoint_path = checkpoint;
      so.resume = resume;
      so.settings_hash = json_hash({{"env", to_json(m)},
                                    {"sim", to_json(p)},
                                    {"family", family},
                                    {"seeds", so.n_seeds},
                                    {"years", so.years},
                                    {"init_design", so.init_design},
                                    {"seed", so.master_seed}});
      const auto res = run_sequential(m, p, so, [&](const HistoryRecord& r) {
        if (!quiet)
          std::cerr << "iter " << r.iter << " rv50=" << r.rv50 << " rv100=" << r.rv100 << " pf=" << r.pf
                    << " x_new=(" << r.x_new.u << ", " << r.x_new.sigma_u << ")\n";
      });
      emit(out, [&](std::ostream& os) { write_history_csv(os, res.history); });
      if (!exceed_out.empty()) {
        auto f = open_out(exceed_out);
        f.precision(17);
        f << "u,sigma_u\n";
        for (const auto& x : res.last_exceedances) f << x.u << ',' << x.sigma_u << '\n';
      }
      if (!gp_out.empty()) open_out(gp_out) << to_json(*res.gp).dump(1) << '\n';
    };
  });

  // brute -----------------------------------------------------------------
  auto* brute_cmd = app.add_subcommand("brute", "truncated brute-force Monte Carlo");
  BruteForceOptions bo;
  brute_cmd->add_option("--env", env_cfg, "env config path or preset name");
  brute_cmd->add_option("--sim", sim_preset, "preset name or JSON file");
  brute_cmd->add_option("--years", bo.years, "simulated years");
  brute_cmd->add_option("--cutoff-u", bo.truncation.cutoff_u, "zero response below this mean wind speed");
  brute_cmd->add_option("--cutoff-sigma", bo.truncation.cutoff_sigma, "zero response below this turbulence");
  brute_cmd->add_option("--pf-threshold", bo.pf_threshold, "failure threshold [MNm]");
  brute_cmd->add_option("--seed", bo.master_seed, "master seed");
  brute_cmd->add_option("--out", out, "output JSON");
  brute_cmd->callback([&] {
    action = [&] {
      bo.threads = resolve_threads(threads);
      const auto r = brute_force_return_values(load_env_config(env_cfg), load_sim_preset(sim_preset), bo);
      emit(out, [&](std::ostream& os) { os << to_json(r).dump(2) << '\n'; });
    };
  });

  // run -------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  std::string config_path, out_dir = "out";
  run_cmd->add_option("--config", config_path, "experiment JSON")->required();
  run_cmd->add_option("--out-dir", out_dir, "output directory");
  run_cmd->callback([&] {
    action = [&] {
      auto cfg = load_experiment_config(config_path);
      if (threads > 1 || cfg.threads == 0) cfg.threads = threads;
      const auto s = run_experiment(cfg, out_dir, [&](const std::string& msg) {
        if (!quiet) std::cerr << msg << '\n';
      });
      std::cout << s.at("estimates").dump() << '\n';
    };
  });

  // compare ---------------------------------------------------------------
  auto* cmp_cmd = app.add_subcommand("compare", "side-by-side comparison of experiment summaries");
  std::vector<std::string> summaries;
  cmp_cmd->add_option("summaries", summaries, "summary.json files");
  cmp_cmd->add_option("--out", out, "output CSV");
  cmp_cmd->callback([&] {
    action = [&] {
      std::vector<nlohmann::json> js;
      for (const auto& s : summaries) js.push_back(load_summary(s));
      const auto rows = compare_runs(js);
      emit(out, [&](std::ostream& os) { write_comparison_csv(os, rows); });
    };
  });

  // demo ------------------------------------------------------------------
  auto* demo_cmd = app.add_subcommand("demo", "reduced-scale comparison pipeline");
  std::string which;
  demo_cmd->add_option("preset", which, "site-a or brittany")->required();
  demo_cmd->add_option("--out-dir", out_dir, "output directory");
  demo_cmd->add_option("--seed", seed, "master seed");
  demo_cmd->callback([&] {
    action = [&] {
      std::vector<nlohmann::json> js;
      for (auto cfg : demo_configs(which, seed)) {
        cfg.threads = resolve_threads(threads);
        if (!quiet) std::cerr << "== " << cfg.name << '\n';
        js.push_back(run_experiment(cfg, (fs::path(out_dir) / cfg.name).string(), [&](const std::string& msg) {
          if (!quiet) std::cerr << msg << '\n';
        }));
      }
      const auto rows = compare_runs(js);
      std::ofstream f = open_out((fs::path(out_dir) / "comparison.csv").string());
      write_comparison_csv(f, rows);
      write_comparison_csv(std::cout, rows);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", {{"kind", "usage"}, {"field", ""}, {"message", e.what()}}}}.dump()
              << std::endl;
    return 2;
  }
  try {
    if (action) action();
  } catch (const std::exception& e) {
    print_error(e);
    return 2;
  }
  return 0;
}
