#pragma once

// Named, reproducible experiments: one JSON config in, a summary JSON plus
// CSV tables out.

#include "extremis/brute_force.hpp"
#include "extremis/contour.hpp"
#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/random.hpp"
#include "extremis/response_sim.hpp"
#include "extremis/return_values.hpp"
#include "extremis/seq_sampling.hpp"
#include "extremis/version.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace extremis {

enum class Method { iform, ds, sequential, brute };

inline Method parse_method(const std::string& s) {
  if (s == "iform") return Method::iform;
  if (s == "ds") return Method::ds;
  if (s == "sequential") return Method::sequential;
  if (s == "brute") return Method::brute;
  throw ValidationError("method: expected iform, ds, sequential or brute, got '" + s + "'", "method");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::iform: return "iform";
    case Method::ds: return "ds";
    case Method::sequential: return "sequential";
    case Method::brute: return "brute";
  }
  return "iform";
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// FNV-1a of the canonical (key-sorted, compact) JSON text.
inline std::string json_hash(const nlohmann::json& j) { return hex64(hash_tag(j.dump())); }

struct ExperimentConfig {
  std::string name;
  std::string env = "site-a-like";
  std::string sim = "site-a-like";
  Method method = Method::iform;
  std::uint64_t seed = 7;
  nlohmann::json params = nlohmann::json::object();  // defaults filled in
  unsigned threads = 1;                              // never affects results
};

namespace detail {

inline const std::set<std::string>& allowed_params(Method m) {
  static const std::set<std::string> contour = {"years", "points", "crop", "seeds", "quantiles", "fractile",
                                                "ds_samples", "ds_standardize", "bootstrap"};
  static const std::set<std::string> seq = {"years",          "seeds",          "iterations",    "init_design",
                                            "family",         "pf_threshold",   "convergence",   "candidates",
                                            "kde_candidates", "sigma_norm",     "resample",      "grid",
                                            "bootstrap",      "fit_tolerance",  "keep_per_year"};
  static const std::set<std::string> brute = {"years", "cutoff_u", "cutoff_sigma", "pf_threshold", "bootstrap",
                                              "bootstrap_blocks"};
  switch (m) {
    case Method::iform:
    case Method::ds: return contour;
    case Method::sequential: return seq;
    case Method::brute: return brute;
  }
  return contour;
}

inline nlohmann::json default_params(Method m) {
  using nlohmann::json;
  switch (m) {
    case Method::iform:
    case Method::ds:
      return {{"years", json::array({50, 100})},
              {"points", 72},
              {"crop", json::array({3.0, 25.0})},
              {"seeds", 18},
              {"quantiles", json::array({0.5, 0.9, 0.99})},
              {"fractile", 0.9},
              {"ds_samples", 10000000},
              {"ds_standardize", true},
              {"bootstrap", 500}};
    case Method::sequential:
      return {{"years", 10000},      {"seeds", 18},           {"iterations", 40},     {"init_design", 8},
              {"family", "gumbel"},  {"pf_threshold", 27.112}, {"convergence", true}, {"candidates", 100000},
              {"kde_candidates", 10000}, {"sigma_norm", "euclidean"}, {"resample", false}, {"grid", true},
              {"bootstrap", 500},    {"fit_tolerance", 0.01},  {"keep_per_year", 16}};
    case Method::brute:
      return {{"years", 10000},      {"cutoff_u", 0.0},       {"cutoff_sigma", 0.0},
              {"pf_threshold", 27.112}, {"bootstrap", 500},   {"bootstrap_blocks", 10}};
  }
  return json::object();
}

template <class T>
T param(const nlohmann::json& p, const char* key) {
  try {
    return p.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("params.") + key + " has the wrong type", std::string("params.") + key);
  }
}

inline std::vector<double> return_periods(const nlohmann::json& p) {
  const auto& y = p.at("years");
  std::vector<double> out;
  if (y.is_number())
    out.push_back(y.get<double>());
  else if (y.is_array())
    for (const auto& v : y) {
      if (!v.is_number()) throw ValidationError("params.years must hold numbers", "params.years");
      out.push_back(v.get<double>());
    }
  else
    throw ValidationError("params.years must be a number or an array", "params.years");
  if (out.empty()) throw ValidationError("params.years is empty", "params.years");
  for (double t : out)
    if (!(t > 0.0)) throw ValidationError("params.years must be > 0", "params.years");
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("experiment config must be a JSON object", "");
  static const std::set<std::string> top = {"name", "env", "sim", "method", "seed", "params", "threads"};
  for (const auto& [k, v] : j.items())
    if (!top.count(k)) throw ValidationError("unknown config key '" + k + "'", k);
  ExperimentConfig c;
  try {
    c.name = j.value("name", std::string("experiment"));
    c.env = j.value("env", c.env);
    c.sim = j.value("sim", c.sim);
    if (!j.contains("method")) throw ValidationError("method is required", "method");
    if (!j.at("method").is_string()) throw ValidationError("method must be a string", "method");
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", 1u);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what(), "");
  }
  c.method = parse_method(j.at("method").get<std::string>());
  c.params = detail::default_params(c.method);
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw ValidationError("params must be an object", "params");
    for (const auto& [k, v] : j.at("params").items()) {
      if (!detail::allowed_params(c.method).count(k))
        throw ValidationError("unknown parameter '" + k + "' for method " + to_string(c.method), "params." + k);
      c.params[k] = v;
    }
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open experiment config " + path, "config");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what(), "config");
  }
  return parse_experiment_config(j);
}

// Config echo: everything that determines the results (thread count excluded).
inline nlohmann::json config_echo(const ExperimentConfig& c) {
  return {{"name", c.name}, {"env", c.env}, {"sim", c.sim}, {"method", to_string(c.method)}, {"seed", c.seed},
          {"params", c.params}};
}

inline nlohmann::json error_json(const std::exception& e) {
  if (const auto* x = dynamic_cast<const Error*>(&e))
    return {{"error", {{"kind", x->kind()}, {"field", x->field()}, {"message", x->what()}}}};
  return {{"error", {{"kind", "internal"}, {"field", ""}, {"message", e.what()}}}};
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ValidationError("cannot write " + p.string(), "out");
  f << text;
}

inline std::string hash_line(const std::string& config_hash) { return "# config_hash=" + config_hash + "\n"; }

inline nlohmann::json interval_json(std::pair<double, double> ci) { return nlohmann::json::array({ci.first, ci.second}); }

}  // namespace detail

using ExperimentProgress = std::function<void(const std::string&)>;

// Runs the experiment, writes its files to out_dir and returns the summary.
inline nlohmann::json run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                     const ExperimentProgress& progress = {}) {
  namespace fs = std::filesystem;
  const EnvModel env = load_env_config(cfg.env);
  const SimPreset sim = load_sim_preset(cfg.sim);
  const nlohmann::json echo = config_echo(cfg);
  const std::string chash = json_hash(echo);
  const std::string shash = json_hash({{"env", to_json(env)}, {"sim", to_json(sim)}});
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const unsigned threads = resolve_threads(cfg.threads);
  const auto& p = cfg.params;
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  nlohmann::json summary = {{"format", "extremis-summary"},
                            {"code_version", kVersion},
                            {"name", cfg.name},
                            {"method", to_string(cfg.method)},
                            {"config", echo},
                            {"config_hash", chash},
                            {"setting_hash", shash},
                            {"env", to_json(env)},
                            {"sim", to_json(sim)}};
  nlohmann::json estimates = nlohmann::json::object();
  nlohmann::json intervals = nlohmann::json::object();
  nlohmann::json diagnostics = nlohmann::json::object();
  nlohmann::json files = nlohmann::json::array();
  const int blocks = blocks_per_state(sim, env.state_duration_hours);

  switch (cfg.method) {
    case Method::iform:
    case Method::ds: {
      const auto periods = detail::return_periods(p);
      const auto crop = detail::param<std::vector<double>>(p, "crop");
      if (crop.size() != 2) throw ValidationError("params.crop must be [u_min, u_max]", "params.crop");
      const auto quantiles = detail::param<std::vector<double>>(p, "quantiles");
      const double fractile = detail::param<double>(p, "fractile");
      if (std::find_if(quantiles.begin(), quantiles.end(), [&](double q) { return std::abs(q - fractile) < 1e-12; }) ==
          quantiles.end())
        throw ValidationError("params.fractile must be one of params.quantiles", "params.fractile");
      const auto n_points = detail::param<std::size_t>(p, "points");
      const auto n_seeds = detail::param<std::size_t>(p, "seeds");
      const auto n_boot = detail::param<std::size_t>(p, "bootstrap");
      nlohmann::json table = nlohmann::json::array();
      for (std::size_t ti = 0; ti < periods.size(); ++ti) {
        const double T = periods[ti];
        const double pe = exceedance_probability(T, env.state_duration_hours);
        say("contour T=" + std::to_string(T));
        Contour full;
        if (cfg.method == Method::iform) {
          full = iform_contour(env, pe, n_points);
        } else {
          Stream rng = make_stream(cfg.seed, "ds-samples", {ti});
          full = ds_contour(env, detail::param<std::size_t>(p, "ds_samples"), pe, n_points, rng,
                            detail::param<bool>(p, "ds_standardize"));
        }
        full.return_period_years = T;
        const Contour c = crop_contour(full, crop[0], crop[1]);
        const auto resp = contour_extreme_response(c, sim, n_seeds, quantiles, derive_seed(cfg.seed, "contour", {ti}),
                                                   blocks, threads);
        const std::string tag = std::to_string(static_cast<long long>(std::llround(T)));
        {
          std::ostringstream os;
          os << detail::hash_line(chash);
          write_contour_csv(c, os);
          detail::write_text(dir / ("contour_T" + tag + ".csv"), os.str());
          files.push_back("contour_T" + tag + ".csv");
        }
        {
          std::ostringstream os;
          os << detail::hash_line(chash);
          write_response_csv(resp, os);
          detail::write_text(dir / ("response_T" + tag + ".csv"), os.str());
          files.push_back("response_T" + tag + ".csv");
        }
        for (const auto& m : resp.maxima)
          table.push_back({{"return_period", T},
                           {"quantile", m.quantile},
                           {"u", m.argmax.u},
                           {"sigma_u", m.argmax.sigma_u},
                           {"response_mnm", m.response},
                           {"warning", quantile_tail_warning(m.quantile, n_seeds)}});
        Stream brng = make_stream(cfg.seed, "contour-bootstrap", {ti});
        const auto ci = contour_bootstrap_interval(resp, fractile, n_boot, 0.95, brng);
        const double est = resp.at_quantile(fractile).response;
        if (std::abs(T - 50.0) < 1e-9) {
          estimates["rv50"] = est;
          intervals["rv50"] = detail::interval_json(ci);
        } else if (std::abs(T - 100.0) < 1e-9) {
          estimates["rv100"] = est;
          intervals["rv100"] = detail::interval_json(ci);
        }
        estimates["rv_T" + tag] = est;
        intervals["rv_T" + tag] = detail::interval_json(ci);
        diagnostics["contour_points_T" + tag] = c.points.size();
        diagnostics["seed_retries_T" + tag] = resp.retries;
        diagnostics["exceedance_probability_T" + tag] = pe;
      }
      summary["table"] = table;
      break;
    }
    case Method::sequential: {
      SequentialOptions o;
      o.family = parse_family(detail::param<std::string>(p, "family"));
      o.n_seeds = detail::param<std::size_t>(p, "seeds");
      o.init_design = detail::param<std::size_t>(p, "init_design");
      o.max_iters = detail::param<std::size_t>(p, "iterations");
      o.years = detail::param<std::size_t>(p, "years");
      o.master_seed = cfg.seed;
      o.pf_threshold = detail::param<double>(p, "pf_threshold");
      o.stop_on_convergence = detail::param<bool>(p, "convergence");
      o.n_candidates = detail::param<std::size_t>(p, "candidates");
      o.n_kde_candidates = detail::param<std::size_t>(p, "kde_candidates");
      o.norm = parse_sigma_norm(detail::param<std::string>(p, "sigma_norm"));
      o.resample_conditions = detail::param<bool>(p, "resample");
      o.grid.enabled = detail::param<bool>(p, "grid");
      o.fit.rel_tol = detail::param<double>(p, "fit_tolerance");
      o.keep_per_year = detail::param<std::size_t>(p, "keep_per_year");
      o.threads = threads;
      o.settings_hash = chash;
      o.checkpoint_path = (dir / "checkpoint.json").string();
      o.resume = false;
      const auto res = run_sequential(env, sim, o, [&](const HistoryRecord& r) {
        say("iter " + std::to_string(r.iter) + " rv50=" + std::to_string(r.rv50) + " rv100=" + std::to_string(r.rv100));
      });
      {
        std::ostringstream os;
        os << detail::hash_line(chash);
        write_history_csv(os, res.history);
        detail::write_text(dir / "history.csv", os.str());
        files.push_back("history.csv");
      }
      {
        std::ostringstream os;
        os.precision(17);
        os << detail::hash_line(chash) << "u,sigma_u\n";
        for (const auto& x : res.last_exceedances) os << x.u << ',' << x.sigma_u << '\n';
        detail::write_text(dir / "exceedances.csv", os.str());
        files.push_back("exceedances.csv");
      }
      {
        auto gj = to_json(*res.gp);
        gj["config_hash"] = chash;
        detail::write_text(dir / "gp_model.json", gj.dump(1) + "\n");
        files.push_back("gp_model.json");
      }
      files.push_back("checkpoint.json");
      const auto& last = res.history.back();
      estimates = {{"rv50", last.rv50}, {"rv100", last.rv100}, {"pf", last.pf}};
      const auto n_boot = detail::param<std::size_t>(p, "bootstrap");
      Stream brng = make_stream(cfg.seed, "seq-bootstrap");
      const auto b50 = block_bootstrap_return_values(res.last_run.annual_maxima, 50.0, 10, n_boot, brng);
      const auto b100 = block_bootstrap_return_values(res.last_run.annual_maxima, 100.0, 10, n_boot, brng);
      intervals = {{"rv50", detail::interval_json(percentile_interval(b50, 0.95))},
                   {"rv100", detail::interval_json(percentile_interval(b100, 0.95))}};
      diagnostics = {{"iterations", res.history.size()},
                     {"converged", res.converged},
                     {"training_points", res.training.size()},
                     {"n_exceed", last.n_exceed},
                     {"scale_clamps", res.last_run.clamps.scale},
                     {"shape_clamps", res.last_run.clamps.shape},
                     {"discarded_noise_correlation_max", res.gp->discarded_correlation_max()}};
      break;
    }
    case Method::brute: {
      BruteForceOptions o;
      o.years = detail::param<std::size_t>(p, "years");
      o.truncation = {detail::param<double>(p, "cutoff_u"), detail::param<double>(p, "cutoff_sigma")};
      o.master_seed = cfg.seed;
      o.threads = threads;
      o.pf_threshold = detail::param<double>(p, "pf_threshold");
      o.bootstrap_replicates = detail::param<std::size_t>(p, "bootstrap");
      o.bootstrap_blocks = detail::param<std::size_t>(p, "bootstrap_blocks");
      say("brute force, " + std::to_string(o.years) + " years");
      const auto r = brute_force_return_values(env, sim, o);
      estimates = {{"rv50", r.rv50}, {"rv100", r.rv100}, {"pf", r.pf}};
      Stream brng = make_stream(cfg.seed, "brute-interval");
      const auto b50 = block_bootstrap_return_values(r.run.annual_maxima, 50.0, o.bootstrap_blocks,
                                                     o.bootstrap_replicates, brng);
      const auto b100 = block_bootstrap_return_values(r.run.annual_maxima, 100.0, o.bootstrap_blocks,
                                                      o.bootstrap_replicates, brng);
      intervals = {{"rv50", detail::interval_json(percentile_interval(b50, 0.95))},
                   {"rv100", detail::interval_json(percentile_interval(b100, 0.95))}};
      diagnostics = {{"fraction_simulated", r.fraction_simulated},
                     {"bootstrap_se", r.bootstrap_se50},
                     {"bootstrap_se100", r.bootstrap_se100},
                     {"seed_retries", r.retries}};
      {
        std::ostringstream os;
        os.precision(17);
        os << detail::hash_line(chash) << "year,annual_max_mnm\n";
        for (std::size_t y = 0; y < r.run.annual_maxima.size(); ++y) os << y << ',' << r.run.annual_maxima[y] << '\n';
        detail::write_text(dir / "annual_maxima.csv", os.str());
        files.push_back("annual_maxima.csv");
      }
      break;
    }
  }
  summary["estimates"] = estimates;
  summary["intervals"] = intervals;
  summary["diagnostics"] = diagnostics;
  summary["files"] = files;
  detail::write_text(dir / "summary.json", summary.dump(1) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Comparison table.

struct ComparisonRow {
  std::string name;
  std::string method;
  std::optional<double> rv50, rv100, pf;
  std::optional<double> rv50_rel, rv100_rel, pf_rel;
};

inline std::vector<ComparisonRow> compare_runs(const std::vector<nlohmann::json>& summaries) {
  if (summaries.size() < 2)
    throw IncompatibleError("compare needs at least two summaries, got " + std::to_string(summaries.size()),
                            "summaries");
  std::string setting;
  for (const auto& s : summaries) {
    if (!s.is_object() || s.value("format", "") != "extremis-summary")
      throw ParseError("not an extremis summary", "summaries");
    const auto h = s.at("setting_hash").get<std::string>();
    if (setting.empty())
      setting = h;
    else if (h != setting)
      throw IncompatibleError("summaries were produced with different env or sim settings", "setting_hash");
  }
  auto get = [](const nlohmann::json& s, const char* k) -> std::optional<double> {
    const auto& e = s.at("estimates");
    if (e.contains(k) && e.at(k).is_number()) return e.at(k).get<double>();
    return std::nullopt;
  };
  const nlohmann::json* ref = nullptr;
  for (const auto& s : summaries)
    if (s.at("method") == "brute") {
      ref = &s;
      break;
    }
  auto rel = [](std::optional<double> v, std::optional<double> r) -> std::optional<double> {
    if (!v || !r || *r == 0.0) return std::nullopt;
    return (*v - *r) / *r;
  };
  std::vector<ComparisonRow> rows;
  for (const auto& s : summaries) {
    ComparisonRow r{s.at("name").get<std::string>(), s.at("method").get<std::string>(), get(s, "rv50"),
                    get(s, "rv100"), get(s, "pf"), {}, {}, {}};
    if (ref) {
      r.rv50_rel = rel(r.rv50, get(*ref, "rv50"));
      r.rv100_rel = rel(r.rv100, get(*ref, "rv100"));
      r.pf_rel = rel(r.pf, get(*ref, "pf"));
    }
    rows.push_back(r);
  }
  return rows;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os.precision(10);
  os << "name,method,rv50_mnm,rv100_mnm,pf,rv50_rel_diff,rv100_rel_diff,pf_rel_diff\n";
  auto put = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& r : rows) {
    os << r.name << ',' << r.method << ',';
    put(r.rv50);
    os << ',';
    put(r.rv100);
    os << ',';
    put(r.pf);
    os << ',';
    put(r.rv50_rel);
    os << ',';
    put(r.rv100_rel);
    os << ',';
    put(r.pf_rel);
    os << '\n';
  }
}

inline nlohmann::json load_summary(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open summary " + path, "summaries");
  try {
    nlohmann::json j;
    f >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("summary " + path + ": " + e.what(), "summaries");
  }
}

// Reduced-scale comparison pipeline for one preset pair.
inline std::vector<ExperimentConfig> demo_configs(const std::string& which, std::uint64_t seed = 7) {
  if (which != "site-a" && which != "brittany")
    throw ValidationError("demo: expected site-a or brittany, got '" + which + "'", "demo");
  const std::string preset = which + "-like";
  auto make = [&](const std::string& name, const std::string& method, nlohmann::json params) {
    nlohmann::json j = {{"name", name}, {"env", preset}, {"sim", preset}, {"method", method}, {"seed", seed},
                        {"params", std::move(params)}};
    return parse_experiment_config(j);
  };
  return {make("brute", "brute", {{"years", 2000}, {"bootstrap", 200}}),
          make("iform", "iform", {{"years", 50}, {"seeds", 18}}),
          make("sequential", "sequential",
               {{"years", 1000}, {"seeds", 18}, {"iterations", 15}, {"candidates", 20000}, {"kde_candidates", 5000},
                {"bootstrap", 200}})};
}

}  // namespace extremis
