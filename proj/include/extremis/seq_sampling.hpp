#pragma once

// Sequential-sampling estimator: long-term Monte Carlo over a surrogate of the
// short-term extreme-value parameters, exceedance-region KDE, acquisition and
// the outer training loop.

#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/extreme_fit.hpp"
#include "extremis/gp.hpp"
#include "extremis/kde.hpp"
#include "extremis/parallel.hpp"
#include "extremis/random.hpp"
#include "extremis/response_sim.hpp"
#include "extremis/return_values.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace extremis {

struct ExceedanceCandidate {
  Condition x;
  double y = 0.0;
  std::uint32_t year = 0;
};

struct LongTermRun {
  std::size_t years = 0;
  std::size_t states_per_year = 0;
  std::vector<double> annual_maxima;
  // Largest responses of each year (at most keep_per_year), year order.
  std::vector<ExceedanceCandidate> top;
  std::size_t simulated = 0;
  ClampCounters clamps;

  std::size_t total_states() const noexcept { return years * states_per_year; }
  double fraction_simulated() const noexcept {
    return total_states() ? static_cast<double>(simulated) / static_cast<double>(total_states()) : 0.0;
  }

  std::vector<Condition> exceedances(double threshold) const {
    std::vector<Condition> out;
    for (const auto& c : top)
      if (c.y > threshold) out.push_back(c.x);
    return out;
  }

  // The k largest responses; equal responses keep year order.
  std::vector<Condition> top_conditions(std::size_t k) const {
    std::vector<std::size_t> idx(top.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return top[a].y > top[b].y; });
    idx.resize(std::min(k, idx.size()));
    std::vector<Condition> out;
    for (auto i : idx) out.push_back(top[i].x);
    return out;
  }
};

struct LongTermOptions {
  std::size_t years = 10000;
  double u_min = 3.0;
  double u_max = 25.0;
  std::size_t keep_per_year = 16;
  unsigned threads = 1;
};

// floor(365.25 * 24 / state duration), guarded against round-off.
inline std::size_t states_per_year(const EnvModel& env) {
  return static_cast<std::size_t>(std::floor(env.states_per_year() + 1e-9));
}

// Drives the long-term loop year by year. For every in-band condition the
// sampler is called as sampler(x, year, state, response_stream, clamps) and
// returns the state response, or nullopt when the state is not simulated
// (counted as zero). Out-of-band states contribute zero without consuming the
// response stream. Years are independent streams, so the result does not
// depend on the thread count.
template <class Sampler>
LongTermRun simulate_longterm_with(const EnvModel& env, const LongTermOptions& opt, std::uint64_t condition_seed,
                                   std::uint64_t response_seed, Sampler&& sampler) {
  if (opt.years < 1) throw DomainError("simulate_longterm: years must be >= 1", "years");
  const std::size_t n_states = states_per_year(env);
  const std::size_t keep = std::max<std::size_t>(1, opt.keep_per_year);
  struct YearOut {
    double max = 0.0;
    std::size_t simulated = 0;
    ClampCounters clamps;
    std::vector<ExceedanceCandidate> top;
  };
  std::vector<YearOut> per_year(opt.years);
  auto heap_cmp = [](const ExceedanceCandidate& a, const ExceedanceCandidate& b) { return a.y > b.y; };

  parallel_for(opt.years, resolve_threads(opt.threads), [&](std::size_t y) {
    Stream cond = make_stream(condition_seed, "lt-conditions", {y});
    Stream resp = make_stream(response_seed, "lt-response", {y});
    YearOut& out = per_year[y];
    out.top.reserve(keep);
    for (std::size_t i = 0; i < n_states; ++i) {
      const Condition x = sample_condition(env, cond);
      if (x.u < opt.u_min || x.u > opt.u_max) continue;
      const std::optional<double> r = sampler(x, y, i, resp, out.clamps);
      if (!r) continue;
      ++out.simulated;
      const double v = *r;
      out.max = std::max(out.max, v);
      if (out.top.size() < keep) {
        out.top.push_back({x, v, static_cast<std::uint32_t>(y)});
        std::push_heap(out.top.begin(), out.top.end(), heap_cmp);
      } else if (v > out.top.front().y) {
        std::pop_heap(out.top.begin(), out.top.end(), heap_cmp);
        out.top.back() = {x, v, static_cast<std::uint32_t>(y)};
        std::push_heap(out.top.begin(), out.top.end(), heap_cmp);
      }
    }
    std::sort_heap(out.top.begin(), out.top.end(), heap_cmp);
  });

  LongTermRun run;
  run.years = opt.years;
  run.states_per_year = n_states;
  run.annual_maxima.reserve(opt.years);
  for (auto& y : per_year) {
    run.annual_maxima.push_back(y.max);
    run.simulated += y.simulated;
    run.clamps.scale += y.clamps.scale;
    run.clamps.shape += y.clamps.shape;
    run.top.insert(run.top.end(), y.top.begin(), y.top.end());
  }
  return run;
}

// Shifts block-maximum parameters to the maximum of k independent blocks.
inline void shift_to_blocks(double* theta, const EvFamily& f, int k) noexcept {
  if (k <= 1) return;
  const double lk = std::log(static_cast<double>(k));
  const double g = f.kind == EvKind::gev ? theta[2] : 0.0;
  if (std::abs(g) < kShapeSeriesSwitch) {
    theta[0] += theta[1] * lk;
    return;
  }
  const double kg = std::exp(g * lk);
  theta[0] += theta[1] * (kg - 1.0) / g;
  theta[1] *= kg;
}

// Per-state response from the GP surrogate: draw theta from the independent
// normal posteriors, clamp, shift to the state's block count, draw y.
class GpStateSampler {
 public:
  GpStateSampler(const GPModel& gp, EvFamily family, int blocks = 1, const PosteriorGrid* grid = nullptr)
      : gp_(&gp), family_(family), blocks_(blocks), grid_(grid), m_(gp.dim()) {
    if (m_ != family.dim()) throw IncompatibleError("GP output count does not match the family", "family");
  }

  std::optional<double> operator()(const Condition& x, std::size_t, std::size_t, Stream& rng,
                                   ClampCounters& clamps) const {
    double buf[6];
    if (grid_) {
      grid_->eval(x, buf);
    } else {
      const auto p = gp_->posterior(x);
      for (int j = 0; j < m_; ++j) {
        buf[j] = p.mean[j];
        buf[m_ + j] = p.sd[j];
      }
    }
    double theta[3];
    for (int j = 0; j < m_; ++j) theta[j] = buf[j] + buf[m_ + j] * rng.normal();
    if (theta[1] < kScaleFloor) {
      theta[1] = kScaleFloor;
      ++clamps.scale;
    }
    if (m_ == 3 && (theta[2] < family_.shape_min || theta[2] > family_.shape_max)) {
      theta[2] = std::clamp(theta[2], family_.shape_min, family_.shape_max);
      ++clamps.shape;
    }
    shift_to_blocks(theta, family_, blocks_);
    const double l = std::log(-std::log(rng.uniform()));
    const double g = m_ == 3 ? theta[2] : 0.0;
    if (std::abs(g) < kShapeSeriesSwitch) return theta[0] + theta[1] * (-l + 0.5 * g * l * l);
    return theta[0] + theta[1] / g * (std::exp(-g * l) - 1.0);
  }

 private:
  const GPModel* gp_;
  EvFamily family_;
  int blocks_;
  const PosteriorGrid* grid_;
  int m_;
};

// Range of sigma_u holding the central `mass` of the conditional law over the
// u band (scanned on a fine grid).
inline std::pair<double, double> sigma_range(const EnvModel& env, double u_min, double u_max, double mass) {
  const double a = 0.5 * (1.0 - mass);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i <= 220; ++i) {
    const double u = u_min + (u_max - u_min) * i / 220.0;
    lo = std::min(lo, env.conditional_sigma.quantile(a, u));
    hi = std::max(hi, env.conditional_sigma.quantile(1.0 - a, u));
  }
  return {std::max(0.0, lo), hi};
}

struct GridSpec {
  bool enabled = true;
  std::size_t nu = 441;
  std::size_t ns = 301;
};

inline LongTermRun simulate_longterm(const GPModel& gp, const EvFamily& family, const EnvModel& env,
                                     const LongTermOptions& opt, std::uint64_t condition_seed,
                                     std::uint64_t response_seed, int blocks = 1, const GridSpec& grid = {}) {
  std::optional<PosteriorGrid> table;
  if (grid.enabled) {
    const auto [slo, shi] = sigma_range(env, opt.u_min, opt.u_max, 1.0 - 1e-7);
    table.emplace(gp, opt.u_min, opt.u_max, 0.0, std::max(shi, slo + 1e-6), grid.nu, grid.ns);
  }
  GpStateSampler sampler(gp, family, blocks, table ? &*table : nullptr);
  return simulate_longterm_with(env, opt, condition_seed, response_seed, sampler);
}

// ---------------------------------------------------------------------------
// Acquisition.

enum class SigmaNorm { euclidean, product, max };

inline SigmaNorm parse_sigma_norm(const std::string& s) {
  if (s == "euclidean") return SigmaNorm::euclidean;
  if (s == "product") return SigmaNorm::product;
  if (s == "max") return SigmaNorm::max;
  throw ParseError("sigma_norm: expected euclidean, product or max, got '" + s + "'", "sigma_norm");
}

inline std::string to_string(SigmaNorm n) {
  switch (n) {
    case SigmaNorm::euclidean: return "euclidean";
    case SigmaNorm::product: return "product";
    case SigmaNorm::max: return "max";
  }
  return "euclidean";
}

inline double sigma_norm(const Eigen::VectorXd& s, SigmaNorm n) {
  switch (n) {
    case SigmaNorm::euclidean: return s.norm();
    case SigmaNorm::product: return s.prod();
    case SigmaNorm::max: return s.maxCoeff();
  }
  return s.norm();
}

struct AcquisitionResult {
  std::size_t index = 0;
  Condition x;
  double score = 0.0;
};

// argmax over candidates of s(x) * ||sd_theta(x)|| (normalized output space);
// the first maximal candidate wins.
template <class Density>
AcquisitionResult acquisition_argmax(const GPModel& gp, Density&& s, std::span<const Condition> candidates,
                                     SigmaNorm norm = SigmaNorm::euclidean, double u_min = 3.0,
                                     double u_max = 25.0) {
  if (candidates.empty()) throw DomainError("acquisition_argmax: empty candidate set", "candidates");
  AcquisitionResult best{0, candidates[0], -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Condition& x = candidates[i];
    if (x.u < u_min || x.u > u_max)
      throw DomainError("acquisition_argmax: candidate outside the operational band", "candidates");
    const double a = s(x) * sigma_norm(gp.normalized_sd(x), norm);
    if (a > best.score) best = {i, x, a};
  }
  return best;
}

// Band-restricted long-term draws followed by in-band KDE draws.
inline std::vector<Condition> acquisition_candidates(const EnvModel& env, const Kde2* kde, std::size_t n_fresh,
                                                     std::size_t n_kde, Stream& rng, double u_min = 3.0,
                                                     double u_max = 25.0) {
  std::vector<Condition> out;
  out.reserve(n_fresh + n_kde);
  while (out.size() < n_fresh) {
    const Condition x = sample_condition(env, rng);
    if (x.u >= u_min && x.u <= u_max) out.push_back(x);
  }
  if (kde) {
    std::size_t got = 0, tries = 0;
    while (got < n_kde && tries < 100 * n_kde) {
      ++tries;
      const Condition x = kde->sample(rng);
      if (x.u >= u_min && x.u <= u_max && x.sigma_u > 0.0) {
        out.push_back(x);
        ++got;
      }
    }
  }
  return out;
}

// Maximin Latin hypercube over [u_min, u_max] x [s_min, s_max]: the best of
// `tries` random hypercubes by smallest pairwise distance in the unit square.
inline std::vector<Condition> maximin_lhs(std::size_t n, double u_min, double u_max, double s_min, double s_max,
                                          Stream& rng, std::size_t tries = 200) {
  if (n < 1) throw DomainError("maximin_lhs: need n >= 1", "n");
  std::vector<std::array<double, 2>> best;
  double best_d = -1.0;
  std::vector<std::size_t> perm(n);
  for (std::size_t t = 0; t < tries; ++t) {
    std::vector<std::array<double, 2>> pts(n);
    for (int d = 0; d < 2; ++d) {
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      for (std::size_t i = 0; i < n; ++i)
        pts[i][static_cast<std::size_t>(d)] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        dmin = std::min(dmin, std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]));
    if (dmin > best_d) {
      best_d = dmin;
      best = std::move(pts);
    }
  }
  std::vector<Condition> out;
  for (const auto& p : best) out.push_back({u_min + (u_max - u_min) * p[0], s_min + (s_max - s_min) * p[1]});
  return out;
}

// ---------------------------------------------------------------------------
// Outer loop.

struct SequentialOptions {
  EvFamily family = EvFamily::gumbel();
  std::size_t n_seeds = 18;
  std::size_t init_design = 8;
  std::size_t max_iters = 40;
  std::size_t years = 10000;
  std::uint64_t master_seed = 7;
  double pf_threshold = 27.112;
  bool stop_on_convergence = true;
  double convergence_tol = 0.01;
  std::size_t convergence_window = 5;
  bool resample_conditions = false;
  SigmaNorm norm = SigmaNorm::euclidean;
  std::size_t n_candidates = 100000;
  std::size_t n_kde_candidates = 10000;
  std::size_t startup_exceedances = 50;
  std::size_t keep_per_year = 16;
  double u_min = 3.0;
  double u_max = 25.0;
  unsigned threads = 1;
  GridSpec grid;
  LikelihoodApproxOptions fit;
  GpOptions gp;
  std::string checkpoint_path;
  bool resume = false;
  // Stored in checkpoints; a resume refuses a checkpoint with another value.
  std::string settings_hash;
};

struct HistoryRecord {
  std::size_t iter = 0;
  Condition x_new;
  std::size_t n_seeds = 0;
  double rv50 = 0.0;
  double rv100 = 0.0;
  double pf = 0.0;
  double wall_s = 0.0;
  double acquisition = 0.0;
  std::size_t n_exceed = 0;
  std::size_t training_size = 0;
};

struct TrainingRecord {
  Condition x;
  std::vector<double> maxima;
  ShortTermFit fit;
  int retries = 0;
};

struct SequentialResult {
  std::vector<HistoryRecord> history;
  std::vector<TrainingRecord> training;
  std::optional<GPModel> gp;
  LongTermRun last_run;
  std::vector<Condition> last_exceedances;
  bool converged = false;
  std::size_t resumed_from = 0;
};

inline bool rv100_converged(std::span<const HistoryRecord> h, double tol, std::size_t window) {
  if (window == 0 || h.size() < window + 1) return false;
  for (std::size_t i = h.size() - window; i < h.size(); ++i) {
    const double prev = h[i - 1].rv100;
    if (!(std::abs(h[i].rv100 - prev) < tol * std::abs(prev))) return false;
  }
  return true;
}

namespace detail {

inline TrainingRecord simulate_training_point(const Condition& x, std::size_t point, const SimPreset& sim,
                                              int blocks, const SequentialOptions& opt) {
  TrainingRecord rec;
  rec.x = x;
  std::vector<RetriedBlocks> runs(opt.n_seeds);
  parallel_for(opt.n_seeds, resolve_threads(opt.threads), [&](std::size_t k) {
    runs[k] = simulate_blocks_with_retry(x, derive_seed(opt.master_seed, "st-simulation", {point, k}), sim, blocks);
  });
  for (const auto& r : runs) {
    rec.maxima.insert(rec.maxima.end(), r.blocks.begin(), r.blocks.end());
    rec.retries += r.retries;
  }
  rec.fit = gaussian_likelihood_approx(rec.maxima, opt.family, derive_seed(opt.master_seed, "st-fit", {point}),
                                       opt.fit);
  return rec;
}

inline GPModel fit_surrogate(const std::vector<TrainingRecord>& training, const SequentialOptions& opt) {
  std::vector<GpTrainingPoint> pts;
  pts.reserve(training.size());
  for (const auto& t : training) pts.push_back({t.x, t.fit.mean, t.fit.cov});
  return fit_gp(pts, opt.gp);
}

inline nlohmann::json to_json(const HistoryRecord& r) {
  return {{"iter", r.iter},          {"u_new", r.x_new.u},       {"sigma_u_new", r.x_new.sigma_u},
          {"n_seeds", r.n_seeds},    {"rv50", r.rv50},           {"rv100", r.rv100},
          {"pf", r.pf},              {"wall_s", r.wall_s},       {"acquisition", r.acquisition},
          {"n_exceed", r.n_exceed},  {"training_size", r.training_size}};
}

inline HistoryRecord history_from_json(const nlohmann::json& j) {
  HistoryRecord r;
  r.iter = j.at("iter").get<std::size_t>();
  r.x_new = {j.at("u_new").get<double>(), j.at("sigma_u_new").get<double>()};
  r.n_seeds = j.at("n_seeds").get<std::size_t>();
  r.rv50 = j.at("rv50").get<double>();
  r.rv100 = j.at("rv100").get<double>();
  r.pf = j.at("pf").get<double>();
  r.wall_s = j.at("wall_s").get<double>();
  r.acquisition = j.at("acquisition").get<double>();
  r.n_exceed = j.at("n_exceed").get<std::size_t>();
  r.training_size = j.at("training_size").get<std::size_t>();
  return r;
}

inline void write_checkpoint(const std::string& path, const SequentialOptions& opt, const SequentialResult& res) {
  nlohmann::json train = nlohmann::json::array();
  for (const auto& t : res.training)
    train.push_back({{"u", t.x.u},
                     {"sigma_u", t.x.sigma_u},
                     {"maxima", t.maxima},
                     {"retries", t.retries},
                     {"fit", extremis::to_json(t.fit)}});
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : res.history) hist.push_back(to_json(h));
  const nlohmann::json j = {{"format", "extremis-seq-checkpoint"},
                            {"version", 1},
                            {"settings_hash", opt.settings_hash},
                            {"iteration", res.history.empty() ? 0 : res.history.back().iter},
                            {"training", train},
                            {"history", hist}};
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw ValidationError("cannot write checkpoint " + path, "checkpoint");
    f << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

inline void read_checkpoint(const std::string& path, const SequentialOptions& opt, SequentialResult& res) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read checkpoint " + path, "checkpoint");
  nlohmann::json j;
  try {
    f >> j;
    if (j.at("format").get<std::string>() != "extremis-seq-checkpoint")
      throw ParseError("not a sequential-sampling checkpoint", "format");
    if (j.at("settings_hash").get<std::string>() != opt.settings_hash)
      throw IncompatibleError("checkpoint was written with different settings", "settings_hash");
    for (const auto& t : j.at("training")) {
      TrainingRecord r;
      r.x = {t.at("u").get<double>(), t.at("sigma_u").get<double>()};
      r.maxima = t.at("maxima").get<std::vector<double>>();
      r.retries = t.at("retries").get<int>();
      r.fit = short_term_fit_from_json(t.at("fit"));
      res.training.push_back(std::move(r));
    }
    for (const auto& h : j.at("history")) res.history.push_back(history_from_json(h));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), "checkpoint");
  }
}

}  // namespace detail

using SequentialProgress = std::function<void(const HistoryRecord&)>;

inline SequentialResult run_sequential(const EnvModel& env, const SimPreset& sim, const SequentialOptions& opt,
                                       const SequentialProgress& progress = {}) {
  if (opt.init_design < 3) throw DomainError("run_sequential: init_design must be >= 3", "init_design");
  if (opt.max_iters < 1) throw DomainError("run_sequential: max_iters must be >= 1", "max_iters");
  if (opt.n_seeds < 1) throw DomainError("run_sequential: n_seeds must be >= 1", "n_seeds");
  const int blocks = blocks_per_state(sim, env.state_duration_hours);
  SequentialResult res;

  const bool resuming = opt.resume && !opt.checkpoint_path.empty() && std::filesystem::exists(opt.checkpoint_path);
  if (resuming) {
    detail::read_checkpoint(opt.checkpoint_path, opt, res);
    res.resumed_from = res.history.empty() ? 0 : res.history.back().iter;
  } else {
    const auto [slo, shi] = sigma_range(env, opt.u_min, opt.u_max, 0.999);
    Stream rng = make_stream(opt.master_seed, "initial-design");
    const auto design = maximin_lhs(opt.init_design, opt.u_min, opt.u_max, slo, shi, rng);
    for (std::size_t p = 0; p < design.size(); ++p) {
      try {
        res.training.push_back(detail::simulate_training_point(design[p], p, sim, blocks, opt));
      } catch (Error& e) {
        e.prepend("initial design point " + std::to_string(p));
        throw;
      }
    }
  }

  try {
    res.gp.emplace(detail::fit_surrogate(res.training, opt));
  } catch (Error& e) {
    e.prepend("initial surrogate fit");
    throw;
  }
  res.converged = opt.stop_on_convergence && rv100_converged(res.history, opt.convergence_tol, opt.convergence_window);

  LongTermOptions lt;
  lt.years = opt.years;
  lt.u_min = opt.u_min;
  lt.u_max = opt.u_max;
  lt.keep_per_year = opt.keep_per_year;
  lt.threads = opt.threads;

  for (std::size_t iter = res.resumed_from + 1; iter <= opt.max_iters && !res.converged; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    HistoryRecord rec;
    rec.iter = iter;
    try {
      const std::uint64_t cond_seed = opt.resample_conditions
                                          ? derive_seed(opt.master_seed, "lt-conditions", {iter})
                                          : derive_seed(opt.master_seed, "lt-conditions");
      const std::uint64_t resp_seed = derive_seed(opt.master_seed, "lt-response", {iter});
      res.last_run = simulate_longterm(*res.gp, opt.family, env, lt, cond_seed, resp_seed, blocks, opt.grid);
      rec.rv50 = return_value(res.last_run.annual_maxima, 50.0);
      rec.rv100 = return_value(res.last_run.annual_maxima, 100.0);
      rec.pf = failure_probability(res.last_run.annual_maxima, opt.pf_threshold);

      res.last_exceedances = iter == 1 ? std::vector<Condition>{} : res.last_run.exceedances(rec.rv100);
      if (res.last_exceedances.empty()) res.last_exceedances = res.last_run.top_conditions(opt.startup_exceedances);
      rec.n_exceed = res.last_exceedances.size();
      const Kde2 kde = exceedance_kde(res.last_exceedances);

      Stream crng = make_stream(opt.master_seed, "acquisition-candidates", {iter});
      const auto candidates =
          acquisition_candidates(env, &kde, opt.n_candidates, opt.n_kde_candidates, crng, opt.u_min, opt.u_max);
      const auto best = acquisition_argmax(*res.gp, kde, candidates, opt.norm, opt.u_min, opt.u_max);
      rec.x_new = best.x;
      rec.acquisition = best.score;
      rec.n_seeds = opt.n_seeds;

      res.training.push_back(
          detail::simulate_training_point(best.x, res.training.size(), sim, blocks, opt));
      res.gp.emplace(detail::fit_surrogate(res.training, opt));
      rec.training_size = res.training.size();
    } catch (Error& e) {
      e.prepend("sequential iteration " + std::to_string(iter));
      throw;
    }
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (progress) progress(rec);
    if (!opt.checkpoint_path.empty()) detail::write_checkpoint(opt.checkpoint_path, opt, res);
    res.converged =
        opt.stop_on_convergence && rv100_converged(res.history, opt.convergence_tol, opt.convergence_window);
  }
  return res;
}

inline void write_history_csv(std::ostream& os, std::span<const HistoryRecord> h) {
  os << "iter,u_new,sigma_u_new,rv50_mnm,rv100_mnm,pf,wall_s\n";
  os.precision(17);
  for (const auto& r : h)
    os << r.iter << ',' << r.x_new.u << ',' << r.x_new.sigma_u << ',' << r.rv50 << ',' << r.rv100 << ',' << r.pf
       << ',' << r.wall_s << '\n';
}

}  // namespace extremis
