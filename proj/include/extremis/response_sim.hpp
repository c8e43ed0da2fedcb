#pragma once

// Synthetic stand-in for an aero-servo-elastic simulator. Block maxima follow
// r(x) + s(x) * G with G a standard Gumbel (or GEV) variate; full time series
// come from a damped oscillator driven by an AR(1) wind signal.

#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace extremis {

// base + exp(-0.5 ((u - peak_u) / width)^2) * (amplitude + turbulence_gain * sigma_u)
struct Surface {
  double base = 0.0;
  double amplitude = 0.0;
  double turbulence_gain = 0.0;
  double peak_u = 12.0;
  double width = 5.0;

  double operator()(double u, double sigma_u) const noexcept {
    const double d = (u - peak_u) / width;
    return base + std::exp(-0.5 * d * d) * (amplitude + turbulence_gain * sigma_u);
  }
};

enum class ShortTermLaw { gumbel, gev };

struct SimPreset {
  std::string name;
  Surface median;  // r(u, sigma_u), MNm; location of the block-maximum law
  Surface scale;   // s(u, sigma_u), MNm
  ShortTermLaw law = ShortTermLaw::gumbel;
  double gev_shape = 0.0;
  double cut_in = 3.0;
  double cut_out = 25.0;
  double block_minutes = 10.0;
  // Emulated solver failure rate per (condition, seed).
  double failure_probability = 0.0;

  // Time-series dynamics.
  double correlation_time_s = 1.0;
  double rated_speed = 11.4;
  double static_gain = 10.0;  // MNm at rated speed
  double natural_frequency_hz = 0.7;
  double damping_ratio = 0.05;

  bool operating(double u) const noexcept { return u >= cut_in && u <= cut_out; }

  // Location of the block-maximum law; its median is r + s * (-ln ln 2).
  double location(const Condition& c) const noexcept { return median(c.u, c.sigma_u); }
};

inline SimPreset site_a_like_sim() {
  SimPreset p;
  p.name = "site-a-like";
  p.median = {0.0, 7.5, 3.6, 13.0, 5.0};
  p.scale = {0.35, 0.0, 0.12, 13.0, 5.0};
  return p;
}

inline SimPreset brittany_like_sim() {
  SimPreset p;
  p.name = "brittany-like";
  p.median = {0.0, 8.0, 1.0, 11.4, 4.0};
  p.scale = {0.2, 1.2, 0.0, 11.4, 4.0};
  return p;
}

inline SimPreset misspecified_sim() {
  SimPreset p = site_a_like_sim();
  p.name = "misspecified";
  p.law = ShortTermLaw::gev;
  p.gev_shape = 0.1;
  return p;
}

inline nlohmann::json to_json(const Surface& s) {
  return {{"base", s.base}, {"amplitude", s.amplitude}, {"turbulence_gain", s.turbulence_gain},
          {"peak_u", s.peak_u}, {"width", s.width}};
}

inline nlohmann::json to_json(const SimPreset& p) {
  return {{"name", p.name},
          {"median", to_json(p.median)},
          {"scale", to_json(p.scale)},
          {"law", p.law == ShortTermLaw::gumbel ? "gumbel" : "gev"},
          {"gev_shape", p.gev_shape},
          {"cut_in", p.cut_in},
          {"cut_out", p.cut_out},
          {"block_minutes", p.block_minutes},
          {"failure_probability", p.failure_probability},
          {"correlation_time_s", p.correlation_time_s},
          {"rated_speed", p.rated_speed},
          {"static_gain", p.static_gain},
          {"natural_frequency_hz", p.natural_frequency_hz},
          {"damping_ratio", p.damping_ratio}};
}

inline void validate(const SimPreset& p) {
  auto require = [](bool ok, const char* field, const char* msg) {
    if (!ok) throw ValidationError(std::string(field) + ": " + msg, field);
  };
  require(p.cut_in < p.cut_out, "cut_in", "must be below cut_out");
  require(p.block_minutes > 0.0, "block_minutes", "must be > 0");
  require(p.median.width > 0.0 && p.scale.width > 0.0, "width", "must be > 0");
  require(p.median.base >= 0.0 && p.median.amplitude >= 0.0 && p.median.turbulence_gain >= 0.0, "median",
          "coefficients must be >= 0");
  require(p.scale.base >= 0.0 && p.scale.amplitude >= 0.0 && p.scale.turbulence_gain >= 0.0, "scale",
          "coefficients must be >= 0");
  require(p.failure_probability >= 0.0 && p.failure_probability < 1.0, "failure_probability", "must be in [0, 1)");
  require(p.correlation_time_s > 0.0 && p.natural_frequency_hz > 0.0 && p.damping_ratio >= 0.0, "dynamics",
          "time constants must be > 0");
  require(std::abs(p.gev_shape) < 1.0, "gev_shape", "must lie in (-1, 1)");
}

inline SimPreset parse_sim_preset(const nlohmann::json& j) {
  SimPreset p;
  auto surface = [](const nlohmann::json& s, Surface d) {
    d.base = s.value("base", d.base);
    d.amplitude = s.value("amplitude", d.amplitude);
    d.turbulence_gain = s.value("turbulence_gain", d.turbulence_gain);
    d.peak_u = s.value("peak_u", d.peak_u);
    d.width = s.value("width", d.width);
    return d;
  };
  try {
    p.name = j.value("name", std::string("custom"));
    if (j.contains("median")) p.median = surface(j["median"], p.median);
    if (j.contains("scale")) p.scale = surface(j["scale"], p.scale);
    const std::string law = j.value("law", std::string("gumbel"));
    if (law != "gumbel" && law != "gev") throw ParseError("law: expected gumbel or gev", "law");
    p.law = law == "gumbel" ? ShortTermLaw::gumbel : ShortTermLaw::gev;
    p.gev_shape = j.value("gev_shape", 0.0);
    p.cut_in = j.value("cut_in", p.cut_in);
    p.cut_out = j.value("cut_out", p.cut_out);
    p.block_minutes = j.value("block_minutes", p.block_minutes);
    p.failure_probability = j.value("failure_probability", 0.0);
    p.correlation_time_s = j.value("correlation_time_s", p.correlation_time_s);
    p.rated_speed = j.value("rated_speed", p.rated_speed);
    p.static_gain = j.value("static_gain", p.static_gain);
    p.natural_frequency_hz = j.value("natural_frequency_hz", p.natural_frequency_hz);
    p.damping_ratio = j.value("damping_ratio", p.damping_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sim preset: ") + e.what(), "sim");
  }
  validate(p);
  return p;
}

// Accepts a preset name or a path to a JSON preset file.
inline SimPreset load_sim_preset(const std::string& name_or_path) {
  if (name_or_path == "site-a-like") return site_a_like_sim();
  if (name_or_path == "brittany-like") return brittany_like_sim();
  if (name_or_path == "misspecified") return misspecified_sim();
  std::ifstream in(name_or_path);
  if (!in) throw ParseError("unknown sim preset '" + name_or_path + "'", "sim");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed sim preset: ") + e.what(), "sim");
  }
  return parse_sim_preset(j);
}

namespace detail {

inline bool emulated_failure(const SimPreset& p, const Condition& c, std::uint64_t seed) noexcept {
  if (p.failure_probability <= 0.0) return false;
  const std::uint64_t h = mix_seed(mix_seed(seed ^ 0xFA11FA11ull, std::bit_cast<std::uint64_t>(c.u)),
                                   std::bit_cast<std::uint64_t>(c.sigma_u));
  const double v = static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
  return v < p.failure_probability;
}

// Standard variate of the short-term law from a uniform in (0, 1).
inline double standard_short_term_variate(const SimPreset& p, double v) noexcept {
  const double e = -std::log(v);
  if (p.law == ShortTermLaw::gumbel || p.gev_shape == 0.0) return -std::log(e);
  return (std::pow(e, -p.gev_shape) - 1.0) / p.gev_shape;
}

}  // namespace detail

// Block maximum, or nullopt when the emulated solver fails for this seed.
inline std::optional<double> try_simulate_max_response(const Condition& c, std::uint64_t seed,
                                                       const SimPreset& p) {
  if (!p.operating(c.u)) return 0.0;
  if (detail::emulated_failure(p, c, seed)) return std::nullopt;
  Stream rng(mix_seed(seed, 0x5EED0000ull));
  const double g = detail::standard_short_term_variate(p, rng.uniform());
  return p.location(c) + p.scale(c.u, c.sigma_u) * g;
}

inline double simulate_max_response(const Condition& c, std::uint64_t seed, const SimPreset& p) {
  auto r = try_simulate_max_response(c, seed, p);
  if (!r) throw SimulationFailure("simulator failed at this condition and seed", "seed");
  return *r;
}

inline int blocks_per_state(const SimPreset& p, double state_duration_hours) {
  return std::max(1, static_cast<int>(std::lround(state_duration_hours * 60.0 / p.block_minutes)));
}

inline std::uint64_t block_seed(std::uint64_t seed, int block) noexcept {
  return block == 0 ? seed : mix_seed(seed, static_cast<std::uint64_t>(block));
}

// Maximum over the `blocks` consecutive blocks of one stationary state
// (one-hour states hold six 10-minute blocks).
inline std::optional<double> try_simulate_state_max(const Condition& c, std::uint64_t seed, const SimPreset& p,
                                                    int blocks) {
  double best = -std::numeric_limits<double>::infinity();
  for (int b = 0; b < blocks; ++b) {
    auto r = try_simulate_max_response(c, block_seed(seed, b), p);
    if (!r) return std::nullopt;
    best = std::max(best, *r);
  }
  return best;
}

// Retries with successive seeds, mirroring the practice of picking another
// seed when the solver fails. Returns the value and the seed that succeeded.
struct RetriedResponse {
  double value = 0.0;
  std::uint64_t seed = 0;
  int retries = 0;
};

inline constexpr int kMaxSeedRetries = 10;

// Block maxima of one stationary state, retried as a whole with the next
// seed when any block fails.
struct RetriedBlocks {
  std::vector<double> blocks;
  std::uint64_t seed = 0;
  int retries = 0;
};

inline RetriedBlocks simulate_blocks_with_retry(const Condition& c, std::uint64_t seed, const SimPreset& p,
                                                int blocks = 1) {
  RetriedBlocks out;
  out.blocks.resize(static_cast<std::size_t>(blocks));
  for (int attempt = 0; attempt <= kMaxSeedRetries; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : mix_seed(seed, 0xBADC0DEull + static_cast<std::uint64_t>(attempt));
    bool ok = true;
    for (int b = 0; b < blocks && ok; ++b) {
      auto r = try_simulate_max_response(c, block_seed(s, b), p);
      if (r)
        out.blocks[static_cast<std::size_t>(b)] = *r;
      else
        ok = false;
    }
    if (ok) {
      out.seed = s;
      out.retries = attempt;
      return out;
    }
  }
  throw SimulationFailure("simulator failed " + std::to_string(kMaxSeedRetries + 1) + " times at u=" +
                              std::to_string(c.u) + ", sigma_u=" + std::to_string(c.sigma_u),
                          "seed");
}

inline RetriedResponse simulate_with_retry(const Condition& c, std::uint64_t seed, const SimPreset& p,
                                           int blocks = 1) {
  if (blocks == 1) {
    for (int attempt = 0; attempt <= kMaxSeedRetries; ++attempt) {
      const std::uint64_t s = attempt == 0 ? seed : mix_seed(seed, 0xBADC0DEull + static_cast<std::uint64_t>(attempt));
      if (auto r = try_simulate_max_response(c, s, p)) return {*r, s, attempt};
    }
  }
  const auto r = simulate_blocks_with_retry(c, seed, p, blocks);
  return {*std::max_element(r.blocks.begin(), r.blocks.end()), r.seed, r.retries};
}

struct ResponseSeries {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<double> wind;
  std::vector<double> y;

  double duration() const noexcept { return dt * static_cast<double>(y.size()); }
};

// Largest stable step of the semi-implicit Euler oscillator update.
inline double oscillator_stability_bound(const SimPreset& p) noexcept {
  const double omega = 2.0 * std::numbers::pi * p.natural_frequency_hz;
  const double z = p.damping_ratio;
  return 2.0 * (std::sqrt(1.0 + z * z) - z) / omega;
}

// Static map from wind speed to forcing, peaking at rated speed.
inline double static_load(const SimPreset& p, double w) noexcept {
  const double r = w / p.rated_speed;
  return p.static_gain * r * r * std::exp(1.0 - r * r);
}

inline ResponseSeries simulate_timeseries(const Condition& c, std::uint64_t seed, double duration_s, double dt,
                                          const SimPreset& p) {
  if (!(dt > 0.0) || !(duration_s >= 10.0 * dt))
    throw DomainError("simulate_timeseries: need duration_s >= 10 * dt", "duration_s");
  const double bound = oscillator_stability_bound(p);
  if (dt >= bound)
    throw InstabilityError("simulate_timeseries: dt " + std::to_string(dt) + " exceeds stability bound " +
                               std::to_string(bound),
                           "dt");
  const auto n = static_cast<std::size_t>(std::llround(duration_s / dt));
  ResponseSeries s;
  s.dt = dt;
  s.t.resize(n);
  s.wind.resize(n);
  s.y.resize(n);

  Stream rng(mix_seed(seed, 0x7153E41E5ull));
  const double phi = std::exp(-dt / p.correlation_time_s);
  const double innovation = c.sigma_u * std::sqrt(1.0 - phi * phi);
  double v = c.sigma_u * rng.normal();
  const double omega = 2.0 * std::numbers::pi * p.natural_frequency_hz;
  const bool on = p.operating(c.u);
  double y = on ? static_load(p, c.u + v) : 0.0;
  double ydot = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = c.u + v;
    s.t[k] = static_cast<double>(k) * dt;
    s.wind[k] = w;
    s.y[k] = y;
    if (on) {
      const double f = static_load(p, w);
      ydot += dt * (omega * omega * (f - y) - 2.0 * p.damping_ratio * omega * ydot);
      y += dt * ydot;
    }
    v = phi * v + innovation * rng.normal();
  }
  return s;
}

// Maxima of consecutive whole blocks; a trailing partial block is discarded.
inline std::vector<double> split_block_maxima(const ResponseSeries& s, double block_minutes) {
  const auto per_block = static_cast<std::size_t>(std::llround(block_minutes * 60.0 / s.dt));
  std::vector<double> out;
  if (per_block == 0) return out;
  const std::size_t blocks = s.y.size() / per_block;
  for (std::size_t b = 0; b < blocks; ++b) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = b * per_block; k < (b + 1) * per_block; ++k) m = std::max(m, s.y[k]);
    out.push_back(m);
  }
  return out;
}

}  // namespace extremis
