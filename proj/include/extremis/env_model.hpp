#pragma once

// Joint long-term model of (mean wind speed U, turbulence sigma_U), factorized
// as f_U(u) * f_{sigma_U | U}(s | u). Immutable after construction.

#include "extremis/error.hpp"
#include "extremis/random.hpp"
#include "extremis/special.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace extremis {

struct Condition {
  double u = 0.0;        // mean wind speed at hub height, m/s
  double sigma_u = 0.0;  // standard deviation of wind speed, m/s

  friend bool operator==(const Condition&, const Condition&) = default;
};

// Standard-normal-space image of a Condition under the Rosenblatt transform.
struct NormalPoint {
  double z1 = 0.0;
  double z2 = 0.0;
  double radius() const noexcept { return std::hypot(z1, z2); }
};

enum class MarginalKind { weibull, hybrid_weibull_gpd, lognormal, normal };

// Marginal distribution of U. Parameters used per kind:
//   weibull:             shape, scale
//   hybrid_weibull_gpd:  shape, scale (body); threshold, gpd_shape, gpd_scale,
//                        tail_probability = P(U > threshold)
//   lognormal:           mu, sigma (of log U)
//   normal:              mu, sigma  (unbounded support; used for identity-transform checks)
struct MarginalSpec {
  MarginalKind kind = MarginalKind::weibull;
  double shape = 2.0;
  double scale = 10.0;
  double mu = 0.0;
  double sigma = 1.0;
  double threshold = 0.0;
  double gpd_shape = 0.0;
  double gpd_scale = 1.0;
  double tail_probability = 0.0;

  static MarginalSpec weibull(double shape, double scale) {
    MarginalSpec m;
    m.kind = MarginalKind::weibull;
    m.shape = shape;
    m.scale = scale;
    return m;
  }

  // Builds a hybrid whose tail probability is taken from the body, so the
  // CDF is continuous at the junction by construction.
  static MarginalSpec hybrid(double shape, double scale, double threshold, double gpd_shape,
                             double gpd_scale) {
    MarginalSpec m;
    m.kind = MarginalKind::hybrid_weibull_gpd;
    m.shape = shape;
    m.scale = scale;
    m.threshold = threshold;
    m.gpd_shape = gpd_shape;
    m.gpd_scale = gpd_scale;
    m.tail_probability = m.weibull_sf(threshold);
    return m;
  }

  static MarginalSpec lognormal(double mu, double sigma) {
    MarginalSpec m;
    m.kind = MarginalKind::lognormal;
    m.mu = mu;
    m.sigma = sigma;
    return m;
  }

  static MarginalSpec normal(double mu, double sigma) {
    MarginalSpec m;
    m.kind = MarginalKind::normal;
    m.mu = mu;
    m.sigma = sigma;
    return m;
  }

  double weibull_sf(double u) const noexcept {
    return u <= 0.0 ? 1.0 : std::exp(-std::pow(u / scale, shape));
  }

  double weibull_pdf(double u) const noexcept {
    if (u < 0.0) return 0.0;
    if (u == 0.0) return shape < 1.0 ? std::numeric_limits<double>::infinity() : (shape == 1.0 ? 1.0 / scale : 0.0);
    const double r = u / scale;
    return shape / scale * std::pow(r, shape - 1.0) * std::exp(-std::pow(r, shape));
  }

  // Exceedance of the GPD part relative to the threshold, in (0, 1].
  double gpd_rel_sf(double excess) const noexcept {
    if (excess <= 0.0) return 1.0;
    if (gpd_shape == 0.0) return std::exp(-excess / gpd_scale);
    const double t = 1.0 + gpd_shape * excess / gpd_scale;
    if (t <= 0.0) return 0.0;
    return std::pow(t, -1.0 / gpd_shape);
  }

  double upper_endpoint() const noexcept {
    if (kind == MarginalKind::hybrid_weibull_gpd && gpd_shape < 0.0) return threshold - gpd_scale / gpd_shape;
    return std::numeric_limits<double>::infinity();
  }

  double lower_endpoint() const noexcept {
    return kind == MarginalKind::normal ? -std::numeric_limits<double>::infinity() : 0.0;
  }

  double pdf(double u) const noexcept {
    switch (kind) {
      case MarginalKind::weibull:
        return weibull_pdf(u);
      case MarginalKind::hybrid_weibull_gpd: {
        if (u <= threshold) return weibull_pdf(u);
        const double excess = u - threshold;
        const double t = 1.0 + gpd_shape * excess / gpd_scale;
        if (t <= 0.0) return 0.0;
        const double core = gpd_shape == 0.0 ? std::exp(-excess / gpd_scale) : std::pow(t, -1.0 / gpd_shape - 1.0);
        return tail_probability / gpd_scale * core;
      }
      case MarginalKind::lognormal: {
        if (u <= 0.0) return 0.0;
        const double z = (std::log(u) - mu) / sigma;
        return normal_pdf(z) / (u * sigma);
      }
      case MarginalKind::normal:
        return normal_pdf((u - mu) / sigma) / sigma;
    }
    return 0.0;
  }

  double cdf(double u) const noexcept {
    switch (kind) {
      case MarginalKind::weibull:
        return u <= 0.0 ? 0.0 : -std::expm1(-std::pow(u / scale, shape));
      case MarginalKind::hybrid_weibull_gpd:
        if (u <= threshold) return u <= 0.0 ? 0.0 : -std::expm1(-std::pow(u / scale, shape));
        return 1.0 - sf(u);
      case MarginalKind::lognormal:
        return u <= 0.0 ? 0.0 : normal_cdf((std::log(u) - mu) / sigma);
      case MarginalKind::normal:
        return normal_cdf((u - mu) / sigma);
    }
    return 0.0;
  }

  // Survival function 1 - F(u), computed without cancellation.
  double sf(double u) const noexcept {
    switch (kind) {
      case MarginalKind::weibull:
        return weibull_sf(u);
      case MarginalKind::hybrid_weibull_gpd:
        if (u <= threshold) return weibull_sf(u);
        return tail_probability * gpd_rel_sf(u - threshold);
      case MarginalKind::lognormal:
        return u <= 0.0 ? 1.0 : normal_cdf(-(std::log(u) - mu) / sigma);
      case MarginalKind::normal:
        return normal_cdf(-(u - mu) / sigma);
    }
    return 0.0;
  }

  // Inverse of the survival function; q in (0, 1).
  double isf(double q) const {
    switch (kind) {
      case MarginalKind::weibull:
        return scale * std::pow(-std::log(q), 1.0 / shape);
      case MarginalKind::hybrid_weibull_gpd: {
        if (q >= tail_probability) return scale * std::pow(-std::log(q), 1.0 / shape);
        const double r = q / tail_probability;
        if (gpd_shape == 0.0) return threshold - gpd_scale * std::log(r);
        return threshold + gpd_scale / gpd_shape * (std::pow(r, -gpd_shape) - 1.0);
      }
      case MarginalKind::lognormal:
        return std::exp(mu + sigma * normal_isf(q));
      case MarginalKind::normal:
        return mu + sigma * normal_isf(q);
    }
    return 0.0;
  }

  // Inverse CDF; p in (0, 1).
  double quantile(double p) const {
    switch (kind) {
      case MarginalKind::weibull:
        return scale * std::pow(-std::log1p(-p), 1.0 / shape);
      case MarginalKind::hybrid_weibull_gpd:
        if (p <= 1.0 - tail_probability) return scale * std::pow(-std::log1p(-p), 1.0 / shape);
        return isf(1.0 - p);
      case MarginalKind::lognormal:
        return std::exp(mu + sigma * normal_ppf(p));
      case MarginalKind::normal:
        return mu + sigma * normal_ppf(p);
    }
    return 0.0;
  }

  double median() const { return quantile(0.5); }

  bool in_support(double u) const noexcept {
    if (kind == MarginalKind::normal) return std::isfinite(u);
    return u >= 0.0 && u <= upper_endpoint();
  }
};

enum class ConditionalKind { lognormal_given_u, normal_given_u };

// sigma_U | U. location(u) and scale(u) are polynomials of degree <= 2 in u
// (coefficients in increasing order). For lognormal_given_u they are the mean
// and standard deviation of log sigma_U; for normal_given_u of sigma_U itself.
struct ConditionalSpec {
  ConditionalKind kind = ConditionalKind::lognormal_given_u;
  std::vector<double> mu_coeffs{0.0};
  std::vector<double> sigma_coeffs{1.0};

  static double poly(const std::vector<double>& c, double u) noexcept {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
  }

  double location(double u) const noexcept { return poly(mu_coeffs, u); }
  double scale(double u) const noexcept { return poly(sigma_coeffs, u); }

  // Standardized variable t with F(s | u) = Phi(t).
  double standardize(double s, double u) const noexcept {
    if (kind == ConditionalKind::lognormal_given_u) {
      if (s <= 0.0) return -std::numeric_limits<double>::infinity();
      return (std::log(s) - location(u)) / scale(u);
    }
    return (s - location(u)) / scale(u);
  }

  double from_standard(double t, double u) const noexcept {
    const double v = location(u) + scale(u) * t;
    return kind == ConditionalKind::lognormal_given_u ? std::exp(v) : v;
  }

  double pdf(double s, double u) const noexcept {
    const double sc = scale(u);
    if (kind == ConditionalKind::lognormal_given_u) {
      if (s <= 0.0) return 0.0;
      return normal_pdf((std::log(s) - location(u)) / sc) / (s * sc);
    }
    return normal_pdf((s - location(u)) / sc) / sc;
  }

  double cdf(double s, double u) const noexcept { return normal_cdf(standardize(s, u)); }
  double quantile(double p, double u) const { return from_standard(normal_ppf(p), u); }
};

struct EnvModel {
  std::string name;
  MarginalSpec marginal_u;
  ConditionalSpec conditional_sigma;
  double state_duration_hours = 1.0 / 6.0;

  double states_per_year() const noexcept { return 365.25 * 24.0 / state_duration_hours; }
};

// ---------------------------------------------------------------------------
// Validation and configuration

namespace detail {

inline void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ValidationError(field + ": " + msg, field);
}

// Minimum of a polynomial of degree <= 2 over [a, b].
inline double poly_min(const std::vector<double>& c, double a, double b) {
  double m = std::min(ConditionalSpec::poly(c, a), ConditionalSpec::poly(c, b));
  if (c.size() == 3 && c[2] != 0.0) {
    const double v = -c[1] / (2.0 * c[2]);
    if (v > a && v < b) m = std::min(m, ConditionalSpec::poly(c, v));
  }
  return m;
}

}  // namespace detail

inline constexpr double kHybridContinuityTolerance = 1e-9;

inline void validate(const EnvModel& m) {
  using detail::require;
  const auto& g = m.marginal_u;
  switch (g.kind) {
    case MarginalKind::weibull:
      require(g.shape > 0.0, "marginal_u.shape", "must be > 0");
      require(g.scale > 0.0, "marginal_u.scale", "must be > 0");
      break;
    case MarginalKind::hybrid_weibull_gpd: {
      require(g.shape > 0.0, "marginal_u.shape", "must be > 0");
      require(g.scale > 0.0, "marginal_u.scale", "must be > 0");
      require(g.threshold > 0.0, "marginal_u.threshold", "must be > 0");
      require(g.gpd_scale > 0.0, "marginal_u.gpd_scale", "must be > 0");
      require(std::isfinite(g.gpd_shape), "marginal_u.gpd_shape", "must be finite");
      const double body = g.weibull_sf(g.threshold);
      std::ostringstream os;
      os.precision(12);
      os << "CDF discontinuous at junction: body " << 1.0 - body << " vs tail " << 1.0 - g.tail_probability;
      require(std::abs(body - g.tail_probability) <= kHybridContinuityTolerance, "marginal_u.tail_probability",
              os.str());
      break;
    }
    case MarginalKind::lognormal:
    case MarginalKind::normal:
      require(std::isfinite(g.mu), "marginal_u.mu", "must be finite");
      require(g.sigma > 0.0, "marginal_u.sigma", "must be > 0");
      break;
  }
  const auto& c = m.conditional_sigma;
  require(!c.mu_coeffs.empty() && c.mu_coeffs.size() <= 3, "conditional_sigma.mu_coeffs",
          "needs 1 to 3 coefficients");
  require(!c.sigma_coeffs.empty() && c.sigma_coeffs.size() <= 3, "conditional_sigma.sigma_coeffs",
          "needs 1 to 3 coefficients");
  require(detail::poly_min(c.sigma_coeffs, 0.0, 50.0) > 0.0, "conditional_sigma.sigma_coeffs",
          "scale polynomial must be > 0 on [0, 50] m/s");
  require(m.state_duration_hours > 0.0 && std::isfinite(m.state_duration_hours), "state_duration_hours",
          "must be > 0");
}

inline const char* to_string(MarginalKind k) {
  switch (k) {
    case MarginalKind::weibull: return "weibull";
    case MarginalKind::hybrid_weibull_gpd: return "hybrid_weibull_gpd";
    case MarginalKind::lognormal: return "lognormal";
    case MarginalKind::normal: return "normal";
  }
  return "?";
}

inline const char* to_string(ConditionalKind k) {
  return k == ConditionalKind::lognormal_given_u ? "lognormal_given_u" : "normal_given_u";
}

// Parses the JSON config document (schema in README.md).
inline EnvModel parse_env_config(const nlohmann::json& j) {
  using nlohmann::json;
  auto number = [](const json& obj, const char* key, const std::string& path) -> double {
    if (!obj.contains(key)) throw ParseError(path + "." + key + ": missing", path + "." + key);
    if (!obj.at(key).is_number()) throw ParseError(path + "." + key + ": expected a number", path + "." + key);
    return obj.at(key).get<double>();
  };
  auto coeffs = [](const json& obj, const char* key, const std::string& path) {
    const std::string field = path + "." + key;
    if (!obj.contains(key) || !obj.at(key).is_array()) throw ParseError(field + ": expected an array", field);
    std::vector<double> out;
    for (const auto& v : obj.at(key)) {
      if (!v.is_number()) throw ParseError(field + ": expected numbers", field);
      out.push_back(v.get<double>());
    }
    return out;
  };

  if (!j.is_object()) throw ParseError("config: expected a JSON object", "");
  EnvModel m;
  m.name = j.value("name", std::string{});
  if (!j.contains("marginal_u") || !j["marginal_u"].is_object())
    throw ParseError("marginal_u: missing object", "marginal_u");
  const auto& mj = j["marginal_u"];
  const std::string kind = mj.value("kind", std::string{});
  auto& g = m.marginal_u;
  if (kind == "weibull") {
    g = MarginalSpec::weibull(number(mj, "shape", "marginal_u"), number(mj, "scale", "marginal_u"));
  } else if (kind == "hybrid_weibull_gpd") {
    g.kind = MarginalKind::hybrid_weibull_gpd;
    g.shape = number(mj, "shape", "marginal_u");
    g.scale = number(mj, "scale", "marginal_u");
    g.threshold = number(mj, "threshold", "marginal_u");
    g.gpd_shape = number(mj, "gpd_shape", "marginal_u");
    g.gpd_scale = number(mj, "gpd_scale", "marginal_u");
    g.tail_probability = mj.contains("tail_probability") ? number(mj, "tail_probability", "marginal_u")
                                                         : g.weibull_sf(g.threshold);
  } else if (kind == "lognormal" || kind == "normal") {
    g = kind == "lognormal" ? MarginalSpec::lognormal(number(mj, "mu", "marginal_u"), number(mj, "sigma", "marginal_u"))
                            : MarginalSpec::normal(number(mj, "mu", "marginal_u"), number(mj, "sigma", "marginal_u"));
  } else {
    throw ParseError("marginal_u.kind: unknown kind '" + kind + "'", "marginal_u.kind");
  }

  if (!j.contains("conditional_sigma") || !j["conditional_sigma"].is_object())
    throw ParseError("conditional_sigma: missing object", "conditional_sigma");
  const auto& cj = j["conditional_sigma"];
  const std::string ckind = cj.value("kind", std::string{});
  if (ckind == "lognormal_given_u")
    m.conditional_sigma.kind = ConditionalKind::lognormal_given_u;
  else if (ckind == "normal_given_u")
    m.conditional_sigma.kind = ConditionalKind::normal_given_u;
  else
    throw ParseError("conditional_sigma.kind: unknown kind '" + ckind + "'", "conditional_sigma.kind");
  m.conditional_sigma.mu_coeffs = coeffs(cj, "mu_coeffs", "conditional_sigma");
  m.conditional_sigma.sigma_coeffs = coeffs(cj, "sigma_coeffs", "conditional_sigma");

  if (j.contains("state_duration_hours")) {
    if (!j["state_duration_hours"].is_number())
      throw ParseError("state_duration_hours: expected a number", "state_duration_hours");
    m.state_duration_hours = j["state_duration_hours"].get<double>();
  }
  validate(m);
  return m;
}

inline nlohmann::json to_json(const EnvModel& m) {
  nlohmann::json mj{{"kind", to_string(m.marginal_u.kind)}};
  const auto& g = m.marginal_u;
  switch (g.kind) {
    case MarginalKind::weibull:
      mj["shape"] = g.shape;
      mj["scale"] = g.scale;
      break;
    case MarginalKind::hybrid_weibull_gpd:
      mj["shape"] = g.shape;
      mj["scale"] = g.scale;
      mj["threshold"] = g.threshold;
      mj["gpd_shape"] = g.gpd_shape;
      mj["gpd_scale"] = g.gpd_scale;
      mj["tail_probability"] = g.tail_probability;
      break;
    case MarginalKind::lognormal:
    case MarginalKind::normal:
      mj["mu"] = g.mu;
      mj["sigma"] = g.sigma;
      break;
  }
  nlohmann::json out{{"marginal_u", mj},
                     {"conditional_sigma",
                      {{"kind", to_string(m.conditional_sigma.kind)},
                       {"mu_coeffs", m.conditional_sigma.mu_coeffs},
                       {"sigma_coeffs", m.conditional_sigma.sigma_coeffs}}},
                     {"state_duration_hours", m.state_duration_hours}};
  if (!m.name.empty()) out["name"] = m.name;
  return out;
}

// Synthetic presets. Parameters are invented; they mimic the structure of a
// 10-minute Weibull site and an hourly hybrid Weibull+GPD site.
inline EnvModel site_a_like_env() {
  EnvModel m;
  m.name = "site-a-like";
  m.marginal_u = MarginalSpec::weibull(2.0, 10.0);
  m.conditional_sigma = {ConditionalKind::lognormal_given_u, {-0.3, 0.05}, {0.25}};
  m.state_duration_hours = 1.0 / 6.0;
  return m;
}

inline EnvModel brittany_like_env() {
  EnvModel m;
  m.name = "brittany-like";
  m.marginal_u = MarginalSpec::hybrid(2.1, 9.0, 18.0, -0.1, 2.5);
  m.conditional_sigma = {ConditionalKind::lognormal_given_u, {-0.6, 0.045}, {0.2}};
  m.state_duration_hours = 1.0;
  return m;
}

inline EnvModel load_env_config(const std::string& path_or_preset) {
  if (path_or_preset == "site-a-like") return site_a_like_env();
  if (path_or_preset == "brittany-like") return brittany_like_env();
  std::ifstream in(path_or_preset);
  if (!in) throw ParseError("cannot open env config '" + path_or_preset + "'", "config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed env config: ") + e.what(), "config");
  }
  return parse_env_config(j);
}

// ---------------------------------------------------------------------------
// Density, sampling and transforms

inline double joint_pdf(const EnvModel& m, const Condition& x) noexcept {
  if (!m.marginal_u.in_support(x.u)) return 0.0;
  const double fu = m.marginal_u.pdf(x.u);
  if (fu == 0.0) return 0.0;
  return fu * m.conditional_sigma.pdf(x.sigma_u, x.u);
}

inline Condition sample_condition(const EnvModel& m, Stream& rng) {
  const double u = m.marginal_u.isf(rng.uniform());
  return {u, m.conditional_sigma.from_standard(rng.normal(), u)};
}

inline std::vector<Condition> sample_conditions(const EnvModel& m, std::size_t n, Stream& rng) {
  std::vector<Condition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_condition(m, rng));
  return out;
}

namespace detail {

// Probability-integral value in normal scores, using whichever tail is smaller.
inline double normal_score(double cdf, double sf, const char* what) {
  if (!(cdf > 0.0) || !(sf > 0.0))
    throw DomainError(std::string("rosenblatt: ") + what + " CDF is 0 or 1 at floating precision", what);
  return cdf < 0.5 ? normal_ppf(cdf) : normal_isf(sf);
}

}  // namespace detail

// Factorization order: U first, sigma_U | U second.
inline NormalPoint rosenblatt(const EnvModel& m, const Condition& x) {
  const auto& g = m.marginal_u;
  double z1;
  if (g.kind == MarginalKind::normal) {
    z1 = (x.u - g.mu) / g.sigma;
  } else if (g.kind == MarginalKind::lognormal) {
    if (x.u <= 0.0) throw DomainError("rosenblatt: u outside support", "u");
    z1 = (std::log(x.u) - g.mu) / g.sigma;
  } else {
    z1 = detail::normal_score(g.cdf(x.u), g.sf(x.u), "u");
  }
  const double z2 = m.conditional_sigma.standardize(x.sigma_u, x.u);
  // Beyond |t| ~ 38 the CDF saturates to exactly 0 or 1 in double precision.
  if (!std::isfinite(z1) || !std::isfinite(z2) || std::abs(z2) > 37.5 || std::abs(z1) > 37.5)
    throw DomainError("rosenblatt: CDF is 0 or 1 at floating precision", "sigma_u");
  return {z1, z2};
}

inline Condition inverse_rosenblatt(const EnvModel& m, const NormalPoint& p) {
  if (!std::isfinite(p.z1) || !std::isfinite(p.z2))
    throw NumericalError("inverse_rosenblatt: non-finite standard-normal point", "p");
  const auto& g = m.marginal_u;
  double u;
  if (g.kind == MarginalKind::normal) {
    u = g.mu + g.sigma * p.z1;
  } else if (g.kind == MarginalKind::lognormal) {
    u = std::exp(g.mu + g.sigma * p.z1);
  } else {
    const double lower = normal_cdf(p.z1);
    const double upper = normal_cdf(-p.z1);
    if (!(lower > 0.0) || !(upper > 0.0))
      throw NumericalError("inverse_rosenblatt: marginal inversion failed, probability saturated", "p.z1");
    u = p.z1 <= 0.0 ? g.quantile(lower) : g.isf(upper);
  }
  return {u, m.conditional_sigma.from_standard(p.z2, u)};
}

}  // namespace extremis
