#pragma once

// IFORM and direct-sampling environmental contours, cropping, and the
// contour-based estimate of long-term extreme response.

#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/parallel.hpp"
#include "extremis/random.hpp"
#include "extremis/response_sim.hpp"
#include "extremis/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace extremis {

enum class ContourMethod { iform, direct_sampling };

inline const char* to_string(ContourMethod m) { return m == ContourMethod::iform ? "iform" : "ds"; }

struct ContourPoint {
  double theta_deg = 0.0;
  Condition x;
};

// Supporting line cos(theta) u + sin(theta) sigma_u = offset of a DS contour.
struct SupportingLine {
  double theta_deg = 0.0;
  double offset = 0.0;
};

struct Contour {
  std::vector<ContourPoint> points;
  double exceedance_prob = 0.0;
  ContourMethod method = ContourMethod::iform;
  double return_period_years = 0.0;
  double state_duration_hours = 1.0 / 6.0;
  std::vector<SupportingLine> lines;  // direct sampling only
};

inline double exceedance_probability(double return_period_years, double state_duration_hours) {
  if (!(return_period_years > 0.0) || !(state_duration_hours > 0.0))
    throw DomainError("exceedance_probability: arguments must be > 0", "return_period_years");
  return 1.0 / (365.25 * 24.0 * return_period_years / state_duration_hours);
}

inline double return_period_from_probability(double pe, double state_duration_hours) {
  return state_duration_hours / (365.25 * 24.0 * pe);
}

inline Contour iform_contour(const EnvModel& model, double pe, std::size_t n_points = 72) {
  if (!(pe > 0.0 && pe < 0.5)) throw DomainError("iform_contour: pe must lie in (0, 0.5)", "pe");
  if (n_points < 8) throw DomainError("iform_contour: need at least 8 points", "n_points");
  const double beta = normal_isf(pe);
  Contour c;
  c.exceedance_prob = pe;
  c.method = ContourMethod::iform;
  c.state_duration_hours = model.state_duration_hours;
  c.return_period_years = return_period_from_probability(pe, model.state_duration_hours);
  c.points.reserve(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_points);
    const Condition x = inverse_rosenblatt(model, {beta * std::cos(theta), beta * std::sin(theta)});
    c.points.push_back({theta * 180.0 / std::numbers::pi, x});
  }
  return c;
}

// Streaming direct-sampling construction. For each direction it keeps the k
// largest projections, where k makes the retained minimum the ceil((1-pe) n)
// order statistic; the sample set itself is never stored.
class DirectSamplingBuilder {
 public:
  // Directions are spaced uniformly in (u / scale_u, sigma_u / scale_sigma);
  // each line is stored with its unit normal in raw coordinates.
  DirectSamplingBuilder(std::size_t total_samples, double pe, std::size_t n_angles,
                        std::array<double, 2> axis_scale = {1.0, 1.0})
      : total_(total_samples), pe_(pe) {
    if (!(axis_scale[0] > 0.0) || !(axis_scale[1] > 0.0) || !std::isfinite(axis_scale[0]) ||
        !std::isfinite(axis_scale[1]))
      throw DomainError("ds_contour: axis scales must be finite and > 0", "axis_scale");
    if (!(pe > 0.0 && pe < 0.5)) throw DomainError("ds_contour: pe must lie in (0, 0.5)", "pe");
    if (n_angles < 8) throw DomainError("ds_contour: need at least 8 angles", "n_angles");
    if (static_cast<double>(total_samples) * pe < 1.0)
      throw InsufficientSamplesError("ds_contour: samples * pe < 1 (" + std::to_string(total_samples) +
                                         " samples for pe=" + detail::sci(pe) + ")",
                                     "samples");
    keep_ = total_ - order_statistic_index(1.0 - pe, total_) + 1;
    for (std::size_t k = 0; k < n_angles; ++k) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_angles);
      double phi = std::atan2(std::sin(theta) / axis_scale[1], std::cos(theta) / axis_scale[0]);
      if (phi < 0.0) phi += 2.0 * std::numbers::pi;
      if (axis_scale[0] == axis_scale[1]) phi = theta;
      cos_.push_back(std::cos(phi));
      sin_.push_back(std::sin(phi));
      theta_deg_.push_back(phi * 180.0 / std::numbers::pi);
    }
    heaps_.resize(n_angles);
  }

  void add(const Condition& x) {
    ++seen_;
    for (std::size_t k = 0; k < heaps_.size(); ++k) {
      const double p = cos_[k] * x.u + sin_[k] * x.sigma_u;
      auto& h = heaps_[k];
      if (h.size() < keep_) {
        h.push(p);
      } else if (p > h.top()) {
        h.pop();
        h.push(p);
      }
    }
  }

  Contour finish();

 private:
  using MinHeap = std::priority_queue<double, std::vector<double>, std::greater<double>>;
  std::size_t total_;
  std::size_t seen_ = 0;
  double pe_;
  std::size_t keep_ = 1;
  std::vector<double> cos_, sin_, theta_deg_;
  std::vector<MinHeap> heaps_;
};

namespace detail {

struct Vec2 {
  double x, y;
};

// Clips a convex polygon by the half-plane a x + b y <= c.
inline std::vector<Vec2> clip(const std::vector<Vec2>& poly, double a, double b, double c) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double fp = a * p.x + b * p.y - c;
    const double fq = a * q.x + b * q.y - c;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
      const double t = fp / (fp - fq);
      out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
    }
  }
  return out;
}

// Polygon vertices of the intersection of the half-planes, each tagged with
// the direction of its outward normal (bisector of the adjacent edge normals).
inline std::vector<ContourPoint> envelope(const std::vector<SupportingLine>& lines) {
  double scale = 0.0;
  auto clip_all = [&](double big) {
    std::vector<Vec2> poly{{-big, -big}, {big, -big}, {big, big}, {-big, big}};
    for (const auto& l : lines) {
      const double th = l.theta_deg * std::numbers::pi / 180.0;
      poly = clip(poly, std::cos(th), std::sin(th), l.offset);
      scale = std::max(scale, std::abs(l.offset));
      if (poly.empty()) break;
    }
    return poly;
  };
  std::vector<Vec2> poly = clip_all(1e9);
  // Second pass from a box just enclosing the first result; the huge initial
  // box costs ~1e9*eps in every intersection that involves its edges.
  double reach = 0.0;
  for (const auto& p : poly) reach = std::max({reach, std::abs(p.x), std::abs(p.y)});
  if (!poly.empty() && reach < 1e8) poly = clip_all(2.0 * reach + 1.0);
  const double tol = 1e-12 * std::max(1.0, scale);
  std::vector<Vec2> v;
  for (const auto& p : poly) {
    if (v.empty() || std::hypot(p.x - v.back().x, p.y - v.back().y) > tol) v.push_back(p);
  }
  while (v.size() > 1 && std::hypot(v.front().x - v.back().x, v.front().y - v.back().y) <= tol) v.pop_back();
  double area = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    area += p.x * q.y - q.x * p.y;
  }
  if (v.size() < 3 || std::abs(area) <= tol * std::max(1.0, scale))
    throw InsufficientSamplesError("ds_contour: degenerate envelope (samples collapse to a point or line)", "samples");

  const std::size_t n = v.size();
  std::vector<ContourPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = v[(i + n - 1) % n];
    const Vec2& cur = v[i];
    const Vec2& next = v[(i + 1) % n];
    // Counter-clockwise polygon: the outward normal of edge p->q is (dy, -dx).
    auto normal = [](const Vec2& p, const Vec2& q) {
      const double dx = q.x - p.x, dy = q.y - p.y, len = std::hypot(dx, dy);
      return Vec2{dy / len, -dx / len};
    };
    const Vec2 n1 = normal(prev, cur), n2 = normal(cur, next);
    double ang = std::atan2(n1.y + n2.y, n1.x + n2.x) * 180.0 / std::numbers::pi;
    if (ang < 0.0) ang += 360.0;
    out.push_back({ang, {cur.x, cur.y}});
  }
  std::sort(out.begin(), out.end(), [](const ContourPoint& a, const ContourPoint& b) { return a.theta_deg < b.theta_deg; });
  return out;
}

}  // namespace detail

inline Contour DirectSamplingBuilder::finish() {
  if (seen_ != total_)
    throw InsufficientSamplesError("ds_contour: builder received " + std::to_string(seen_) + " of " +
                                       std::to_string(total_) + " declared samples",
                                   "samples");
  Contour c;
  c.exceedance_prob = pe_;
  c.method = ContourMethod::direct_sampling;
  for (std::size_t k = 0; k < heaps_.size(); ++k) c.lines.push_back({theta_deg_[k], heaps_[k].top()});
  c.points = detail::envelope(c.lines);
  return c;
}

// Sample standard deviation of each axis, for standardized directions.
inline std::array<double, 2> ds_axis_scale(std::span<const Condition> x) {
  if (x.size() < 2) return {1.0, 1.0};
  double mu = 0, ms = 0;
  for (const auto& c : x) {
    mu += c.u;
    ms += c.sigma_u;
  }
  mu /= static_cast<double>(x.size());
  ms /= static_cast<double>(x.size());
  double vu = 0, vs = 0;
  for (const auto& c : x) {
    vu += (c.u - mu) * (c.u - mu);
    vs += (c.sigma_u - ms) * (c.sigma_u - ms);
  }
  const double d = static_cast<double>(x.size() - 1);
  const double su = std::sqrt(vu / d), ss = std::sqrt(vs / d);
  if (!(su > 0.0) || !(ss > 0.0)) return {1.0, 1.0};
  return {su, ss};
}

inline Contour ds_contour(const std::vector<Condition>& samples, double pe, std::size_t n_angles = 72,
                          bool standardize = true) {
  if (samples.empty()) throw InsufficientSamplesError("ds_contour: no samples", "samples");
  DirectSamplingBuilder b(samples.size(), pe, n_angles,
                          standardize ? ds_axis_scale(samples) : std::array<double, 2>{1.0, 1.0});
  for (const auto& x : samples) b.add(x);
  return b.finish();
}

// Streams `n` draws from the model into a DS contour. With standardize, the
// axis scales come from the first min(n, 100000) draws, which are buffered.
inline Contour ds_contour(const EnvModel& model, std::size_t n, double pe, std::size_t n_angles, Stream& rng,
                          bool standardize = true) {
  std::vector<Condition> pilot(standardize ? std::min<std::size_t>(n, 100000) : 0);
  for (auto& x : pilot) x = sample_condition(model, rng);
  DirectSamplingBuilder b(n, pe, n_angles, standardize ? ds_axis_scale(pilot) : std::array<double, 2>{1.0, 1.0});
  for (const auto& x : pilot) b.add(x);
  for (std::size_t i = pilot.size(); i < n; ++i) b.add(sample_condition(model, rng));
  Contour c = b.finish();
  c.state_duration_hours = model.state_duration_hours;
  c.return_period_years = return_period_from_probability(pe, model.state_duration_hours);
  return c;
}

inline Contour crop_contour(const Contour& c, double u_min, double u_max) {
  if (!(u_min < u_max)) throw DomainError("crop_contour: u_min must be below u_max", "crop");
  Contour out = c;
  out.points.clear();
  for (const auto& p : c.points)
    if (p.x.u >= u_min && p.x.u <= u_max) out.points.push_back(p);
  if (out.points.empty()) throw EmptyContourError("crop_contour: no points inside the crop window", "crop");
  return out;
}

// ---------------------------------------------------------------------------
// Contour-based extreme response

struct ContourResponseRow {
  std::size_t point = 0;
  Condition x;
  double quantile = 0.0;
  double response = 0.0;
  bool warning = false;  // fewer than one sample expected above the quantile
};

struct QuantileMaximum {
  double quantile = 0.0;
  double response = 0.0;
  Condition argmax;
  std::size_t point = 0;
};

struct ContourResponseTable {
  std::vector<ContourResponseRow> rows;
  std::vector<QuantileMaximum> maxima;  // one per quantile level
  std::size_t n_seeds = 0;
  std::size_t retries = 0;
  std::vector<std::vector<double>> maxima_samples;  // sorted per point

  const QuantileMaximum& at_quantile(double q) const {
    for (const auto& m : maxima)
      if (std::abs(m.quantile - q) < 1e-12) return m;
    throw DomainError("contour response: quantile not tabulated", "quantile");
  }
};

inline double empirical_quantile_sorted(const std::vector<double>& sorted, double q) {
  return sorted[order_statistic_index(q, sorted.size()) - 1];
}

inline bool quantile_tail_warning(double q, std::size_t n) {
  return static_cast<double>(n) * (1.0 - q) < 1.0 + 1e-9;
}

inline ContourResponseTable contour_extreme_response(const Contour& c, const SimPreset& sim, std::size_t n_seeds,
                                                     std::vector<double> quantiles, std::uint64_t master_seed,
                                                     int blocks = 1, unsigned threads = 1) {
  if (n_seeds < 2) throw DomainError("contour_extreme_response: need at least 2 seeds", "n_seeds");
  if (quantiles.empty()) throw DomainError("contour_extreme_response: no quantile levels", "quantiles");
  for (double q : quantiles)
    if (!(q > 0.0 && q < 1.0)) throw DomainError("contour_extreme_response: quantiles must lie in (0, 1)", "quantiles");
  std::sort(quantiles.begin(), quantiles.end());

  const std::size_t np = c.points.size();
  ContourResponseTable t;
  t.n_seeds = n_seeds;
  t.maxima_samples.resize(np);
  std::vector<std::size_t> retries(np, 0);
  parallel_for(np, threads, [&](std::size_t i) {
    auto& v = t.maxima_samples[i];
    v.resize(n_seeds);
    for (std::size_t k = 0; k < n_seeds; ++k) {
      const auto r = simulate_with_retry(c.points[i].x, derive_seed(master_seed, "contour-response", {i, k}), sim, blocks);
      v[k] = r.value;
      retries[i] += static_cast<std::size_t>(r.retries);
    }
    std::sort(v.begin(), v.end());
  });
  for (auto r : retries) t.retries += r;

  for (double q : quantiles) t.maxima.push_back({q, -std::numeric_limits<double>::infinity(), {}, 0});
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < quantiles.size(); ++j) {
      const double q = quantiles[j];
      const double val = empirical_quantile_sorted(t.maxima_samples[i], q);
      t.rows.push_back({i, c.points[i].x, q, val, quantile_tail_warning(q, n_seeds)});
      if (val > t.maxima[j].response) t.maxima[j] = {q, val, c.points[i].x, i};
    }
  }
  return t;
}

// Percentile-bootstrap interval for the table-wide maximum at level q,
// resampling seeds independently at every contour point.
inline std::pair<double, double> contour_bootstrap_interval(const ContourResponseTable& t, double q,
                                                            std::size_t n_boot, double level, Stream& rng) {
  std::vector<double> stats(n_boot);
  std::vector<double> buf;
  for (std::size_t b = 0; b < n_boot; ++b) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : t.maxima_samples) {
      buf.resize(s.size());
      for (auto& x : buf) x = s[rng.below(s.size())];
      std::sort(buf.begin(), buf.end());
      best = std::max(best, empirical_quantile_sorted(buf, q));
    }
    stats[b] = best;
  }
  std::sort(stats.begin(), stats.end());
  const double a = 0.5 * (1.0 - level);
  return {empirical_quantile_sorted(stats, a), empirical_quantile_sorted(stats, 1.0 - a)};
}

// ---------------------------------------------------------------------------
// CSV

inline void write_contour_csv(const Contour& c, std::ostream& os) {
  os.precision(17);
  os << "theta_deg,u,sigma_u\n";
  for (const auto& p : c.points) os << p.theta_deg << ',' << p.x.u << ',' << p.x.sigma_u << '\n';
}

inline Contour read_contour_csv(std::istream& is) {
  Contour c;
  std::string line;
  while (std::getline(is, line) && !line.empty() && line[0] == '#') {
  }
  if (line.rfind("theta_deg,u,sigma_u", 0) != 0)
    throw ParseError("contour csv: expected header theta_deg,u,sigma_u", "contour");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ContourPoint p;
    char c1 = 0, c2 = 0;
    if (!(ls >> p.theta_deg >> c1 >> p.x.u >> c2 >> p.x.sigma_u) || c1 != ',' || c2 != ',')
      throw ParseError("contour csv: malformed line " + std::to_string(lineno), "contour");
    c.points.push_back(p);
  }
  if (c.points.empty()) throw EmptyContourError("contour csv: no points", "contour");
  return c;
}

inline void write_response_csv(const ContourResponseTable& t, std::ostream& os) {
  os.precision(17);
  os << "u,sigma_u,quantile,response_mnm\n";
  for (const auto& r : t.rows) os << r.x.u << ',' << r.x.sigma_u << ',' << r.quantile << ',' << r.response << '\n';
}

}  // namespace extremis
