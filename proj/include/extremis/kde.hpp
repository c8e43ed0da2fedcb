#pragma once

#include "extremis/env_model.hpp"
#include "extremis/random.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace extremis {

// Product-Gaussian kernel density estimate over (u, sigma_u).
class Kde2 {
 public:
  // Bandwidth per dimension; when absent, the normal-reference rule
  // h_d = sd_d * (4 / ((d + 2) n))^(1 / (d + 4)) with d = 2. Dimensions with
  // zero spread (e.g. a single point) use `fallback`.
  explicit Kde2(std::vector<Condition> points, std::optional<std::array<double, 2>> bandwidth = std::nullopt,
                double fallback = 1.0)
      : points_(std::move(points)) {
    if (points_.empty()) throw DomainError("exceedance_kde: need at least one point", "points");
    if (bandwidth) {
      h_ = *bandwidth;
    } else {
      h_ = silverman_bandwidth(points_, fallback);
    }
    norm_ = 1.0 / (2.0 * std::numbers::pi * h_[0] * h_[1] * static_cast<double>(points_.size()));
  }

  static std::array<double, 2> silverman_bandwidth(const std::vector<Condition>& pts, double fallback = 1.0) {
    const double n = static_cast<double>(pts.size());
    std::array<double, 2> h{};
    for (int d = 0; d < 2; ++d) {
      double s = 0.0, s2 = 0.0;
      for (const auto& p : pts) {
        const double v = d == 0 ? p.u : p.sigma_u;
        s += v;
        s2 += v * v;
      }
      const double mean = s / n;
      const double var = pts.size() > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
      const double sd = std::sqrt(var);
      h[static_cast<std::size_t>(d)] = sd > 0.0 ? sd * std::pow(4.0 / (4.0 * n), 1.0 / 6.0) : fallback;
    }
    return h;
  }

  double operator()(const Condition& x) const noexcept {
    double acc = 0.0;
    for (const auto& p : points_) {
      const double a = (x.u - p.u) / h_[0];
      const double b = (x.sigma_u - p.sigma_u) / h_[1];
      acc += std::exp(-0.5 * (a * a + b * b));
    }
    return acc * norm_;
  }

  Condition sample(Stream& rng) const {
    const auto& p = points_[rng.below(points_.size())];
    return {p.u + h_[0] * rng.normal(), p.sigma_u + h_[1] * rng.normal()};
  }

  const std::array<double, 2>& bandwidth() const noexcept { return h_; }
  const std::vector<Condition>& points() const noexcept { return points_; }

 private:
  std::vector<Condition> points_;
  std::array<double, 2> h_{};
  double norm_ = 0.0;
};

inline Kde2 exceedance_kde(std::vector<Condition> points,
                           std::optional<std::array<double, 2>> bandwidth = std::nullopt) {
  return Kde2(std::move(points), bandwidth);
}

}  // namespace extremis
