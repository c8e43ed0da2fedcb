#pragma once

#include "extremis/random.hpp"
#include "extremis/special.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace extremis {

// T-year return value: order statistic ceil((1 - 1/T) N) of the annual maxima.
inline double return_value(std::span<const double> annual_maxima, double T_years) {
  if (annual_maxima.empty() || !(T_years > 1.0)) return 0.0;
  std::vector<double> s(annual_maxima.begin(), annual_maxima.end());
  const std::size_t k = order_statistic_index(1.0 - 1.0 / T_years, s.size());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end());
  return s[k - 1];
}

// Annual probability that the maximum strictly exceeds the threshold.
inline double failure_probability(std::span<const double> annual_maxima, double threshold) {
  if (annual_maxima.empty()) return 0.0;
  const auto n = std::count_if(annual_maxima.begin(), annual_maxima.end(), [&](double v) { return v > threshold; });
  return static_cast<double>(n) / static_cast<double>(annual_maxima.size());
}

// Year-block bootstrap: the years are cut into `blocks` contiguous blocks,
// which are resampled with replacement. Returns the replicate return values.
inline std::vector<double> block_bootstrap_return_values(std::span<const double> annual_maxima, double T_years,
                                                         std::size_t blocks, std::size_t replicates, Stream& rng) {
  const std::size_t n = annual_maxima.size();
  blocks = std::clamp<std::size_t>(blocks, 1, std::max<std::size_t>(1, n));
  std::vector<double> out;
  out.reserve(replicates);
  std::vector<double> buf;
  buf.reserve(n);
  for (std::size_t r = 0; r < replicates; ++r) {
    buf.clear();
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t pick = rng.below(blocks);
      const std::size_t lo = n * pick / blocks, hi = n * (pick + 1) / blocks;
      buf.insert(buf.end(), annual_maxima.begin() + static_cast<std::ptrdiff_t>(lo),
                 annual_maxima.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    out.push_back(return_value(buf, T_years));
  }
  return out;
}

inline double standard_deviation(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Percentile interval at `level` of bootstrap replicates.
inline std::pair<double, double> percentile_interval(std::vector<double> replicates, double level) {
  std::sort(replicates.begin(), replicates.end());
  const double a = 0.5 * (1.0 - level);
  return {replicates[order_statistic_index(a, replicates.size()) - 1],
          replicates[order_statistic_index(1.0 - a, replicates.size()) - 1]};
}

}  // namespace extremis
