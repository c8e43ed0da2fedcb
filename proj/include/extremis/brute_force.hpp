#pragma once

// Truncated brute-force Monte Carlo against the simulator: the reference
// return values.

#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/response_sim.hpp"
#include "extremis/return_values.hpp"
#include "extremis/seq_sampling.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace extremis {

// States with u < cutoff_u or sigma_u < cutoff_sigma get zero response.
struct TruncationSpec {
  double cutoff_u = 0.0;
  double cutoff_sigma = 0.0;

  bool truncates(const Condition& x) const noexcept { return x.u < cutoff_u || x.sigma_u < cutoff_sigma; }
};

inline void validate(const TruncationSpec& t) {
  if (!(t.cutoff_u >= 0.0)) throw ValidationError("cutoff_u must be >= 0", "cutoff_u");
  if (!(t.cutoff_sigma >= 0.0)) throw ValidationError("cutoff_sigma must be >= 0", "cutoff_sigma");
}

struct BruteForceOptions {
  std::size_t years = 10000;
  TruncationSpec truncation;
  std::uint64_t master_seed = 7;
  unsigned threads = 1;
  std::size_t bootstrap_blocks = 10;
  std::size_t bootstrap_replicates = 200;
  double pf_threshold = 27.112;
  std::size_t keep_per_year = 4;
};

struct BruteForceResult {
  double rv50 = 0.0;
  double rv100 = 0.0;
  double pf = 0.0;
  double fraction_simulated = 0.0;
  double bootstrap_se50 = 0.0;
  double bootstrap_se100 = 0.0;
  std::size_t retries = 0;
  LongTermRun run;
};

// Every state's response seed depends only on (year, state index), so a
// state simulated under two truncation settings gets the same response.
inline BruteForceResult brute_force_return_values(const EnvModel& env, const SimPreset& sim,
                                                  const BruteForceOptions& opt) {
  if (opt.years < 100) throw DomainError("brute force needs years >= 100", "years");
  validate(opt.truncation);
  const int blocks = blocks_per_state(sim, env.state_duration_hours);
  const std::uint64_t cond_seed = derive_seed(opt.master_seed, "bf-conditions");
  const std::uint64_t resp_seed = derive_seed(opt.master_seed, "bf-response");
  std::vector<std::size_t> retries(opt.years, 0);

  LongTermOptions lt;
  lt.years = opt.years;
  lt.keep_per_year = opt.keep_per_year;
  lt.threads = opt.threads;
  auto sampler = [&](const Condition& x, std::size_t year, std::size_t state, Stream&,
                     ClampCounters&) -> std::optional<double> {
    if (opt.truncation.truncates(x)) return std::nullopt;
    const auto r = simulate_with_retry(x, derive_seed(resp_seed, "state", {year, state}), sim, blocks);
    retries[year] += static_cast<std::size_t>(r.retries);
    return r.value;
  };

  BruteForceResult out;
  out.run = simulate_longterm_with(env, lt, cond_seed, resp_seed, sampler);
  for (auto r : retries) out.retries += r;
  out.rv50 = return_value(out.run.annual_maxima, 50.0);
  out.rv100 = return_value(out.run.annual_maxima, 100.0);
  out.pf = failure_probability(out.run.annual_maxima, opt.pf_threshold);
  out.fraction_simulated = out.run.fraction_simulated();
  Stream brng = make_stream(opt.master_seed, "bf-bootstrap");
  const auto b50 = block_bootstrap_return_values(out.run.annual_maxima, 50.0, opt.bootstrap_blocks,
                                                 opt.bootstrap_replicates, brng);
  const auto b100 = block_bootstrap_return_values(out.run.annual_maxima, 100.0, opt.bootstrap_blocks,
                                                  opt.bootstrap_replicates, brng);
  out.bootstrap_se50 = standard_deviation(b50);
  out.bootstrap_se100 = standard_deviation(b100);
  return out;
}

inline nlohmann::json to_json(const BruteForceResult& r) {
  return {{"rv50", r.rv50},
          {"rv100", r.rv100},
          {"pf", r.pf},
          {"fraction_simulated", r.fraction_simulated},
          {"bootstrap_se", r.bootstrap_se50},
          {"bootstrap_se50", r.bootstrap_se50},
          {"bootstrap_se100", r.bootstrap_se100},
          {"years", r.run.years},
          {"simulated_states", r.run.simulated},
          {"seed_retries", r.retries}};
}

}  // namespace extremis
