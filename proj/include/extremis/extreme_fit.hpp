#pragma once

// Short-term extreme-value fits: Gumbel/GEV maximum likelihood, random-walk
// Metropolis over the likelihood, and the batched Gaussian approximation of
// the parameter likelihood that feeds the Gaussian process.

#include "extremis/error.hpp"
#include "extremis/optimize.hpp"
#include "extremis/random.hpp"
#include "extremis/special.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace extremis {

enum class EvKind { gumbel, gev };

struct EvFamily {
  EvKind kind = EvKind::gumbel;
  double shape_min = -0.5;
  double shape_max = 0.5;

  static EvFamily gumbel() { return {EvKind::gumbel}; }
  static EvFamily gev() { return {EvKind::gev}; }

  int dim() const noexcept { return kind == EvKind::gumbel ? 2 : 3; }
  const char* name() const noexcept { return kind == EvKind::gumbel ? "gumbel" : "gev"; }
};

inline EvFamily parse_family(const std::string& s) {
  if (s == "gumbel") return EvFamily::gumbel();
  if (s == "gev") return EvFamily::gev();
  throw ParseError("family: expected gumbel or gev, got '" + s + "'", "family");
}

// Parameter vectors are (location alpha, scale beta[, shape gamma]).
using EvParams = Eigen::VectorXd;

inline constexpr double kShapeSeriesSwitch = 1e-8;

namespace detail {

inline double shape_of(const EvFamily& f, const EvParams& p) noexcept {
  return f.kind == EvKind::gev ? p[2] : 0.0;
}

inline void check_params(const EvFamily& f, const EvParams& p) {
  if (p.size() != f.dim()) throw DomainError("extreme-value parameters have the wrong dimension", "params");
  if (!(p[1] > 0.0) || !std::isfinite(p[0])) throw DomainError("extreme-value scale must be > 0", "params");
  if (f.kind == EvKind::gev && !std::isfinite(p[2])) throw DomainError("GEV shape must be finite", "params");
}

}  // namespace detail

inline double ev_cdf(const EvFamily& f, const EvParams& p, double y) {
  detail::check_params(f, p);
  const double z = (y - p[0]) / p[1];
  const double g = detail::shape_of(f, p);
  if (std::abs(g) < kShapeSeriesSwitch) return std::exp(-std::exp(-z));
  const double t = 1.0 + g * z;
  if (t <= 0.0) return g > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(t, -1.0 / g));
}

inline double ev_logpdf(const EvFamily& f, const EvParams& p, double y) noexcept {
  const double beta = p[1];
  const double z = (y - p[0]) / beta;
  const double g = detail::shape_of(f, p);
  if (std::abs(g) < kShapeSeriesSwitch) return -std::log(beta) - z - std::exp(-z);
  const double t = 1.0 + g * z;
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  const double lt = std::log(t);
  return -std::log(beta) - (1.0 + 1.0 / g) * lt - std::exp(-lt / g);
}

inline double ev_loglik(const EvFamily& f, const EvParams& p, std::span<const double> y) {
  if (!(p[1] > 0.0)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double v : y) s += ev_logpdf(f, p, v);
  return s;
}

inline double ev_quantile(const EvFamily& f, const EvParams& p, double prob) {
  detail::check_params(f, p);
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("ev_quantile: level must lie in (0, 1)", "p");
  const double l = std::log(-std::log(prob));
  const double g = detail::shape_of(f, p);
  if (std::abs(g) < kShapeSeriesSwitch) return p[0] + p[1] * (-l + 0.5 * g * l * l);
  return p[0] + p[1] / g * (std::exp(-g * l) - 1.0);
}

inline double ev_sample(const EvFamily& f, const EvParams& p, Stream& rng) {
  return ev_quantile(f, p, rng.uniform());
}

// ---------------------------------------------------------------------------
// Maximum likelihood

namespace detail {

// Mean negative log-likelihood in w = (alpha, log beta[, gamma]) with its gradient.
inline double mean_nll(const EvFamily& f, std::span<const double> y, const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
  const double a = w[0];
  const double beta = std::exp(w[1]);
  const double g = f.kind == EvKind::gev ? w[2] : 0.0;
  grad.setZero(w.size());
  double nll = 0.0;
  const double inv_n = 1.0 / static_cast<double>(y.size());
  if (f.kind == EvKind::gumbel || std::abs(g) < 1e-7) {
    for (double v : y) {
      const double z = (v - a) / beta;
      const double e = std::exp(-z);
      nll -= -w[1] - z - e;
      const double gz = -1.0 + e;  // d logpdf / dz
      grad[0] += gz / beta;        // -d logpdf/da = gz / beta
      grad[1] -= -1.0 - z * gz;
    }
    if (f.kind == EvKind::gev) {
      // d/dgamma of the GEV log-density at gamma = 0: z^2/2 (1 - e^{-z}) - z.
      for (double v : y) {
        const double z = (v - a) / beta;
        grad[2] -= 0.5 * z * z * (1.0 - std::exp(-z)) - z;
      }
    }
  } else {
    for (double v : y) {
      const double z = (v - a) / beta;
      const double t = 1.0 + g * z;
      if (t <= 0.0) return std::numeric_limits<double>::infinity();
      const double lt = std::log(t);
      const double tp = std::exp(-lt / g);  // t^{-1/g}
      nll -= -w[1] - (1.0 + 1.0 / g) * lt - tp;
      const double gz = (-(g + 1.0) + tp) / t;
      grad[0] += gz / beta;
      grad[1] -= -1.0 - z * gz;
      const double dg = lt / (g * g) - (1.0 + 1.0 / g) * z / t - tp * (lt / (g * g) - z / (g * t));
      grad[2] -= dg;
    }
  }
  grad *= inv_n;
  return nll * inv_n;
}

inline void check_sample(const EvFamily& f, std::span<const double> y) {
  const std::size_t need = f.kind == EvKind::gumbel ? 3 : 5;
  if (y.size() < need)
    throw DegenerateSampleError("fit: need at least " + std::to_string(need) + " observations", "samples");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("fit: non-finite observation", "samples");
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi)))
    throw DegenerateSampleError("fit: all observations are equal", "samples");
}

}  // namespace detail

struct MleResult {
  EvParams params;
  double loglik = 0.0;
  double gradient_norm = 0.0;  // projected, standardized data, per observation
  int iterations = 0;
};

inline MleResult fit_mle(std::span<const double> y, const EvFamily& f) {
  detail::check_sample(f, y);
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = (y[i] - mean) / sd;

  const int d = f.dim();
  Eigen::VectorXd w0(d), lo(d), hi(d);
  const double beta0 = std::sqrt(6.0) / std::numbers::pi;
  w0[0] = -kEulerGamma * beta0;
  w0[1] = std::log(beta0);
  lo[0] = lo[1] = -std::numeric_limits<double>::infinity();
  hi[0] = hi[1] = std::numeric_limits<double>::infinity();
  if (d == 3) {
    w0[2] = 0.0;
    lo[2] = f.shape_min;
    hi[2] = f.shape_max;
  }
  auto obj = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) { return detail::mean_nll(f, z, w, g); };
  BfgsOptions opt;
  opt.gradient_tolerance = 1e-9;
  opt.max_iterations = 1000;
  BfgsResult r = minimize_box(obj, w0, lo, hi, opt);
  if (!r.converged && r.projected_gradient_norm >= 1e-6)
    throw ConvergenceError("fit_mle: no convergence (gradient norm " + std::to_string(r.projected_gradient_norm) +
                               ", iterations " + std::to_string(r.iterations) + ")",
                           "samples");
  MleResult out;
  out.params.resize(d);
  out.params[0] = mean + sd * r.x[0];
  out.params[1] = sd * std::exp(r.x[1]);
  if (d == 3) out.params[2] = r.x[2];
  out.gradient_norm = r.projected_gradient_norm;
  out.iterations = r.iterations;
  out.loglik = ev_loglik(f, out.params, y);
  return out;
}

// ---------------------------------------------------------------------------
// MCMC

struct McmcOptions {
  std::size_t thinning = 5;
  double burn_in_fraction = 0.2;  // of one batch
  double target_acceptance_lo = 0.2;
  double target_acceptance_hi = 0.4;
};

// Adaptive random-walk Metropolis on w = (alpha, log beta[, gamma]) with a
// flat prior on w, so the target is proportional to the likelihood. The
// proposal covariance starts from the inverse Hessian at the MLE and its
// scale is tuned during burn-in only.
class McmcChain {
 public:
  McmcChain(std::vector<double> samples, const EvFamily& f, std::uint64_t seed, std::size_t batch,
            const McmcOptions& opt = {})
      : y_(std::move(samples)), f_(f), opt_(opt), rng_(seed) {
    mle_ = fit_mle(y_, f_);
    const int d = f_.dim();
    w_.resize(d);
    w_[0] = mle_.params[0];
    w_[1] = std::log(mle_.params[1]);
    if (d == 3) w_[2] = mle_.params[2];
    logp_ = log_target(w_);
    build_proposal();
    burn_in(static_cast<std::size_t>(std::ceil(opt_.burn_in_fraction * static_cast<double>(batch * opt_.thinning))));
  }

  // Appends n thinned draws, in natural parameters, to `out` (row per draw).
  void draw(std::size_t n, std::vector<EvParams>& out) {
    const int d = f_.dim();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < opt_.thinning; ++k) step();
      EvParams p(d);
      p[0] = w_[0];
      p[1] = std::exp(w_[1]);
      if (d == 3) p[2] = w_[2];
      out.push_back(p);
    }
    const double rate = acceptance_rate();
    if (rate < 0.01 || rate > 0.99)
      throw ConvergenceError("mcmc: pathological chain, acceptance rate " + std::to_string(rate), "mcmc");
  }

  double acceptance_rate() const noexcept {
    return steps_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(steps_);
  }
  const MleResult& mle() const noexcept { return mle_; }
  std::size_t observations() const noexcept { return y_.size(); }

 private:
  double log_target(const Eigen::VectorXd& w) const {
    if (f_.kind == EvKind::gev && (w[2] < f_.shape_min || w[2] > f_.shape_max))
      return -std::numeric_limits<double>::infinity();
    EvParams p(f_.dim());
    p[0] = w[0];
    p[1] = std::exp(w[1]);
    if (f_.dim() == 3) p[2] = w[2];
    return ev_loglik(f_, p, y_);
  }

  void build_proposal() {
    const int d = f_.dim();
    Eigen::MatrixXd H(d, d);
    Eigen::VectorXd gp(d), gm(d);
    const double n = static_cast<double>(y_.size());
    for (int j = 0; j < d; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(w_[j]));
      Eigen::VectorXd wp = w_, wm = w_;
      wp[j] += h;
      wm[j] -= h;
      detail::mean_nll(f_, y_, wp, gp);
      detail::mean_nll(f_, y_, wm, gm);
      H.col(j) = n * (gp - gm) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    Eigen::MatrixXd cov;
    if (llt.info() == Eigen::Success && std::isfinite(H.sum())) {
      cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    } else {
      cov = Eigen::MatrixXd::Zero(d, d);
      for (int j = 0; j < d; ++j) cov(j, j) = H(j, j) > 0.0 ? 1.0 / H(j, j) : 1e-2;
    }
    Eigen::LLT<Eigen::MatrixXd> c(cov);
    chol_ = c.matrixL();
    if (c.info() != Eigen::Success) chol_ = Eigen::MatrixXd::Identity(d, d) * 0.1;
    lambda_ = 2.38 / std::sqrt(static_cast<double>(d));
  }

  bool step() {
    const int d = f_.dim();
    Eigen::VectorXd e(d);
    for (int j = 0; j < d; ++j) e[j] = rng_.normal();
    const Eigen::VectorXd prop = w_ + lambda_ * (chol_ * e);
    const double lp = log_target(prop);
    ++steps_;
    if (std::isfinite(lp) && std::log(rng_.uniform()) < lp - logp_) {
      w_ = prop;
      logp_ = lp;
      ++accepted_;
      return true;
    }
    return false;
  }

  void burn_in(std::size_t steps) {
    std::size_t window = 0, acc = 0;
    for (std::size_t i = 0; i < steps; ++i) {
      acc += step() ? 1 : 0;
      if (++window == 100) {
        const double rate = static_cast<double>(acc) / 100.0;
        if (rate < opt_.target_acceptance_lo) lambda_ *= 0.8;
        if (rate > opt_.target_acceptance_hi) lambda_ *= 1.25;
        lambda_ = std::clamp(lambda_, 1e-3, 1e2);
        window = acc = 0;
      }
    }
    steps_ = accepted_ = 0;
  }

  std::vector<double> y_;
  EvFamily f_;
  McmcOptions opt_;
  Stream rng_;
  MleResult mle_;
  Eigen::VectorXd w_;
  double logp_ = 0.0;
  Eigen::MatrixXd chol_;
  double lambda_ = 1.0;
  std::size_t steps_ = 0, accepted_ = 0;
};

struct McmcResult {
  std::vector<EvParams> draws;
  double acceptance_rate = 0.0;
};

inline McmcResult mcmc_posterior_samples(std::span<const double> y, const EvFamily& f, std::size_t n_draws,
                                         std::uint64_t seed, const McmcOptions& opt = {}) {
  McmcChain chain(std::vector<double>(y.begin(), y.end()), f, seed, n_draws, opt);
  McmcResult r;
  chain.draw(n_draws, r.draws);
  r.acceptance_rate = chain.acceptance_rate();
  return r;
}

// ---------------------------------------------------------------------------
// Gaussian likelihood approximation

struct MomentEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline MomentEstimate moments(const std::vector<EvParams>& draws) {
  const auto d = draws.front().size();
  MomentEstimate m{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& p : draws) m.mean += p;
  m.mean /= static_cast<double>(draws.size());
  for (const auto& p : draws) {
    const Eigen::VectorXd c = p - m.mean;
    m.cov += c * c.transpose();
  }
  m.cov /= static_cast<double>(draws.size() - 1);
  return m;
}

// Elementwise agreement of two moment estimates. Mean entries are compared
// relative to max(|a|, |b|, posterior sd); covariance entries relative to
// sqrt(C_ii C_jj). Both scales have an absolute floor.
inline bool estimates_agree(const MomentEstimate& a, const MomentEstimate& b, double rel_tol, double floor = 1e-8) {
  const auto d = a.mean.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double sd = std::sqrt(std::max(a.cov(i, i), b.cov(i, i)));
    const double scale = std::max({std::abs(a.mean[i]), std::abs(b.mean[i]), sd, floor});
    if (std::abs(a.mean[i] - b.mean[i]) > rel_tol * scale) return false;
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double scale = std::max(std::sqrt(std::abs(a.cov(i, i) * a.cov(j, j))), floor);
      if (std::abs(a.cov(i, j) - b.cov(i, j)) > rel_tol * scale) return false;
    }
  }
  return true;
}

// Convergence rule: the last three consecutive estimates agree pairwise.
inline bool three_consecutive_agree(const std::vector<MomentEstimate>& history, double rel_tol) {
  if (history.size() < 3) return false;
  const auto& a = history[history.size() - 3];
  const auto& b = history[history.size() - 2];
  const auto& c = history[history.size() - 1];
  return estimates_agree(a, b, rel_tol) && estimates_agree(b, c, rel_tol) && estimates_agree(a, c, rel_tol);
}

struct ShortTermFit {
  EvFamily family;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n_obs = 0;
  std::size_t mcmc_draws_used = 0;
  std::size_t batches = 0;
  double acceptance_rate = 0.0;
  EvParams mle;
};

struct LikelihoodApproxOptions {
  double rel_tol = 0.01;
  std::size_t batch = 1000;
  std::size_t max_draws = 400000;
  McmcOptions mcmc;
};

inline ShortTermFit gaussian_likelihood_approx(std::span<const double> y, const EvFamily& f, std::uint64_t seed,
                                               const LikelihoodApproxOptions& opt = {}) {
  McmcChain chain(std::vector<double>(y.begin(), y.end()), f, seed, opt.batch, opt.mcmc);
  std::vector<EvParams> draws;
  std::vector<MomentEstimate> history;
  while (true) {
    chain.draw(opt.batch, draws);
    history.push_back(moments(draws));
    if (three_consecutive_agree(history, opt.rel_tol)) break;
    if (draws.size() >= opt.max_draws)
      throw ConvergenceError("gaussian_likelihood_approx: draw budget " + std::to_string(opt.max_draws) +
                                 " exceeded before three consecutive estimates agreed",
                             "max_draws");
  }
  ShortTermFit fit;
  fit.family = f;
  fit.mean = history.back().mean;
  fit.cov = 0.5 * (history.back().cov + history.back().cov.transpose());
  fit.n_obs = y.size();
  fit.mcmc_draws_used = draws.size();
  fit.batches = history.size();
  fit.acceptance_rate = chain.acceptance_rate();
  fit.mle = chain.mle().params;
  return fit;
}

// Cholesky with diagonal jitter up to max_jitter; returns the jitter used or
// a negative value on failure.
inline double cholesky_jitter(const Eigen::MatrixXd& a, double max_jitter = 1e-10) {
  const auto n = a.rows();
  for (double jitter : {0.0, 1e-14, 1e-12, max_jitter}) {
    Eigen::LLT<Eigen::MatrixXd> llt(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return jitter;
  }
  return -1.0;
}

inline nlohmann::json to_json(const ShortTermFit& fit) {
  std::vector<double> cov;
  for (Eigen::Index i = 0; i < fit.cov.rows(); ++i)
    for (Eigen::Index j = 0; j < fit.cov.cols(); ++j) cov.push_back(fit.cov(i, j));
  return {{"family", fit.family.name()},
          {"mean", std::vector<double>(fit.mean.data(), fit.mean.data() + fit.mean.size())},
          {"covariance", cov},
          {"n_obs", fit.n_obs},
          {"diagnostics",
           {{"mcmc_draws_used", fit.mcmc_draws_used},
            {"batches", fit.batches},
            {"acceptance_rate", fit.acceptance_rate},
            {"mle", std::vector<double>(fit.mle.data(), fit.mle.data() + fit.mle.size())}}}};
}

inline ShortTermFit short_term_fit_from_json(const nlohmann::json& j) {
  ShortTermFit fit;
  try {
    fit.family = parse_family(j.at("family").get<std::string>());
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (d != fit.family.dim() || cov.size() != mean.size() * mean.size())
      throw ParseError("fit record: inconsistent dimensions", "covariance");
    fit.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    fit.cov.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index k = 0; k < d; ++k) fit.cov(i, k) = cov[static_cast<std::size_t>(i * d + k)];
    fit.n_obs = j.value("n_obs", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fit record: ") + e.what(), "fit");
  }
  return fit;
}

}  // namespace extremis
