#pragma once

// Independent-output Gaussian-process regression of extreme-value parameters
// over (U, sigma_U). Each output has its own anisotropic Matern-3/2 kernel and
// heteroscedastic noise taken from the diagonal of the per-point likelihood
// covariance.

#include "extremis/env_model.hpp"
#include "extremis/error.hpp"
#include "extremis/extreme_fit.hpp"
#include "extremis/optimize.hpp"
#include "extremis/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace extremis {

struct GpTrainingPoint {
  Condition x;
  Eigen::VectorXd mean;  // fitted parameter mean
  Eigen::MatrixXd cov;   // its covariance
};

// Hyperparameters in normalized input/output space.
struct MaternKernel {
  double variance = 1.0;
  std::array<double, 2> length{1.0, 1.0};

  double operator()(const double* a, const double* b) const noexcept {
    const double d0 = (a[0] - b[0]) / length[0];
    const double d1 = (a[1] - b[1]) / length[1];
    const double sr = std::sqrt(3.0 * (d0 * d0 + d1 * d1));
    return variance * (1.0 + sr) * std::exp(-sr);
  }
};

struct GpNormalization {
  std::array<double, 2> input_mean{0.0, 0.0};
  std::array<double, 2> input_scale{1.0, 1.0};
  std::vector<double> output_mean;
  std::vector<double> output_scale;
};

struct GpBounds {
  double length_min = 0.05, length_max = 10.0;
  double variance_min = 1e-4, variance_max = 1e2;
};

struct GpOptions {
  GpBounds bounds;
  std::size_t restarts = 6;
  double jitter = 1e-10;
  std::optional<GpNormalization> normalization;     // fixed instead of derived
  std::optional<std::vector<MaternKernel>> kernels;  // fixed instead of optimized
};

namespace detail {

// Negative log marginal likelihood of one output and its gradient with
// respect to (log variance, log length_u, log length_sigma).
inline double gp_nlml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& noise,
                      const Eigen::VectorXd& theta, Eigen::VectorXd& grad, double jitter) {
  const auto n = X.rows();
  MaternKernel k{std::exp(theta[0]), {std::exp(theta[1]), std::exp(theta[2])}};
  Eigen::MatrixXd K(n, n), dl0(n, n), dl1(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d0 = (X(i, 0) - X(j, 0)) / k.length[0];
      const double d1 = (X(i, 1) - X(j, 1)) / k.length[1];
      const double sr = std::sqrt(3.0 * (d0 * d0 + d1 * d1));
      const double e = std::exp(-sr);
      K(i, j) = K(j, i) = k.variance * (1.0 + sr) * e;
      dl0(i, j) = dl0(j, i) = 3.0 * k.variance * e * d0 * d0;
      dl1(i, j) = dl1(j, i) = 3.0 * k.variance * e * d1 * d1;
    }
  }
  const Eigen::MatrixXd Kv = K;
  for (Eigen::Index i = 0; i < n; ++i) K(i, i) += noise[i] + jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double nlml = 0.5 * y.dot(alpha) + 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  const Eigen::MatrixXd W = llt.solve(Eigen::MatrixXd::Identity(n, n)) - alpha * alpha.transpose();
  grad.resize(3);
  grad[0] = 0.5 * (W.cwiseProduct(Kv)).sum();
  grad[1] = 0.5 * (W.cwiseProduct(dl0)).sum();
  grad[2] = 0.5 * (W.cwiseProduct(dl1)).sum();
  return nlml;
}

}  // namespace detail

class GPModel {
 public:
  struct Output {
    MaternKernel kernel;
    Eigen::VectorXd targets;  // normalized
    Eigen::VectorXd noise;    // normalized variances
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;
    double log_marginal_likelihood = 0.0;
  };

  const std::vector<GpTrainingPoint>& training() const noexcept { return training_; }
  const GpNormalization& normalization() const noexcept { return norm_; }
  const std::vector<Output>& outputs() const noexcept { return outputs_; }
  int dim() const noexcept { return static_cast<int>(outputs_.size()); }
  std::size_t size() const noexcept { return training_.size(); }
  const Eigen::MatrixXd& normalized_inputs() const noexcept { return X_; }
  // Noise correlations between parameters that the independent-output model discards.
  double discarded_correlation_max() const noexcept { return discarded_corr_; }

  std::array<double, 2> normalize(const Condition& x) const noexcept {
    return {(x.u - norm_.input_mean[0]) / norm_.input_scale[0], (x.sigma_u - norm_.input_mean[1]) / norm_.input_scale[1]};
  }

  // Posterior mean and variance of output j in normalized space.
  void posterior_normalized(const Condition& x, int j, double& mean, double& var) const {
    const auto z = normalize(x);
    const Output& o = outputs_[static_cast<std::size_t>(j)];
    const auto n = X_.rows();
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi[2] = {X_(i, 0), X_(i, 1)};
      ks[i] = o.kernel(z.data(), xi);
    }
    mean = ks.dot(o.alpha);
    const Eigen::VectorXd v = o.llt.matrixL().solve(ks);
    var = std::max(0.0, o.kernel.variance - v.squaredNorm());
  }

  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
  };

  Posterior posterior(const Condition& x) const {
    Posterior p{Eigen::VectorXd(dim()), Eigen::VectorXd(dim())};
    for (int j = 0; j < dim(); ++j) {
      double m, v;
      posterior_normalized(x, j, m, v);
      p.mean[j] = norm_.output_mean[static_cast<std::size_t>(j)] + norm_.output_scale[static_cast<std::size_t>(j)] * m;
      p.sd[j] = norm_.output_scale[static_cast<std::size_t>(j)] * std::sqrt(v);
    }
    return p;
  }

  // Posterior standard deviations in normalized output space.
  Eigen::VectorXd normalized_sd(const Condition& x) const {
    Eigen::VectorXd s(dim());
    for (int j = 0; j < dim(); ++j) {
      double m, v;
      posterior_normalized(x, j, m, v);
      s[j] = std::sqrt(v);
    }
    return s;
  }

  friend GPModel fit_gp(const std::vector<GpTrainingPoint>&, const GpOptions&);

 private:
  std::vector<GpTrainingPoint> training_;
  GpNormalization norm_;
  Eigen::MatrixXd X_;
  std::vector<Output> outputs_;
  double discarded_corr_ = 0.0;
};

inline GPModel fit_gp(const std::vector<GpTrainingPoint>& training, const GpOptions& opt = {}) {
  if (training.size() < 2) throw DomainError("fit_gp: need at least 2 training points", "training");
  const auto m = training.front().mean.size();
  const auto n = static_cast<Eigen::Index>(training.size());
  for (const auto& t : training) {
    if (t.mean.size() != m || t.cov.rows() != m || t.cov.cols() != m)
      throw DomainError("fit_gp: inconsistent parameter dimensions", "training");
    for (Eigen::Index j = 0; j < m; ++j)
      if (!(t.cov(j, j) >= 0.0)) throw DomainError("fit_gp: covariance diagonal must be >= 0", "training");
  }

  GPModel g;
  g.training_ = training;
  if (opt.normalization) {
    g.norm_ = *opt.normalization;
  } else {
    for (int d = 0; d < 2; ++d) {
      double s = 0.0, s2 = 0.0;
      for (const auto& t : training) {
        const double v = d == 0 ? t.x.u : t.x.sigma_u;
        s += v;
        s2 += v * v;
      }
      const double mean = s / static_cast<double>(n);
      const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
      g.norm_.input_mean[static_cast<std::size_t>(d)] = mean;
      g.norm_.input_scale[static_cast<std::size_t>(d)] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0.0, s2 = 0.0;
      for (const auto& t : training) {
        s += t.mean[j];
        s2 += t.mean[j] * t.mean[j];
      }
      const double mean = s / static_cast<double>(n);
      const double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
      g.norm_.output_mean.push_back(mean);
      g.norm_.output_scale.push_back(var > 1e-24 * std::max(1.0, mean * mean) ? std::sqrt(var) : 1.0);
    }
  }

  g.X_.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = g.normalize(training[static_cast<std::size_t>(i)].x);
    g.X_(i, 0) = z[0];
    g.X_(i, 1) = z[1];
  }

  for (const auto& t : training) {
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a + 1; b < m; ++b) {
        const double den = std::sqrt(t.cov(a, a) * t.cov(b, b));
        if (den > 0.0) g.discarded_corr_ = std::max(g.discarded_corr_, std::abs(t.cov(a, b)) / den);
      }
  }

  const GpBounds& bd = opt.bounds;
  Eigen::VectorXd lo(3), hi(3);
  lo << std::log(bd.variance_min), std::log(bd.length_min), std::log(bd.length_min);
  hi << std::log(bd.variance_max), std::log(bd.length_max), std::log(bd.length_max);

  for (Eigen::Index j = 0; j < m; ++j) {
    GPModel::Output o;
    o.targets.resize(n);
    o.noise.resize(n);
    const double sc = g.norm_.output_scale[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& t = training[static_cast<std::size_t>(i)];
      o.targets[i] = (t.mean[j] - g.norm_.output_mean[static_cast<std::size_t>(j)]) / sc;
      o.noise[i] = t.cov(j, j) / (sc * sc);
    }
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a + 1; b < n; ++b)
        if ((g.X_.row(a) - g.X_.row(b)).norm() < 1e-12 && o.noise[a] < 1e-12 && o.noise[b] < 1e-12 &&
            std::abs(o.targets[a] - o.targets[b]) > 1e-9)
          throw DomainError("fit_gp: duplicate inputs with contradictory noise-free targets", "training");

    double jitter = opt.jitter;
    if (opt.kernels) {
      o.kernel = (*opt.kernels)[static_cast<std::size_t>(j)];
    } else {
      // Deterministic multi-start over a spread of variances and length scales.
      static constexpr double starts[][3] = {{1.0, 1.0, 1.0}, {1.0, 0.3, 0.3}, {1.0, 3.0, 3.0}, {0.3, 0.5, 2.0},
                                             {0.3, 2.0, 0.5}, {3.0, 1.5, 1.5}, {0.1, 0.2, 1.0}, {5.0, 5.0, 0.8}};
      double best = std::numeric_limits<double>::infinity();
      Eigen::VectorXd best_theta(3);
      for (std::size_t s = 0; s < std::max<std::size_t>(5, std::min<std::size_t>(opt.restarts, 8)); ++s) {
        Eigen::VectorXd th(3);
        th << std::log(starts[s][0]), std::log(starts[s][1]), std::log(starts[s][2]);
        auto obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gr) {
          return detail::gp_nlml(g.X_, o.targets, o.noise, x, gr, jitter);
        };
        BfgsOptions bo;
        bo.gradient_tolerance = 1e-7;
        bo.max_iterations = 300;
        const BfgsResult r = minimize_box(obj, th, lo, hi, bo);
        if (r.value < best) {
          best = r.value;
          best_theta = r.x;
        }
      }
      if (!std::isfinite(best)) throw NumericalError("fit_gp: hyperparameter optimization failed for all restarts", "gp");
      o.kernel = {std::exp(best_theta[0]), {std::exp(best_theta[1]), std::exp(best_theta[2])}};
    }

    Eigen::MatrixXd K(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b <= a; ++b) {
        const double xa[2] = {g.X_(a, 0), g.X_(a, 1)}, xb[2] = {g.X_(b, 0), g.X_(b, 1)};
        K(a, b) = K(b, a) = o.kernel(xa, xb);
      }
    for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10.0) {
      Eigen::MatrixXd Kn = K;
      for (Eigen::Index a = 0; a < n; ++a) Kn(a, a) += o.noise[a] + jitter;
      o.llt.compute(Kn);
      if (o.llt.info() == Eigen::Success) break;
    }
    if (o.llt.info() != Eigen::Success) throw NumericalError("fit_gp: kernel matrix is not positive definite", "gp");
    o.alpha = o.llt.solve(o.targets);
    Eigen::VectorXd gr;
    Eigen::VectorXd th(3);
    th << std::log(o.kernel.variance), std::log(o.kernel.length[0]), std::log(o.kernel.length[1]);
    o.log_marginal_likelihood = -detail::gp_nlml(g.X_, o.targets, o.noise, th, gr, jitter);
    g.outputs_.push_back(std::move(o));
  }
  return g;
}

inline constexpr double kScaleFloor = 1e-6;  // MNm

struct ClampCounters {
  std::size_t scale = 0;
  std::size_t shape = 0;
};

// Independent normal draws per output at x. The scale parameter (index 1) is
// clamped at kScaleFloor; a GEV shape (index 2) at the family bounds.
inline EvParams clamp_params(EvParams p, const EvFamily& f, ClampCounters* counters) {
  if (p[1] < kScaleFloor) {
    p[1] = kScaleFloor;
    if (counters) ++counters->scale;
  }
  if (p.size() == 3 && (p[2] < f.shape_min || p[2] > f.shape_max)) {
    p[2] = std::clamp(p[2], f.shape_min, f.shape_max);
    if (counters) ++counters->shape;
  }
  return p;
}

inline EvParams gp_sample_params(const GPModel& gp, const Condition& x, Stream& rng, const EvFamily& f,
                                 ClampCounters* counters = nullptr) {
  const auto post = gp.posterior(x);
  EvParams p(gp.dim());
  for (int j = 0; j < gp.dim(); ++j) p[j] = post.sd[j] > 0.0 ? post.mean[j] + post.sd[j] * rng.normal() : post.mean[j];
  return clamp_params(std::move(p), f, counters);
}

// Tabulated posterior mean and sd on a regular (u, sigma_u) grid, bilinearly
// interpolated; queries outside the grid fall back to the exact posterior.
class PosteriorGrid {
 public:
  PosteriorGrid(const GPModel& gp, double u_lo, double u_hi, double s_lo, double s_hi, std::size_t nu,
                std::size_t ns)
      : gp_(&gp), u_lo_(u_lo), u_hi_(u_hi), s_lo_(s_lo), s_hi_(s_hi), nu_(nu), ns_(ns), m_(gp.dim()) {
    du_ = (u_hi - u_lo) / static_cast<double>(nu - 1);
    ds_ = (s_hi - s_lo) / static_cast<double>(ns - 1);
    table_.resize(nu * ns * static_cast<std::size_t>(2 * m_));
    for (std::size_t i = 0; i < nu; ++i)
      for (std::size_t k = 0; k < ns; ++k) {
        const auto p = gp.posterior({u_lo + du_ * static_cast<double>(i), s_lo + ds_ * static_cast<double>(k)});
        double* cell = &table_[(i * ns + k) * static_cast<std::size_t>(2 * m_)];
        for (int j = 0; j < m_; ++j) {
          cell[j] = p.mean[j];
          cell[m_ + j] = p.sd[j];
        }
      }
  }

  // Writes means then sds (2m values).
  void eval(const Condition& x, double* out) const {
    if (x.u < u_lo_ || x.u > u_hi_ || x.sigma_u < s_lo_ || x.sigma_u > s_hi_) {
      const auto p = gp_->posterior(x);
      for (int j = 0; j < m_; ++j) {
        out[j] = p.mean[j];
        out[m_ + j] = p.sd[j];
      }
      return;
    }
    const double fu = (x.u - u_lo_) / du_, fs = (x.sigma_u - s_lo_) / ds_;
    const auto i = std::min(static_cast<std::size_t>(fu), nu_ - 2);
    const auto k = std::min(static_cast<std::size_t>(fs), ns_ - 2);
    const double a = fu - static_cast<double>(i), b = fs - static_cast<double>(k);
    const auto w = static_cast<std::size_t>(2 * m_);
    const double* c00 = &table_[(i * ns_ + k) * w];
    const double* c01 = c00 + w;
    const double* c10 = &table_[((i + 1) * ns_ + k) * w];
    const double* c11 = c10 + w;
    for (std::size_t j = 0; j < w; ++j)
      out[j] = (1 - a) * ((1 - b) * c00[j] + b * c01[j]) + a * ((1 - b) * c10[j] + b * c11[j]);
  }

 private:
  const GPModel* gp_;
  double u_lo_, u_hi_, s_lo_, s_hi_, du_ = 1, ds_ = 1;
  std::size_t nu_, ns_;
  int m_;
  std::vector<double> table_;
};

// ---------------------------------------------------------------------------
// Serialization: Cholesky factors are recomputed on load.

inline nlohmann::json to_json(const GPModel& g) {
  nlohmann::json train = nlohmann::json::array();
  for (const auto& t : g.training()) {
    std::vector<double> cov;
    for (Eigen::Index i = 0; i < t.cov.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cov.cols(); ++j) cov.push_back(t.cov(i, j));
    train.push_back({{"u", t.x.u},
                     {"sigma_u", t.x.sigma_u},
                     {"mean", std::vector<double>(t.mean.data(), t.mean.data() + t.mean.size())},
                     {"covariance", cov}});
  }
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& o : g.outputs())
    kernels.push_back({{"variance", o.kernel.variance},
                       {"length", {o.kernel.length[0], o.kernel.length[1]}},
                       {"log_marginal_likelihood", o.log_marginal_likelihood}});
  const auto& nm = g.normalization();
  return {{"kernel", "matern32"},
          {"normalization",
           {{"input_mean", nm.input_mean},
            {"input_scale", nm.input_scale},
            {"output_mean", nm.output_mean},
            {"output_scale", nm.output_scale}}},
          {"hyperparameters", kernels},
          {"discarded_noise_correlation_max", g.discarded_correlation_max()},
          {"training", train}};
}

inline GPModel gp_from_json(const nlohmann::json& j) {
  try {
    std::vector<GpTrainingPoint> train;
    for (const auto& t : j.at("training")) {
      GpTrainingPoint p;
      p.x = {t.at("u").get<double>(), t.at("sigma_u").get<double>()};
      const auto mean = t.at("mean").get<std::vector<double>>();
      const auto cov = t.at("covariance").get<std::vector<double>>();
      const auto d = static_cast<Eigen::Index>(mean.size());
      p.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
      p.cov.resize(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) p.cov(a, b) = cov.at(static_cast<std::size_t>(a * d + b));
      train.push_back(std::move(p));
    }
    GpOptions opt;
    GpNormalization nm;
    const auto& nj = j.at("normalization");
    nm.input_mean = nj.at("input_mean").get<std::array<double, 2>>();
    nm.input_scale = nj.at("input_scale").get<std::array<double, 2>>();
    nm.output_mean = nj.at("output_mean").get<std::vector<double>>();
    nm.output_scale = nj.at("output_scale").get<std::vector<double>>();
    opt.normalization = nm;
    std::vector<MaternKernel> ks;
    for (const auto& h : j.at("hyperparameters"))
      ks.push_back({h.at("variance").get<double>(), h.at("length").get<std::array<double, 2>>()});
    opt.kernels = ks;
    return fit_gp(train, opt);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gp model: ") + e.what(), "gp");
  }
}

}  // namespace extremis
