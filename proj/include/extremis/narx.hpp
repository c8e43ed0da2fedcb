#pragma once

// Polynomial NARX surrogate with a staged auxiliary-input manifold.

#include "extremis/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace extremis {

using Series = std::vector<double>;

struct LagSpec {
  std::vector<int> autoregressive;
  std::vector<std::vector<int>> exogenous;  // per input channel

  int max_lag() const noexcept {
    int m = 0;
    for (int l : autoregressive) m = std::max(m, l);
    for (const auto& c : exogenous)
      for (int l : c) m = std::max(m, l);
    return m;
  }
  int max_autoregressive_lag() const noexcept {
    return autoregressive.empty() ? 0 : *std::max_element(autoregressive.begin(), autoregressive.end());
  }
  std::size_t size() const noexcept {
    std::size_t n = autoregressive.size();
    for (const auto& c : exogenous) n += c.size();
    return n;
  }
  bool operator==(const LagSpec&) const = default;
};

inline void validate(const LagSpec& s) {
  auto sorted_unique = [](const std::vector<int>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return a >= b; }) == v.end();
  };
  for (int l : s.autoregressive)
    if (l < 1) throw ValidationError("autoregressive lags must be >= 1", "lags.y");
  if (!sorted_unique(s.autoregressive)) throw ValidationError("autoregressive lags must be strictly increasing", "lags.y");
  for (std::size_t j = 0; j < s.exogenous.size(); ++j) {
    const std::string field = "lags.x[" + std::to_string(j) + "]";
    for (int l : s.exogenous[j])
      if (l < 0) throw ValidationError("exogenous lags must be >= 0", field);
    if (!sorted_unique(s.exogenous[j])) throw ValidationError("exogenous lags must be strictly increasing", field);
  }
}

// Text form "y:1,2;x:0,1;x:0" (one x group per input channel, in order; an
// empty group is written "x:").
inline LagSpec parse_lag_spec(const std::string& text) {
  LagSpec s;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, ';')) {
    const auto colon = group.find(':');
    if (colon == std::string::npos) throw ParseError("lag group '" + group + "' lacks ':'", "lags");
    const std::string key = group.substr(0, colon);
    std::vector<int> lags;
    std::stringstream ls(group.substr(colon + 1));
    std::string item;
    while (std::getline(ls, item, ',')) {
      if (item.empty()) continue;
      try {
        std::size_t pos = 0;
        lags.push_back(std::stoi(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ParseError("lag '" + item + "' is not an integer", "lags");
      }
    }
    if (key == "y")
      s.autoregressive = lags;
    else if (key == "x")
      s.exogenous.push_back(lags);
    else
      throw ParseError("lag group key must be y or x, got '" + key + "'", "lags");
  }
  validate(s);
  return s;
}

inline std::string to_string(const LagSpec& s) {
  auto join = [](const std::vector<int>& v) {
    std::string o;
    for (std::size_t i = 0; i < v.size(); ++i) o += (i ? "," : "") + std::to_string(v[i]);
    return o;
  };
  std::string out = "y:" + join(s.autoregressive);
  for (const auto& c : s.exogenous) out += ";x:" + join(c);
  return out;
}

// phi(t) = [y(t - l) for AR lags, then x_j(t - l) per channel].
inline void build_lag_vector(const std::vector<Series>& inputs, std::span<const double> y, const LagSpec& spec,
                             std::size_t t, double* phi) {
  if (inputs.size() != spec.exogenous.size())
    throw ValidationError("input channel count does not match the lag spec", "inputs");
  if (t < static_cast<std::size_t>(spec.max_lag()))
    throw IndexError("lag vector needs t >= " + std::to_string(spec.max_lag()) + ", got " + std::to_string(t), "t");
  std::size_t k = 0;
  for (int l : spec.autoregressive) {
    const std::size_t i = t - static_cast<std::size_t>(l);
    if (i >= y.size()) throw IndexError("output history too short", "t");
    phi[k++] = y[i];
  }
  for (std::size_t j = 0; j < inputs.size(); ++j)
    for (int l : spec.exogenous[j]) {
      const std::size_t i = t - static_cast<std::size_t>(l);
      if (i >= inputs[j].size()) throw IndexError("input series too short for t", "t");
      phi[k++] = inputs[j][i];
    }
}

inline std::vector<double> build_lag_vector(const std::vector<Series>& inputs, std::span<const double> y,
                                            const LagSpec& spec, std::size_t t) {
  std::vector<double> phi(spec.size());
  build_lag_vector(inputs, y, spec, t, phi.data());
  return phi;
}

// Exponent vectors over phi of total degree <= degree, graded then
// lexicographic. max_interaction > 0 caps the number of distinct variables.
inline std::vector<std::vector<int>> monomial_set(std::size_t n_vars, int degree, int max_interaction = 0) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n_vars, 0);
  std::function<void(std::size_t, int, int)> rec = [&](std::size_t var, int remaining, int used) {
    if (var == n_vars) {
      if (remaining == 0) out.push_back(cur);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      const int u = used + (e > 0 ? 1 : 0);
      if (max_interaction > 0 && u > max_interaction) continue;
      cur[var] = e;
      rec(var + 1, remaining - e, u);
    }
    cur[var] = 0;
  };
  for (int d = 0; d <= degree; ++d) rec(0, d, 0);
  return out;
}

inline double eval_monomial(const std::vector<int>& alpha, const double* phi) noexcept {
  double v = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (int e = 0; e < alpha[i]; ++e) v *= phi[i];
  return v;
}

struct NarxModel {
  LagSpec lags;
  int degree = 1;
  int max_interaction = 0;
  std::vector<std::vector<int>> multi_indices;
  Eigen::VectorXd coefficients;
  std::vector<std::string> channel_names;
  double training_rmse = 0.0;
  double output_min = 0.0;
  double output_max = 0.0;

  double output_range() const noexcept { return output_max - output_min; }

  double evaluate(const double* phi) const noexcept {
    double s = 0.0;
    for (std::size_t a = 0; a < multi_indices.size(); ++a)
      s += coefficients[static_cast<Eigen::Index>(a)] * eval_monomial(multi_indices[a], phi);
    return s;
  }
};

struct NarxSeries {
  std::vector<Series> inputs;
  Series output;
};

struct NarxFitOptions {
  int degree = 1;
  double regularization = 0.0;
  int max_interaction = 2;
  // Relative pivot threshold of the rank check at regularization 0.
  double rank_tolerance = 1e-11;
  std::vector<std::string> channel_names;
};

namespace detail {

inline void narx_regression(const std::vector<NarxSeries>& design, const LagSpec& spec,
                            const std::vector<std::vector<int>>& A, Eigen::MatrixXd& P, Eigen::VectorXd& target) {
  const std::size_t start = static_cast<std::size_t>(spec.max_lag());
  std::size_t rows = 0;
  for (const auto& d : design) {
    if (d.inputs.size() != spec.exogenous.size())
      throw ValidationError("design input channel count does not match the lag spec", "design");
    for (const auto& x : d.inputs)
      if (x.size() != d.output.size()) throw ValidationError("input and output series lengths differ", "design");
    if (d.output.size() > start) rows += d.output.size() - start;
  }
  P.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(A.size()));
  target.resize(static_cast<Eigen::Index>(rows));
  std::vector<double> phi(spec.size());
  Eigen::Index r = 0;
  for (const auto& d : design)
    for (std::size_t t = start; t < d.output.size(); ++t, ++r) {
      build_lag_vector(d.inputs, d.output, spec, t, phi.data());
      for (std::size_t a = 0; a < A.size(); ++a) P(r, static_cast<Eigen::Index>(a)) = eval_monomial(A[a], phi.data());
      target[r] = d.output[t];
    }
}

}  // namespace detail

// One-step-ahead (teacher-forced) least squares; ridge when regularization > 0.
inline NarxModel fit_narx(const std::vector<NarxSeries>& design, const LagSpec& spec, const NarxFitOptions& opt = {}) {
  validate(spec);
  if (opt.degree < 0) throw DomainError("degree must be >= 0", "degree");
  if (!(opt.regularization >= 0.0)) throw DomainError("regularization must be >= 0", "regularization");
  NarxModel m;
  m.lags = spec;
  m.degree = opt.degree;
  m.max_interaction = opt.max_interaction;
  m.multi_indices = monomial_set(spec.size(), opt.degree, opt.max_interaction);
  m.channel_names = opt.channel_names;

  Eigen::MatrixXd P;
  Eigen::VectorXd target;
  detail::narx_regression(design, spec, m.multi_indices, P, target);
  if (P.rows() < P.cols())
    throw InsufficientSamplesError("fit_narx: " + std::to_string(P.rows()) + " usable rows for " +
                                       std::to_string(P.cols()) + " monomials",
                                   "design");
  if (opt.regularization == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(P);
    qr.setThreshold(opt.rank_tolerance);
    if (qr.rank() < P.cols())
      throw RankDeficiencyError("fit_narx: regressor matrix has rank " + std::to_string(qr.rank()) + " < " +
                                    std::to_string(P.cols()) + "; add regularization or drop lags",
                                "regularization");
    m.coefficients = qr.solve(target);
  } else {
    Eigen::MatrixXd G = P.transpose() * P;
    G.diagonal().array() += opt.regularization;
    m.coefficients = G.ldlt().solve(P.transpose() * target);
  }
  const Eigen::VectorXd res = target - P * m.coefficients;
  m.training_rmse = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
  m.output_min = target.minCoeff();
  m.output_max = target.maxCoeff();
  return m;
}

// Teacher-forced one-step predictions on a series, from t = max lag.
inline double one_step_rmse(const NarxModel& m, const std::vector<NarxSeries>& design) {
  double ss = 0.0;
  std::size_t n = 0;
  std::vector<double> phi(m.lags.size());
  for (const auto& d : design)
    for (std::size_t t = static_cast<std::size_t>(m.lags.max_lag()); t < d.output.size(); ++t) {
      build_lag_vector(d.inputs, d.output, m.lags, t, phi.data());
      const double e = d.output[t] - m.evaluate(phi.data());
      ss += e * e;
      ++n;
    }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

// Free-running recursion; the first init.size() values are copied from init.
inline Series predict_narx(const NarxModel& m, const std::vector<Series>& inputs, std::span<const double> init) {
  if (init.size() < static_cast<std::size_t>(m.lags.max_autoregressive_lag()))
    throw DomainError("predict_narx: init shorter than the largest autoregressive lag", "init");
  if (init.size() < static_cast<std::size_t>(m.lags.max_lag()))
    throw DomainError("predict_narx: init must cover the largest lag (" + std::to_string(m.lags.max_lag()) + ")",
                      "init");
  if (inputs.size() != m.lags.exogenous.size())
    throw ValidationError("input channel count does not match the lag spec", "inputs");
  std::size_t T = inputs.empty() ? init.size() : inputs.front().size();
  for (const auto& x : inputs)
    if (x.size() != T) throw ValidationError("input series lengths differ", "inputs");
  if (init.size() > T) T = init.size();
  Series y(T, 0.0);
  std::copy(init.begin(), init.end(), y.begin());
  const double range = m.output_range() > 0.0 ? m.output_range() : std::max(1.0, std::abs(m.output_max));
  const double limit = 1e6 * range;
  std::vector<double> phi(m.lags.size());
  for (std::size_t t = init.size(); t < T; ++t) {
    build_lag_vector(inputs, y, m.lags, t, phi.data());
    const double v = m.evaluate(phi.data());
    if (!std::isfinite(v) || std::abs(v) > limit)
      throw DivergenceError("predict_narx: prediction diverged at index " + std::to_string(t), "t=" + std::to_string(t));
    y[t] = v;
  }
  return y;
}

inline nlohmann::json to_json(const NarxModel& m) {
  return {{"format", "extremis-narx"},
          {"lags", {{"y", m.lags.autoregressive}, {"x", m.lags.exogenous}}},
          {"degree", m.degree},
          {"max_interaction", m.max_interaction},
          {"multi_indices", m.multi_indices},
          {"coefficients", std::vector<double>(m.coefficients.begin(), m.coefficients.end())},
          {"channel_names", m.channel_names},
          {"training_rmse", m.training_rmse},
          {"output_min", m.output_min},
          {"output_max", m.output_max}};
}

inline NarxModel narx_from_json(const nlohmann::json& j) {
  NarxModel m;
  try {
    m.lags.autoregressive = j.at("lags").at("y").get<std::vector<int>>();
    m.lags.exogenous = j.at("lags").at("x").get<std::vector<std::vector<int>>>();
    validate(m.lags);
    m.degree = j.at("degree").get<int>();
    m.max_interaction = j.value("max_interaction", 0);
    m.multi_indices = j.at("multi_indices").get<std::vector<std::vector<int>>>();
    const auto c = j.at("coefficients").get<std::vector<double>>();
    if (c.size() != m.multi_indices.size())
      throw ParseError("coefficient count differs from multi-index count", "coefficients");
    for (const auto& a : m.multi_indices)
      if (a.size() != m.lags.size()) throw ParseError("multi-index length differs from lag vector length", "multi_indices");
    m.coefficients = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    m.channel_names = j.value("channel_names", std::vector<std::string>{});
    m.training_rmse = j.value("training_rmse", 0.0);
    m.output_min = j.at("output_min").get<double>();
    m.output_max = j.at("output_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("narx model: ") + e.what(), "model");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Manifold of auxiliary input channels.

enum class StageBuilder { analytic_map, narx_submodel };

struct ManifoldStage {
  std::string name;
  StageBuilder builder = StageBuilder::analytic_map;
  std::vector<std::string> inputs;
  // analytic_map: channel values from the input channels (in `inputs` order).
  std::function<Series(const std::vector<const Series*>&)> map;
  // narx_submodel: frozen model driven by the input channels.
  std::optional<NarxModel> model;
  std::vector<double> init;  // defaults to zeros of length max lag
};

struct Manifold {
  std::vector<std::string> names;
  std::vector<Series> channels;

  const Series& at(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return channels[i];
    throw DependencyError("manifold has no channel '" + name + "'", name);
  }
  std::vector<Series> select(const std::vector<std::string>& which) const {
    std::vector<Series> out;
    for (const auto& n : which) out.push_back(at(n));
    return out;
  }
};

// Stages are ordered by dependency; independent stages by name, so the
// declaration order never changes the result.
inline std::vector<std::size_t> manifold_order(const std::vector<ManifoldStage>& stages,
                                               const std::vector<std::string>& raw_names) {
  std::set<std::string> known(raw_names.begin(), raw_names.end());
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (known.count(stages[i].name) || !by_name.emplace(stages[i].name, i).second)
      throw ValidationError("duplicate channel name '" + stages[i].name + "'", stages[i].name);
  }
  for (const auto& s : stages)
    for (const auto& in : s.inputs)
      if (!known.count(in) && !by_name.count(in))
        throw DependencyError("stage '" + s.name + "' depends on missing channel '" + in + "'", s.name);
  std::vector<std::size_t> order;
  std::set<std::string> done = known;
  std::set<std::string> pending;
  for (const auto& [n, i] : by_name) pending.insert(n);
  while (!pending.empty()) {
    bool progressed = false;
    for (auto it = pending.begin(); it != pending.end(); ++it) {
      const auto& s = stages[by_name.at(*it)];
      if (std::all_of(s.inputs.begin(), s.inputs.end(), [&](const std::string& in) { return done.count(in) > 0; })) {
        order.push_back(by_name.at(*it));
        done.insert(*it);
        pending.erase(it);
        progressed = true;
        break;
      }
    }
    if (!progressed) throw DependencyError("stage graph has a cycle involving '" + *pending.begin() + "'", *pending.begin());
  }
  return order;
}

inline Manifold build_manifold(const std::vector<ManifoldStage>& stages, const std::vector<std::string>& raw_names,
                               const std::vector<Series>& raw) {
  if (raw_names.size() != raw.size()) throw ValidationError("raw channel names and series differ in count", "raw");
  Manifold z;
  z.names = raw_names;
  z.channels = raw;
  for (std::size_t idx : manifold_order(stages, raw_names)) {
    const ManifoldStage& s = stages[idx];
    std::vector<const Series*> in;
    for (const auto& n : s.inputs) in.push_back(&z.at(n));
    Series out;
    if (s.builder == StageBuilder::analytic_map) {
      if (!s.map) throw ValidationError("analytic stage '" + s.name + "' has no map", s.name);
      out = s.map(in);
    } else {
      if (!s.model) throw ValidationError("narx stage '" + s.name + "' has no fitted model", s.name);
      std::vector<Series> xs;
      for (auto* p : in) xs.push_back(*p);
      std::vector<double> init = s.init;
      if (init.empty()) init.assign(static_cast<std::size_t>(s.model->lags.max_lag()), 0.0);
      out = predict_narx(*s.model, xs, init);
    }
    if (!z.channels.empty() && out.size() != z.channels.front().size())
      throw ValidationError("stage '" + s.name + "' produced a series of the wrong length", s.name);
    z.names.push_back(s.name);
    z.channels.push_back(std::move(out));
  }
  return z;
}

// Analytic stage maps.
inline std::function<Series(const std::vector<const Series*>&)> moving_average_map(std::size_t window) {
  return [window](const std::vector<const Series*>& in) {
    const Series& x = *in.at(0);
    Series out(x.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      acc += x[t];
      if (t >= window) acc -= x[t - window];
      out[t] = acc / static_cast<double>(std::min(t + 1, window));
    }
    return out;
  };
}

inline std::function<Series(const std::vector<const Series*>&)> pointwise_map(std::function<double(double)> f) {
  return [f = std::move(f)](const std::vector<const Series*>& in) {
    const Series& x = *in.at(0);
    Series out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = f(x[t]);
    return out;
  };
}

// ---------------------------------------------------------------------------
// Design files: CSV with a header; the column "y" is the output, a column
// "t" is ignored, every other column is an input channel in header order.

inline NarxSeries read_design_csv(const std::string& path, std::vector<std::string>* names = nullptr) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open design file " + path, "design");
  std::string line;
  if (!std::getline(f, line)) throw ParseError("design file " + path + " is empty", "design");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) header.push_back(c);
  }
  const auto yit = std::find(header.begin(), header.end(), "y");
  if (yit == header.end()) throw ParseError("design file " + path + " has no 'y' column", "design");
  NarxSeries s;
  std::vector<std::size_t> in_cols;
  std::vector<std::string> in_names;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] != "y" && header[i] != "t") {
      in_cols.push_back(i);
      in_names.push_back(header[i]);
    }
  s.inputs.resize(in_cols.size());
  const std::size_t ycol = static_cast<std::size_t>(yit - header.begin());
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      try {
        v.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(row) + ": not a number '" + c + "'", "design");
      }
    }
    if (v.size() != header.size())
      throw ParseError(path + ":" + std::to_string(row) + ": expected " + std::to_string(header.size()) + " fields",
                       "design");
    s.output.push_back(v[ycol]);
    for (std::size_t j = 0; j < in_cols.size(); ++j) s.inputs[j].push_back(v[in_cols[j]]);
  }
  if (names) *names = in_names;
  return s;
}

inline void write_design_csv(std::ostream& os, const std::vector<std::string>& names, const NarxSeries& s) {
  os.precision(17);
  for (const auto& n : names) os << n << ',';
  os << "y\n";
  for (std::size_t t = 0; t < s.output.size(); ++t) {
    for (const auto& x : s.inputs) os << x[t] << ',';
    os << s.output[t] << '\n';
  }
}

// All *.csv files of a directory, sorted by file name.
inline std::vector<NarxSeries> read_design_dir(const std::string& dir, std::vector<std::string>* names = nullptr) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) throw ValidationError("design directory " + dir + " does not exist", "design");
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("design directory " + dir + " holds no .csv files", "design");
  std::vector<NarxSeries> out;
  std::vector<std::string> first;
  for (const auto& p : files) {
    std::vector<std::string> n;
    out.push_back(read_design_csv(p.string(), &n));
    if (out.size() == 1)
      first = n;
    else if (n != first)
      throw ValidationError("design file " + p.string() + " has different columns", "design");
  }
  if (names) *names = first;
  return out;
}

}  // namespace extremis
