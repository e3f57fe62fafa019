#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "exogenous.hpp"
#include "graph.hpp"

namespace causal::gaussian {

struct Equation {
  double intercept = 0;
  std::map<std::string, double, NaturalLess> coef;
  double noise_var = 0;
};

// x_i = intercept + sum coef * parent + N(0, noise_var)
struct LinearGaussianScm {
  graph::Dag dag;
  std::map<std::string, Equation, NaturalLess> eq;

  void add_node(const std::string& id, double intercept, std::map<std::string, double, NaturalLess> coef,
                double noise_var) {
    require(noise_var >= 0, ErrorKind::invalid_argument, "negative noise variance for " + id);
    dag.add_node(id);
    for (const auto& [p, _] : coef) dag.add_edge(p, id);
    eq[id] = Equation{intercept, std::move(coef), noise_var};
  }
};

struct GaussianLaw {
  std::vector<std::string> nodes;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  std::size_t pos(const std::string& n) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == n) return i;
    fail(ErrorKind::invalid_argument, "node " + n + " not in law");
  }
  double mean_of(const std::string& n) const { return mean(static_cast<Eigen::Index>(pos(n))); }
  double var_of(const std::string& n) const {
    auto i = static_cast<Eigen::Index>(pos(n));
    return cov(i, i);
  }
  double cov_of(const std::string& a, const std::string& b) const {
    return cov(static_cast<Eigen::Index>(pos(a)), static_cast<Eigen::Index>(pos(b)));
  }
};

constexpr double psd_floor = -1e-9;

inline void check_law(const GaussianLaw& g) {
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  require(g.mean.size() == n && g.cov.rows() == n && g.cov.cols() == n, ErrorKind::invalid_argument,
          "law dimensions disagree");
  require((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 || n == 0, ErrorKind::invalid_argument,
          "covariance not symmetric");
  if (n == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= psd_floor, ErrorKind::invalid_argument,
          "covariance not positive semidefinite");
}

inline void validate(const LinearGaussianScm& m) {
  graph::topological_order(m.dag);
  for (const auto& n : m.dag.nodes()) {
    auto it = m.eq.find(n);
    require(it != m.eq.end(), ErrorKind::invalid_argument, "node " + n + " has no equation");
    require(it->second.noise_var >= 0, ErrorKind::invalid_argument, "negative noise variance for " + n);
    for (const auto& [p, _] : it->second.coef)
      require(m.dag.has_edge(p, n), ErrorKind::invalid_argument,
              "equation of " + n + " uses " + p + ", which is not a parent");
  }
}

// Forward propagation in topological order.
inline GaussianLaw lg_moments(const LinearGaussianScm& m) {
  validate(m);
  GaussianLaw g;
  g.nodes = graph::topological_order(m.dag);
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  g.mean = Eigen::VectorXd::Zero(n);
  g.cov = Eigen::MatrixXd::Zero(n, n);
  std::map<std::string, Eigen::Index> at;
  for (Eigen::Index i = 0; i < n; ++i) at[g.nodes[static_cast<std::size_t>(i)]] = i;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = m.eq.at(g.nodes[static_cast<std::size_t>(i)]);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (const auto& [p, c] : e.coef) w(at.at(p)) = c;
    g.mean(i) = e.intercept + w.dot(g.mean);
    Eigen::VectorXd cross = g.cov * w;
    for (Eigen::Index j = 0; j < i; ++j) g.cov(i, j) = g.cov(j, i) = cross(j);
    g.cov(i, i) = w.dot(cross) + e.noise_var;
  }
  return g;
}

constexpr double singular_floor = 1e-12;

inline GaussianLaw lg_condition(const GaussianLaw& law, const std::map<std::string, double, NaturalLess>& on) {
  std::vector<Eigen::Index> a, b;
  GaussianLaw out;
  for (std::size_t i = 0; i < law.nodes.size(); ++i) {
    if (on.count(law.nodes[i]))
      b.push_back(static_cast<Eigen::Index>(i));
    else {
      a.push_back(static_cast<Eigen::Index>(i));
      out.nodes.push_back(law.nodes[i]);
    }
  }
  for (const auto& [k, _] : on) law.pos(k);
  const auto na = static_cast<Eigen::Index>(a.size()), nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd saa(na, na), sab(na, nb), sbb(nb, nb);
  Eigen::VectorXd ma(na), db(nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    ma(i) = law.mean(a[i]);
    for (Eigen::Index j = 0; j < na; ++j) saa(i, j) = law.cov(a[i], a[j]);
    for (Eigen::Index j = 0; j < nb; ++j) sab(i, j) = law.cov(a[i], b[j]);
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    db(i) = on.at(law.nodes[static_cast<std::size_t>(b[i])]) - law.mean(b[i]);
    for (Eigen::Index j = 0; j < nb; ++j) sbb(i, j) = law.cov(b[i], b[j]);
  }
  if (nb == 0) return law;
  double det = sbb.determinant();
  if (!(std::abs(det) > singular_floor))
    fail(ErrorKind::singular_conditioning, "conditioning block has determinant " + std::to_string(det));
  Eigen::LDLT<Eigen::MatrixXd> solve(sbb);
  out.mean = ma + sab * solve.solve(db);
  out.cov = saa - sab * solve.solve(sab.transpose());
  out.cov = (out.cov + out.cov.transpose()) / 2;
  return out;
}

// Regression coefficients of E[target | on] in each conditioning node.
inline std::map<std::string, double, NaturalLess> regression_slopes(const GaussianLaw& law, const std::string& target,
                                                                    const std::vector<std::string>& on) {
  const auto nb = static_cast<Eigen::Index>(on.size());
  Eigen::MatrixXd sbb(nb, nb);
  Eigen::VectorXd sb(nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    sb(i) = law.cov_of(on[static_cast<std::size_t>(i)], target);
    for (Eigen::Index j = 0; j < nb; ++j) sbb(i, j) = law.cov_of(on[static_cast<std::size_t>(i)], on[static_cast<std::size_t>(j)]);
  }
  double det = sbb.determinant();
  if (!(std::abs(det) > singular_floor))
    fail(ErrorKind::singular_conditioning, "conditioning block has determinant " + std::to_string(det));
  Eigen::VectorXd beta = sbb.ldlt().solve(sb);
  std::map<std::string, double, NaturalLess> out;
  for (Eigen::Index i = 0; i < nb; ++i) out[on[static_cast<std::size_t>(i)]] = beta(i);
  return out;
}

inline LinearGaussianScm lg_intervene(const LinearGaussianScm& m, const std::string& node, double value) {
  m.dag.check(node);
  LinearGaussianScm out = m;
  for (const auto& p : NodeSet(out.dag.parents(node))) out.dag.remove_edge(p, node);
  out.eq[node] = Equation{value, {}, 0.0};
  return out;
}

// Draws in topological order, one diagonal stream per node; noise via the
// normal inverse CDF of the stream's uniforms.
struct LgSample {
  std::vector<std::string> nodes;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& n) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == n) return columns[i];
    fail(ErrorKind::invalid_argument, "node " + n + " not sampled");
  }
};

inline LgSample lg_sample(const LinearGaussianScm& m, const exogenous::DigitStream& source, std::size_t n) {
  validate(m);
  LgSample out;
  out.nodes = graph::topological_order(m.dag);
  const std::size_t k = out.nodes.size();
  out.columns.assign(k, std::vector<double>(n));
  if (k == 0) return out;
  auto streams = exogenous::split_streams(source, k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = m.eq.at(out.nodes[i]);
    std::vector<std::pair<std::size_t, double>> terms;
    for (const auto& [p, c] : e.coef)
      for (std::size_t j = 0; j < i; ++j)
        if (out.nodes[j] == p) terms.emplace_back(j, c);
    for (std::size_t r = 0; r < n; ++r) {
      double v = e.intercept + streams[i].next_normal(0.0, e.noise_var);
      for (const auto& [j, c] : terms) v += c * out.columns[j][r];
      out.columns[i][r] = v;
    }
  }
  return out;
}

struct SimpsonParams {
  double alpha = 1, beta = 0.2, gamma = 1, mu = 0, sigma1 = 1, sigma2 = 1, sigma3 = 1;
};

// Age X, training T, body mass R.
inline LinearGaussianScm simpson_continuous_model(const SimpsonParams& p) {
  const double vx = p.sigma2 * p.sigma2 + 2 * p.gamma * p.gamma * p.sigma3 * p.sigma3;
  const double c = p.sigma3 / std::sqrt(vx);
  LinearGaussianScm m;
  m.add_node("X", p.gamma * p.mu, {}, vx);
  m.add_node("T", p.mu - c * p.gamma * p.mu, {{"X", c}}, p.sigma3 * p.sigma3);
  m.add_node("R", 0.0, {{"X", p.alpha}, {"T", -p.beta}}, p.sigma1 * p.sigma1);
  return m;
}

struct SimpsonReport {
  double observational_slope;
  double causal_slope;
  bool paradox;
  double closed_form_slope;
};

inline SimpsonReport simpson_cont_report(const SimpsonParams& p) {
  for (double v : {p.alpha, p.beta, p.gamma, p.sigma1, p.sigma2, p.sigma3})
    require(v > 0, ErrorKind::invalid_argument, "alpha, beta, gamma and the sigmas must be positive");
  auto m = simpson_continuous_model(p);
  auto law = lg_moments(m);
  // Slope of E[R | T=t] in t, read off two conditionings.
  auto at = [&](double t) { return lg_condition(law, {{"T", t}}).mean_of("R"); };
  const double obs = at(p.mu + 1) - at(p.mu);
  auto cause = [&](double t) { return lg_moments(lg_intervene(m, "T", t)).mean_of("R"); };
  const double causal = cause(p.mu + 1) - cause(p.mu);
  const double vx = p.sigma2 * p.sigma2 + 2 * p.gamma * p.gamma * p.sigma3 * p.sigma3;
  return {obs, causal, obs > 0, p.alpha * std::sqrt(vx) / (2 * p.sigma3) - p.beta};
}

struct LordParams {
  double mu1 = 0, mu2 = 1, sigma = 1, p = 0.5, rho = 0.5;
};

// Per-group linear model: X ~ N(mu_t, sigma^2), R = mu_t + rho (X - mu_t) + noise,
// plus the gain G = R - X.
inline LinearGaussianScm lord_component(const LordParams& q, int group) {
  const double mu = group == 1 ? q.mu1 : q.mu2;
  const double s2 = q.sigma * q.sigma;
  LinearGaussianScm m;
  m.add_node("X", mu, {}, s2);
  m.add_node("R", mu * (1 - q.rho), {{"X", q.rho}}, (1 - q.rho * q.rho) * s2);
  m.add_node("G", 0.0, {{"R", 1.0}, {"X", -1.0}}, 0.0);
  return m;
}

struct NormalParams {
  double mean, var;
};

struct LordReport {
  NormalParams gain[2];      // law of R - X given T = 1, 2
  NormalParams response[2];  // law of R given T = 1, 2
  double mean_r, var_r;
  double direct_difference;  // E[R | T=1, X=x] - E[R | T=2, X=x]
};

inline LordReport lord_report(const LordParams& q) {
  require(q.sigma > 0, ErrorKind::invalid_argument, "sigma must be positive");
  require(q.p > 0 && q.p < 1, ErrorKind::invalid_argument, "p must lie in (0,1)");
  require(q.rho > 0 && q.rho < 1, ErrorKind::invalid_argument, "rho must lie in (0,1)");
  LordReport rep{};
  double cond_mean[2];
  for (int g = 0; g < 2; ++g) {
    auto law = lg_moments(lord_component(q, g + 1));
    rep.gain[g] = {law.mean_of("G"), law.var_of("G")};
    rep.response[g] = {law.mean_of("R"), law.var_of("R")};
    // The difference of conditional means does not depend on x; use x = 0.
    GaussianLaw rx;
    rx.nodes = {"X", "R"};
    rx.mean = Eigen::Vector2d(law.mean_of("X"), law.mean_of("R"));
    rx.cov.resize(2, 2);
    rx.cov << law.var_of("X"), law.cov_of("X", "R"), law.cov_of("X", "R"), law.var_of("R");
    cond_mean[g] = lg_condition(rx, {{"X", 0.0}}).mean_of("R");
  }
  const double w[2] = {q.p, 1 - q.p};
  rep.mean_r = w[0] * rep.response[0].mean + w[1] * rep.response[1].mean;
  double second = 0;
  for (int g = 0; g < 2; ++g) second += w[g] * (rep.response[g].var + rep.response[g].mean * rep.response[g].mean);
  rep.var_r = second - rep.mean_r * rep.mean_r;
  rep.direct_difference = cond_mean[0] - cond_mean[1];
  return rep;
}

}  // namespace causal::gaussian
