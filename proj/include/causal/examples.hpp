#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "exogenous.hpp"
#include "gaussian.hpp"
#include "graph.hpp"
#include "scm.hpp"

namespace causal::examples {

// Fills every table of `dag` with seeded random rows. Each entry is at
// least `floor` before normalization, so all events have positive mass.
inline scm::Scm random_scm(const graph::Dag& dag, const std::map<std::string, std::size_t>& card,
                           exogenous::UniformStream& u, double floor = 0.05, std::size_t default_card = 2) {
  scm::Scm m;
  for (const auto& n : graph::topological_order(dag)) {
    auto it = card.find(n);
    m.domains[n] = Domain::range(it == card.end() ? default_card : it->second);
  }
  for (const auto& n : graph::topological_order(dag)) {
    std::vector<std::string> parents(dag.parents(n).begin(), dag.parents(n).end());
    std::size_t rows = 1;
    for (const auto& p : parents) rows *= m.domains[p].size();
    std::vector<std::vector<double>> table(rows);
    for (auto& row : table) {
      double s = 0;
      for (std::size_t v = 0; v < m.domains[n].size(); ++v) {
        row.push_back(floor + u.next_uniform());
        s += row.back();
      }
      for (auto& p : row) p /= s;
    }
    m.add_node(n, m.domains[n], parents, table);
  }
  return m;
}

inline scm::Scm random_scm(const graph::Dag& dag, std::uint64_t seed, std::size_t card = 2, double floor = 0.05) {
  auto src = std::make_shared<const exogenous::DigitStream>(seed);
  exogenous::UniformStream u(src, 1);
  return random_scm(dag, {}, u, floor, card);
}

template <class P>
struct SimpsonBinaryParams {
  P p[2][2] = {{P(1) / 5, P(7) / 10}, {P(1) / 2, P(9) / 10}};  // p[t][x] = P(R=1 | T=t, X=x)
  P beta0 = P(4) / 5;                                          // P(T=1 | X=0)
  P beta1 = P(1) / 5;                                          // P(T=1 | X=1)
  P px0 = P(1) / 2;                                            // P(X=0)
  bool paradox = false;                                        // enforce the paradox constraints
};

// X (two groups) -> T (treatment) -> R (recovery), X -> R.
template <class P>
scm::BasicScm<P> simpson_binary(const SimpsonBinaryParams<P>& q) {
  auto in01 = [](const P& v) { return v >= 0 && v <= 1; };
  for (int t = 0; t < 2; ++t)
    for (int x = 0; x < 2; ++x)
      require(in01(q.p[t][x]), ErrorKind::invalid_argument, "recovery probabilities must lie in [0,1]");
  require(in01(q.beta0) && in01(q.beta1) && in01(q.px0), ErrorKind::invalid_argument,
          "beta0, beta1 and P(X=0) must lie in [0,1]");
  if (q.paradox) {
    const auto& p = q.p;
    if (!(p[1][1] > p[0][1] && p[0][1] > p[1][0] && p[1][0] > p[0][0]))
      fail(ErrorKind::constraint, "Simpson ordering p(1,1) > p(0,1) > p(1,0) > p(0,0) is broken");
    if (q.beta1 == 1 - q.beta0 && q.px0 * 2 == 1) {
      require(q.beta0 > 0 && q.beta0 < 1, ErrorKind::constraint, "beta must lie strictly between 0 and 1");
      const P theta = (p[1][1] - p[0][0]) / (p[0][1] - p[1][0]);
      const P ratio = q.beta0 / (1 - q.beta0);
      if (ratio < theta)
        fail(ErrorKind::constraint, "beta constraint broken: beta/(1-beta) = " + std::to_string(to_double(ratio)) +
                                        " is below theta = " + std::to_string(to_double(theta)));
    }
  }
  scm::BasicScm<P> m;
  m.name = "simpson_binary";
  m.description = "binary Simpson paradox: group X, treatment T, recovery R";
  m.add_node("X", Domain{0, 1}, {}, {{q.px0, 1 - q.px0}});
  m.add_node("T", Domain{0, 1}, {"X"}, {{1 - q.beta0, q.beta0}, {1 - q.beta1, q.beta1}});
  // Rows of R are keyed (X, T), T varying fastest.
  m.add_node("R", Domain{0, 1}, {"X", "T"},
             {{1 - q.p[0][0], q.p[0][0]},
              {1 - q.p[1][0], q.p[1][0]},
              {1 - q.p[0][1], q.p[0][1]},
              {1 - q.p[1][1], q.p[1][1]}});
  return m;
}

// Equal-width bins over mean +- 4 sd of every node, conditional tables from
// the normal law of each equation at the parents' bin midpoints.
struct Discretization {
  std::size_t bins = 16;
  double width_sd = 4;
};

struct ExampleModel {
  std::string name;
  std::optional<scm::Scm> discrete;
  std::vector<gaussian::LinearGaussianScm> components;  // continuous mixture components
  std::vector<double> weights;
  std::vector<std::string> notes;
};

namespace detail {

struct Grid {
  double lo = 0, width = 1;
  std::size_t bins = 16;
  double mid(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
  double edge(std::size_t i) const { return lo + static_cast<double>(i) * width; }
  std::size_t locate(double v) const {
    double k = std::floor((v - lo) / width);
    if (k < 0) return 0;
    if (k >= static_cast<double>(bins)) return bins - 1;
    return static_cast<std::size_t>(k);
  }
};

inline std::string mid_label(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Discretizes a mixture of linear Gaussian models sharing one graph. With
// several components a root node `group` (values 1..k) selects the component.
inline scm::Scm discretize(const std::vector<gaussian::LinearGaussianScm>& comps, const std::vector<double>& w,
                           const std::string& group, const Discretization& d, std::vector<std::string>& notes) {
  require(d.bins >= 2, ErrorKind::invalid_argument, "need at least two bins");
  const auto order = graph::topological_order(comps[0].dag);
  std::vector<gaussian::GaussianLaw> laws;
  for (const auto& c : comps) laws.push_back(gaussian::lg_moments(c));
  scm::Scm m;
  const bool mixed = comps.size() > 1;
  if (mixed) {
    Domain gd;
    for (std::size_t i = 0; i < comps.size(); ++i) gd.values.push_back(static_cast<Value>(i + 1));
    m.add_node(group, gd, {}, {w});
  }
  std::map<std::string, Grid> grids;
  double worst_mean = 0, worst_sd = 0, worst_tv = 0;
  for (const auto& n : order) {
    double mean = 0, second = 0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const double mu = laws[c].mean_of(n), v = laws[c].var_of(n);
      mean += w[c] * mu;
      second += w[c] * (v + mu * mu);
    }
    const double sd = std::sqrt(std::max(second - mean * mean, 1e-12));
    Grid g{mean - d.width_sd * sd, 2 * d.width_sd * sd / static_cast<double>(d.bins), d.bins};
    grids[n] = g;
    Domain dom = Domain::range(d.bins);
    for (std::size_t i = 0; i < d.bins; ++i) dom.labels.push_back(mid_label(g.mid(i)));

    std::vector<std::string> parents;
    if (mixed) parents.push_back(group);
    for (const auto& p : comps[0].dag.parents(n)) parents.push_back(p);
    std::size_t rows = 1;
    for (const auto& p : parents) rows *= p == group ? comps.size() : d.bins;
    std::vector<std::vector<double>> table;
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t rr = r, comp = 0;
      std::map<std::string, double> at;
      for (std::size_t i = parents.size(); i-- > 0;) {
        if (parents[i] == group) {
          comp = rr % comps.size();
          rr /= comps.size();
        } else {
          at[parents[i]] = grids[parents[i]].mid(rr % d.bins);
          rr /= d.bins;
        }
      }
      const auto& eq = comps[comp].eq.at(n);
      double mu = eq.intercept;
      for (const auto& [p, b] : eq.coef) mu += b * at.at(p);
      // A noiseless node still spreads with its parents inside their bins.
      double var = eq.noise_var;
      if (var <= 0)
        for (const auto& [p, b] : eq.coef) var += b * b * grids[p].width * grids[p].width / 12;
      std::vector<double> row(d.bins, 0.0);
      if (var <= 0) {
        row[g.locate(mu)] = 1;
      } else {
        boost::math::normal nd(mu, std::sqrt(var));
        double prev = 0;
        for (std::size_t i = 0; i + 1 < d.bins; ++i) {
          const double c = boost::math::cdf(nd, g.edge(i + 1));
          row[i] = c - prev;
          prev = c;
        }
        row[d.bins - 1] = 1 - prev;
      }
      table.push_back(std::move(row));
    }
    m.add_node(n, dom, parents, table);
  }
  // Compare discretized marginal moments with the exact ones.
  auto joint = scm::joint_distribution(m);
  for (const auto& n : order) {
    auto mg = scm::marginal(joint, {n});
    double mean = 0, second = 0, em = 0, es = 0;
    for (std::size_t i = 0; i < d.bins; ++i) {
      mean += mg.probs[i] * grids[n].mid(i);
      second += mg.probs[i] * grids[n].mid(i) * grids[n].mid(i);
    }
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const double mu = laws[c].mean_of(n);
      em += w[c] * mu;
      es += w[c] * (laws[c].var_of(n) + mu * mu);
    }
    // Exact binned marginal: mixture of normal cdfs over the same edges.
    double tv = 0, prev = 0;
    for (std::size_t i = 0; i < d.bins; ++i) {
      double c = 1;
      if (i + 1 < d.bins) {
        c = 0;
        for (std::size_t k = 0; k < comps.size(); ++k) {
          const double v = laws[k].var_of(n);
          const double x = grids[n].edge(i + 1);
          c += w[k] * (v > 0 ? boost::math::cdf(boost::math::normal(laws[k].mean_of(n), std::sqrt(v)), x)
                             : (x >= laws[k].mean_of(n) ? 1.0 : 0.0));
        }
      }
      tv += std::abs(mg.probs[i] - (c - prev));
      prev = c;
    }
    worst_tv = std::max(worst_tv, tv / 2);
    worst_mean = std::max(worst_mean, std::abs(mean - em));
    worst_sd = std::max(worst_sd, std::abs(std::sqrt(std::max(second - mean * mean, 0.0)) -
                                           std::sqrt(std::max(es - em * em, 0.0))));
  }
  notes.push_back("discretized companion: " + std::to_string(d.bins) + " bins per node over mean +- " +
                  mid_label(d.width_sd) + " sd; max marginal TV " + mid_label(worst_tv) + ", max mean error " +
                  mid_label(worst_mean) + ", max sd error " + mid_label(worst_sd));
  return m;
}

}  // namespace detail

struct ParamDoc {
  std::string name;
  double fallback;
  std::string doc;
};

struct ExampleInfo {
  std::string name;
  std::string summary;
  std::string citation;
  std::vector<ParamDoc> params;
};

inline const std::vector<ExampleInfo>& list_examples() {
  static const std::vector<ParamDoc> random_params{
      {"seed", 0, "seed of the digit source filling the tables"},
      {"card", 2, "number of values per node (2..6)"}};
  static const std::vector<ExampleInfo> catalog{
      {"simpson_binary",
       "binary Simpson paradox (group X, treatment T, recovery R)",
       "Example 1, binary recovery indicator model",
       {{"p00", 0.2, "P(R=1 | T=0, X=0)"},
        {"p01", 0.7, "P(R=1 | T=0, X=1)"},
        {"p10", 0.5, "P(R=1 | T=1, X=0)"},
        {"p11", 0.9, "P(R=1 | T=1, X=1)"},
        {"beta", 0.8, "P(T=1 | X=0); P(T=1 | X=1) = 1 - beta unless beta1 is given"},
        {"beta1", -1, "P(T=1 | X=1) when set (non-negative)"},
        {"px0", 0.5, "P(X=0)"},
        {"paradox", 0, "1 enforces the ordering and beta constraints"}}},
      {"simpson_continuous",
       "linear Gaussian Simpson paradox (X -> T -> R, X -> R)",
       "Example 2, log body mass index model",
       {{"alpha", 1, "effect of X on R"},
        {"beta", 0.2, "negative effect of T on R"},
        {"gamma", 1, "scale of the common cause"},
        {"mu", 0, "treatment location"},
        {"sigma1", 1, "noise sd of R"},
        {"sigma2", 1, "noise sd of X"},
        {"sigma3", 1, "noise sd of T"},
        {"bins", 16, "bins per node in the discretized companion"}}},
      {"lord",
       "Lord's paradox: two groups, initial weight X, final weight R",
       "Example 3, two-group weight model",
       {{"mu1", 0, "mean of group 1"},
        {"mu2", 1, "mean of group 2"},
        {"sigma", 1, "common sd"},
        {"p", 0.5, "P(group 1)"},
        {"rho", 0.5, "correlation of X and R within a group"},
        {"bins", 16, "bins per node in the discretized companion"}}},
      {"fig1", "back-door example graph with treatment T and response R", "Figure 1", random_params},
      {"fig1a", "extended back-door graph with descendants of T", "Figure 4", random_params},
      {"two_stage", "two treatment stages (X, T, R, X', T', R')", "Figure 3", random_params},
      {"smoking", "smoking, tar and cancer with a latent genotype", "Figure 5", random_params},
      {"eelworms", "soil fumigation and eelworm counts with two latent nodes", "Figure 6", random_params},
      {"treatment_plan", "two-stage treatment plan with a latent U", "Figure 7", random_params},
      {"hiring", "sex, background, qualification and hiring", "Figure 8", random_params},
      {"iv_binary",
       "binary instrument with always-takers, compliers and never-takers",
       "instrumental-variable example, model where I affects R only through T",
       {{"pa", 0.2, "share of always-takers"},
        {"pc", 0.5, "share of compliers"},
        {"pi", 0.5, "P(I=1)"}}},
      {"case_control_pop",
       "population for case-control sampling with a fixed odds ratio",
       "case-control example, population of exposures and diseases",
       {{"seed", 0, "seed of the digit source"},
        {"e", 3.5, "odds ratio e(x) in every stratum"},
        {"card", 2, "number of covariate values"}}},
  };
  return catalog;
}

struct ExampleSpec {
  std::string name;
  std::map<std::string, double> params;
};

inline const graph::Dag& fig1_graph() {
  static const graph::Dag g{{"X1", "X3"}, {"X2", "X3"}, {"X1", "X4"}, {"X2", "X5"}, {"X3", "T"},
                            {"X4", "T"},  {"T", "X6"},  {"X3", "R"},  {"X5", "R"},  {"X6", "R"}};
  return g;
}

inline const graph::Dag& fig1a_graph() {
  static const graph::Dag g{{"X1", "X8"}, {"X1", "X4"}, {"X1", "X3"}, {"X2", "X3"}, {"X2", "X5"}, {"X4", "X8"},
                            {"X4", "T"},  {"X3", "T"},  {"X3", "R"},  {"X3", "X9"}, {"X5", "R"},  {"T", "X8"},
                            {"T", "X7"},  {"X8", "X7"}, {"T", "X6"},  {"T", "X9"},  {"X6", "R"},  {"X9", "R"}};
  return g;
}

// Fig. 1 with the direct path replaced by a collider on X3.
inline const graph::Dag& collider_graph() {
  static const graph::Dag g{{"X1", "X4"}, {"X4", "T"}, {"X1", "X3"}, {"X2", "X3"},
                            {"X2", "X5"}, {"X5", "R"}, {"T", "R"}};
  return g;
}

inline graph::Dag two_stage_graph() {
  const std::vector<std::string> r{"X", "T", "R", "X'", "T'", "R'"};
  graph::Dag g;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j) g.add_edge(r[i], r[j]);
  return g;
}

inline const graph::Dag& smoking_graph() {
  static const graph::Dag g{{"X", "Y"}, {"X", "W"}, {"Y", "Z"}, {"Z", "W"}};
  return g;
}

inline const graph::Dag& eelworms_graph() {
  static const graph::Dag g{{"A", "U"}, {"A", "B"}, {"A", "X"}, {"U", "V"}, {"B", "W"},
                            {"X", "V"}, {"V", "W"}, {"X", "Y"}, {"V", "Y"}, {"W", "Y"}};
  return g;
}

inline const graph::Dag& treatment_plan_graph() {
  static const graph::Dag g{{"U", "Y3"}, {"U", "Y1"}, {"Y4", "Y3"}, {"Y4", "Y1"},
                            {"Y3", "Y2"}, {"Y2", "Y1"}, {"Y4", "Y2"}};
  return g;
}

inline const graph::Dag& hiring_graph() {
  static const graph::Dag g{{"S", "B"}, {"S", "Q"}, {"S", "H"}, {"B", "Q"}, {"B", "H"}, {"Q", "H"}};
  return g;
}

// Latent type K (always-taker a, complier c, never-taker n), instrument I,
// treatment T = tau(K, I), binary response R given (K, T).
inline scm::Scm iv_three_type(double pa = 0.2, double pc = 0.5, double pi = 0.5) {
  const double pn = 1 - pa - pc;
  require(pa >= 0 && pc >= 0 && pn >= -1e-12, ErrorKind::invalid_argument, "type shares must be a distribution");
  require(pi > 0 && pi < 1, ErrorKind::invalid_argument, "P(I=1) must lie in (0,1)");
  scm::Scm m;
  m.name = "iv_binary";
  m.description = "binary instrument with latent compliance type K";
  m.add_node("K", Domain::labelled({"a", "c", "n"}), {}, {{pa, pc, std::max(pn, 0.0)}});
  m.add_node("I", Domain{0, 1}, {}, {{1 - pi, pi}});
  // T rows keyed (K, I).
  m.add_node("T", Domain{0, 1}, {"K", "I"}, {{0, 1}, {0, 1}, {1, 0}, {0, 1}, {1, 0}, {1, 0}});
  // E(R | K, T) for T = 1, 0: a (1, 0.5), c (0.8, 0.3), n (0.2, 0.1).
  const double r1[3] = {1.0, 0.8, 0.2}, r0[3] = {0.5, 0.3, 0.1};
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < 3; ++k) {
    rows.push_back({1 - r0[k], r0[k]});
    rows.push_back({1 - r1[k], r1[k]});
  }
  m.add_node("R", Domain{0, 1}, {"K", "T"}, rows);
  return m;
}

// Covariate X, exposure T given X, disease R given (X, T) with the odds of
// disease under exposure e times those without exposure in every stratum.
inline scm::Scm case_control_population(std::uint64_t seed = 0, double e = 3.5, std::size_t card = 2) {
  require(e > 0, ErrorKind::invalid_argument, "odds ratio must be positive");
  require(card >= 1, ErrorKind::invalid_argument, "covariate needs at least one value");
  auto src = std::make_shared<const exogenous::DigitStream>(seed);
  exogenous::UniformStream u(src, 1);
  scm::Scm m;
  m.name = "case_control_pop";
  m.description = "population with odds ratio " + detail::mid_label(e) + " in every covariate stratum";
  std::vector<double> px;
  double s = 0;
  for (std::size_t i = 0; i < card; ++i) {
    px.push_back(0.5 + u.next_uniform());
    s += px.back();
  }
  for (auto& p : px) p /= s;
  m.add_node("X", Domain::range(card), {}, {px});
  std::vector<std::vector<double>> trows, rrows;
  for (std::size_t x = 0; x < card; ++x) {
    const double pt = 0.2 + 0.6 * u.next_uniform();
    trows.push_back({1 - pt, pt});
    const double p0 = 0.05 + 0.25 * u.next_uniform();
    const double o1 = e * p0 / (1 - p0);
    const double p1 = o1 / (1 + o1);
    rrows.push_back({1 - p0, p0});
    rrows.push_back({1 - p1, p1});
  }
  m.add_node("T", Domain{0, 1}, {"X"}, trows);
  m.add_node("R", Domain{0, 1}, {"X", "T"}, rrows);
  return m;
}

inline ExampleModel build_example(const ExampleSpec& spec) {
  const ExampleInfo* info = nullptr;
  for (const auto& e : list_examples())
    if (e.name == spec.name) info = &e;
  require(info != nullptr, ErrorKind::invalid_argument, "unknown example " + spec.name);
  std::map<std::string, double> p;
  for (const auto& d : info->params) p[d.name] = d.fallback;
  for (const auto& [k, v] : spec.params) {
    require(p.count(k), ErrorKind::invalid_argument, "example " + spec.name + " has no parameter " + k);
    p[k] = v;
  }
  ExampleModel out;
  out.name = spec.name;
  auto random = [&](const graph::Dag& g) {
    const double card = p.at("card");
    require(card >= 2 && card <= 6 && card == std::floor(card), ErrorKind::invalid_argument,
            "card must be an integer in 2..6");
    require(p.at("seed") >= 0, ErrorKind::invalid_argument, "seed must be non-negative");
    auto m = random_scm(g, static_cast<std::uint64_t>(p.at("seed")), static_cast<std::size_t>(card));
    m.name = spec.name;
    m.description = info->summary;
    out.discrete = std::move(m);
  };
  const std::string& n = spec.name;
  if (n == "simpson_binary") {
    SimpsonBinaryParams<double> q;
    q.p[0][0] = p["p00"];
    q.p[0][1] = p["p01"];
    q.p[1][0] = p["p10"];
    q.p[1][1] = p["p11"];
    q.beta0 = p["beta"];
    q.beta1 = p["beta1"] >= 0 ? p["beta1"] : 1 - p["beta"];
    q.px0 = p["px0"];
    q.paradox = p["paradox"] != 0;
    out.discrete = simpson_binary(q);
  } else if (n == "simpson_continuous") {
    gaussian::SimpsonParams q{p["alpha"], p["beta"], p["gamma"], p["mu"], p["sigma1"], p["sigma2"], p["sigma3"]};
    gaussian::simpson_cont_report(q);
    out.components = {gaussian::simpson_continuous_model(q)};
    out.weights = {1.0};
    out.discrete = detail::discretize(out.components, out.weights, "", {static_cast<std::size_t>(p["bins"]), 4},
                                      out.notes);
    out.discrete->name = n;
    out.discrete->description = info->summary + " (discretized)";
  } else if (n == "lord") {
    gaussian::LordParams q{p["mu1"], p["mu2"], p["sigma"], p["p"], p["rho"]};
    gaussian::lord_report(q);
    out.components = {gaussian::lord_component(q, 1), gaussian::lord_component(q, 2)};
    out.weights = {q.p, 1 - q.p};
    out.discrete = detail::discretize(out.components, out.weights, "T", {static_cast<std::size_t>(p["bins"]), 4},
                                      out.notes);
    out.discrete->name = n;
    out.discrete->description = info->summary + " (discretized, T = group)";
  } else if (n == "fig1") {
    random(fig1_graph());
  } else if (n == "fig1a") {
    random(fig1a_graph());
  } else if (n == "two_stage") {
    random(two_stage_graph());
  } else if (n == "smoking") {
    random(smoking_graph());
  } else if (n == "eelworms") {
    random(eelworms_graph());
  } else if (n == "treatment_plan") {
    random(treatment_plan_graph());
  } else if (n == "hiring") {
    random(hiring_graph());
  } else if (n == "iv_binary") {
    out.discrete = iv_three_type(p["pa"], p["pc"], p["pi"]);
  } else if (n == "case_control_pop") {
    require(p["card"] >= 1 && p["card"] == std::floor(p["card"]), ErrorKind::invalid_argument,
            "card must be a positive integer");
    out.discrete = case_control_population(static_cast<std::uint64_t>(p["seed"]), p["e"],
                                           static_cast<std::size_t>(p["card"]));
  }
  if (out.discrete) scm::ensure_valid(*out.discrete);
  for (const auto& c : out.components) gaussian::validate(c);
  return out;
}

}  // namespace causal::examples
