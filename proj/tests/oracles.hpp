#pragma once

// Brute-force counterparts of the identification formulas. Every oracle
// rebuilds the relevant intervened model and enumerates it; none of them
// calls the formula it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "causal/diagnostics.hpp"
#include "causal/docalc.hpp"
#include "causal/estimands.hpp"
#include "causal/examples.hpp"
#include "causal/identify.hpp"
#include "causal/scm.hpp"

namespace oracle {

using namespace causal;

inline double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / 2;
}

inline std::vector<double> law(const scm::Scm& m, const std::string& node, const Assignment& given = {}) {
  auto j = scm::joint_distribution(m);
  return scm::restrict(j, {node}, given).probs;
}

inline std::vector<double> interventional(const scm::Scm& m, const Intervention& iv, const std::string& node,
                                          const Assignment& given = {}) {
  return law(scm::intervene(m, iv), node, given);
}

// Random domain sizes in 2..max_card for every node.
inline std::map<std::string, std::size_t> random_cards(const graph::Dag& g, exogenous::UniformStream& u,
                                                       std::size_t max_card = 3) {
  std::map<std::string, std::size_t> c;
  for (const auto& n : g.nodes()) c[n] = 2 + static_cast<std::size_t>(u.next_uniform() * double(max_card - 1));
  return c;
}

inline scm::Scm fuzz_model(const graph::Dag& g, std::uint64_t seed, std::size_t max_card = 3,
                           const std::map<std::string, std::size_t>& fixed = {}) {
  auto src = std::make_shared<const exogenous::DigitStream>(seed);
  exogenous::UniformStream u(src, 1);
  auto cards = random_cards(g, u, max_card);
  for (const auto& [k, v] : fixed) cards[k] = v;
  return examples::random_scm(g, cards, u, 0.05);
}

// Maximum TV distance between formula and oracle over `count` seeded models.
struct FuzzResult {
  std::size_t instances = 0;
  double max_tv = 0;
};

inline FuzzResult fuzz_backdoor(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::fig1_graph();
  const std::vector<std::vector<std::string>> sets{{"X3", "X4"}, {"X3", "X1"}, {"X3", "X2"}, {"X3", "X5"},
                                                   {"X1", "X2", "X3", "X4", "X5"}};
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i);
    auto j = scm::joint_distribution(m);
    const auto& z = sets[i % sets.size()];
    for (Value t : m.domain("T").values) {
      auto f = identify::adjust(j, "T", t, "R", z);
      r.max_tv = std::max(r.max_tv, tv(f.probs, interventional(m, {{"T", t}}, "R")));
    }
    ++r.instances;
  }
  return r;
}

inline FuzzResult fuzz_frontdoor(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::smoking_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i);
    auto j = scm::joint_distribution(m);
    auto res = identify::frontdoor(m.dag, j, "Y", "Z", "W");
    for (Value y : m.domain("Y").values) {
      auto truth = interventional(m, {{"Y", y}}, "W");
      r.max_tv = std::max(r.max_tv, tv(res.law_given(y, m.domain("W")).probs, truth));
    }
    ++r.instances;
  }
  return r;
}

inline FuzzResult fuzz_eelworms(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::eelworms_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i, 2);
    auto j = scm::joint_distribution(m);
    auto mu = identify::eelworms_effect(m.dag, j, {{"X", "X"}, {"U", "U"}, {"V", "V"}, {"W", "W"}, {"Y", "Y"}});
    for (Value x : m.domain("X").values) {
      auto truth = interventional(m, {{"X", x}}, "Y");
      std::vector<double> f;
      for (Value y : m.domain("Y").values) f.push_back(mu.at({x, y}));
      r.max_tv = std::max(r.max_tv, tv(f, truth));
    }
    ++r.instances;
  }
  return r;
}

inline std::map<std::string, std::string> gformula_binding() {
  std::map<std::string, std::string> b;
  for (const auto& n : identify::gformula_roles()) b[n] = n;
  return b;
}

inline FuzzResult fuzz_gformula(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto g = examples::two_stage_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i, 2);
    auto j = scm::joint_distribution(m);
    for (Value t : m.domain("T").values)
      for (Value t2 : m.domain("T'").values) {
        auto f = identify::gformula2(m.dag, j, gformula_binding(), t, t2);
        auto truth = interventional(m, {{"T", t}, {"T'", t2}}, "R'");
        r.max_tv = std::max(r.max_tv, tv(f.overall.probs, truth));
      }
    ++r.instances;
  }
  return r;
}

inline std::map<std::string, std::string> plan_binding() {
  return {{"Y1", "Y1"}, {"Y2", "Y2"}, {"Y3", "Y3"}, {"Y4", "Y4"}};
}

inline FuzzResult fuzz_direct(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::treatment_plan_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i);
    auto j = scm::joint_distribution(m);
    for (Value y2 : m.domain("Y2").values)
      for (Value t : m.domain("Y4").values) {
        auto f = estimands::two_stage_direct(m.dag, j, plan_binding(), y2, t);
        auto truth = interventional(m, {{"Y2", y2}}, "Y1", {{"Y4", t}});
        r.max_tv = std::max(r.max_tv, tv(f.law.probs, truth));
      }
    ++r.instances;
  }
  return r;
}

// The policy model: Y2 is forced to 1 whenever Y3 = 1, otherwise unchanged.
inline scm::Scm policy_model(const scm::Scm& m) {
  scm::Scm out = m;
  auto& c = out.cpt("Y2");
  const auto& ps = c.parents;
  for (std::size_t row = 0; row < c.rows.size(); ++row) {
    std::size_t rr = row;
    Value y3 = 0;
    for (std::size_t i = ps.size(); i-- > 0;) {
      const Domain& d = out.domain(ps[i]);
      if (ps[i] == "Y3") y3 = d.values[rr % d.size()];
      rr /= d.size();
    }
    if (y3 == 1) c.rows[row] = {0.0, 1.0};
  }
  return out;
}

inline FuzzResult fuzz_policy(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::treatment_plan_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i, 3, {{"Y2", 2}, {"Y3", 2}});
    auto j = scm::joint_distribution(m);
    auto res = estimands::antibiotic_policy(m.dag, j, plan_binding());
    auto pm = policy_model(m);
    for (Value y4 : m.domain("Y4").values)
      r.max_tv = std::max(r.max_tv, tv(res.law.at(y4).probs, law(pm, "Y1", {{"Y4", y4}})));
    ++r.instances;
  }
  return r;
}

inline std::map<std::string, std::string> hiring_binding() { return {{"H", "H"}, {"B", "B"}, {"Q", "Q"}, {"S", "S"}}; }

// H reads its sex input from a fresh root Sigma drawn from `sigma`.
inline scm::Scm assumed_sex_model(const scm::Scm& m, const std::map<Value, double>& sigma) {
  scm::Scm out;
  for (const auto& n : graph::topological_order(m.dag)) {
    if (n == "H") continue;
    out.add_node(n, m.domain(n), m.cpt(n).parents, m.cpt(n).rows);
  }
  std::vector<double> row;
  for (Value s : m.domain("S").values) row.push_back(sigma.count(s) ? sigma.at(s) : 0.0);
  out.add_node("Sigma", m.domain("S"), {}, {row});
  auto c = m.cpt("H");
  for (auto& p : c.parents)
    if (p == "S") p = "Sigma";
  out.add_node("H", m.domain("H"), c.parents, c.rows);
  return out;
}

inline FuzzResult fuzz_mediation(std::size_t count, std::uint64_t seed0) {
  FuzzResult r;
  const auto& g = examples::hiring_graph();
  for (std::size_t i = 0; i < count; ++i) {
    auto m = fuzz_model(g, seed0 + i);
    auto src = std::make_shared<const exogenous::DigitStream>(seed0 + i + 7919);
    exogenous::UniformStream u(src, 2);
    std::map<Value, double> sigma;
    double s = 0;
    for (Value v : m.domain("S").values) s += sigma[v] = 0.05 + u.next_uniform();
    for (auto& [_, p] : sigma) p /= s;
    auto j = scm::joint_distribution(m);
    auto f = estimands::mediation_fixed_sex(m.dag, j, hiring_binding(), sigma);
    auto om = assumed_sex_model(m, sigma);
    auto oj = scm::joint_distribution(om);
    for (Value b : m.domain("B").values)
      for (Value q : m.domain("Q").values) {
        auto truth = scm::restrict(oj, {"H"}, {{"B", b}, {"Q", q}}).probs;
        std::vector<double> got;
        for (Value h : m.domain("H").values) got.push_back(f.at({h, b, q}));
        r.max_tv = std::max(r.max_tv, tv(got, truth));
      }
    ++r.instances;
  }
  return r;
}

// Random DAG on V0..V(n-1); edges only go from lower to higher index.
inline graph::Dag random_dag(std::size_t n, double density, exogenous::UniformStream& u) {
  graph::Dag g;
  for (std::size_t i = 0; i < n; ++i) g.add_node("V" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u.next_uniform() < density) g.add_edge("V" + std::to_string(i), "V" + std::to_string(j));
  return g;
}

struct TheoremCheck {
  std::size_t cases = 0;
  std::size_t c1_true = 0, c2_true = 0;
  std::size_t c1_counterexamples = 0, c2_counterexamples = 0;
  double worst_c1 = 0, worst_c2 = 0;  // identity deviation where the condition held
};

// Random models, partitions and values; whenever a condition holds the
// matching rule's identity must hold too.
inline TheoremCheck docalc_theorem(std::size_t count, std::uint64_t seed0, double tol = 1e-12) {
  TheoremCheck out;
  for (std::size_t i = 0; out.cases < count; ++i) {
    auto src = std::make_shared<const exogenous::DigitStream>(seed0 + i);
    exogenous::UniformStream u(src, 2);
    const std::size_t n = 4 + static_cast<std::size_t>(u.next_uniform() * 3);
    auto g = random_dag(n, 0.2 + 0.3 * u.next_uniform(), u);
    auto m = fuzz_model(g, seed0 + i, 2);
    docalc::NodePartition part;
    // Each node lands in W, X, Y, Z or nowhere; Y must not be empty.
    for (const auto& v : g.nodes()) {
      const int slot = static_cast<int>(u.next_uniform() * 5);
      std::vector<std::string>* sets[] = {&part.w, &part.x, &part.y, &part.z, nullptr};
      if (sets[slot]) sets[slot]->push_back(v);
    }
    if (part.y.empty()) {
      if (!part.w.empty()) {
        part.y.push_back(part.w.back());
        part.w.pop_back();
      } else {
        continue;
      }
    }
    Assignment x, z;
    for (const auto& v : part.x) x[v] = u.next_uniform() < 0.5 ? 0 : 1;
    for (const auto& v : part.z) z[v] = u.next_uniform() < 0.5 ? 0 : 1;
    ++out.cases;
    for (int rule : {1, 2}) {
      auto v = docalc::verify_rule(m, part, rule, x, z, tol);
      if (!v.condition_holds) continue;
      auto& hits = rule == 1 ? out.c1_true : out.c2_true;
      auto& bad = rule == 1 ? out.c1_counterexamples : out.c2_counterexamples;
      auto& worst = rule == 1 ? out.worst_c1 : out.worst_c2;
      ++hits;
      worst = std::max(worst, v.identity_deviation);
      if (v.identity_deviation > tol) ++bad;
    }
  }
  return out;
}

// Moves P(r = top value) by `effect` in every row, toward the far side of 1/2.
inline scm::Scm shift_response(const scm::Scm& m, const std::string& r, double effect) {
  scm::Scm out = m;
  for (auto& row : out.cpt(r).rows) {
    const double p = row.back();
    const double q = p <= 0.5 ? p + effect : p - effect;
    row.back() = q;
    row.front() += p - q;
  }
  return out;
}

// First half of the rows from m, second half from its shifted version.
inline scm::Dataset drift_sample(const scm::Scm& m, const std::string& r, double effect, std::size_t n,
                                 std::uint64_t seed) {
  auto a = scm::sample(m, exogenous::DigitStream(seed), n / 2);
  auto b = scm::sample(shift_response(m, r, effect), exogenous::DigitStream(seed ^ 0x9e3779b97f4a7c15ULL), n - n / 2);
  a.rows.insert(a.rows.end(), b.rows.begin(), b.rows.end());
  return a;
}

inline const scm::Scm& diagnostics_fixture() {
  static const scm::Scm m = scm::as_double(examples::simpson_binary(examples::SimpsonBinaryParams<Rational>{}));
  return m;
}

// Fraction of seeded replications that raise the report's alarm.
inline double alarm_rate(std::size_t reps, std::size_t n, double effect, std::uint64_t seed0, double threshold = 0.01) {
  std::size_t alarms = 0;
  for (std::size_t i = 0; i < reps; ++i) {
    const auto& m = diagnostics_fixture();
    auto d = effect == 0 ? scm::sample(m, exogenous::DigitStream(seed0 + i), n)
                         : drift_sample(m, "R", effect, n, seed0 + i);
    alarms += diagnostics::homogeneity_report(d, {"X"}, "T", "R", 2, threshold).alarm;
  }
  return static_cast<double>(alarms) / static_cast<double>(reps);
}

struct Normals {
  std::vector<double> i, t, r;
};

// R = 2 + beta T + eps, T = 1 + 0.8 I + d, cov(d, eps) = 0.5, all unit variance.
inline Normals confounded_linear(double beta, std::size_t n, std::uint64_t seed) {
  auto s = exogenous::split_streams(exogenous::DigitStream(seed), 3);
  Normals out;
  for (std::size_t k = 0; k < n; ++k) {
    const double i = s[0].next_normal(), d = s[1].next_normal(), eta = s[2].next_normal();
    const double eps = 0.5 * d + std::sqrt(0.75) * eta;
    const double t = 1 + 0.8 * i + d;
    out.i.push_back(i);
    out.t.push_back(t);
    out.r.push_back(2 + beta * t + eps);
  }
  return out;
}

// Z a fair coin, W a coin, Y a copy of Z (or independent of it).
inline scm::Scm copy_model(bool copy) {
  scm::Scm m;
  m.add_node("W", Domain{0, 1}, {}, {{0.5, 0.5}});
  m.add_node("Z", Domain{0, 1}, {}, {{0.5, 0.5}});
  if (copy)
    m.add_node("Y", Domain{0, 1}, {"Z"}, {{1.0, 0.0}, {0.0, 1.0}});
  else
    m.add_node("Y", Domain{0, 1}, {"W"}, {{0.3, 0.7}, {0.6, 0.4}});
  return m;
}

// U confounds Z and Y; X is an unrelated root.
inline scm::Scm confounded() {
  scm::Scm m;
  m.add_node("X", Domain{0, 1}, {}, {{0.5, 0.5}});
  m.add_node("U", Domain{0, 1}, {}, {{0.5, 0.5}});
  m.add_node("Z", Domain{0, 1}, {"U"}, {{0.9, 0.1}, {0.1, 0.9}});
  m.add_node("Y", Domain{0, 1}, {"U", "X", "Z"},
             {{0.8, 0.2}, {0.7, 0.3}, {0.6, 0.4}, {0.5, 0.5}, {0.3, 0.7}, {0.2, 0.8}, {0.25, 0.75}, {0.1, 0.9}});
  return m;
}

}  // namespace oracle
