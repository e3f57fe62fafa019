#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "graph.hpp"
#include "query.hpp"
#include "scm.hpp"

namespace causal::identify {

template <class P>
struct BasicEffectReport {
  std::string estimand;
  std::string treatment;
  std::vector<Value> t_values;
  std::string response;
  std::vector<BasicPmf<P>> per_t;
  std::optional<P> ate;
  std::string citation;
};

using EffectReport = BasicEffectReport<double>;

namespace detail {

inline void check_roles(const std::string& t, const std::string& r, const std::vector<std::string>& z) {
  require(t != r, ErrorKind::invalid_argument, "treatment and response must differ");
  NodeSet seen{t, r};
  for (const auto& n : z)
    require(seen.insert(n).second, ErrorKind::invalid_argument, "adjustment set repeats or contains " + n);
}

template <class P>
BasicPmf<P> adjust_over(const Probe<P>& q, const std::string& t, Value tv, const std::string& r,
                        const std::vector<Assignment>& strata) {
  BasicPmf<P> out{r, q.domain(r), std::vector<P>(q.domain(r).size(), P(0))};
  for (const auto& z : strata) {
    P pz = q.p(z);
    if (negligible(pz)) continue;
    Assignment tz = merge(z, {{t, tv}});
    for (std::size_t i = 0; i < out.probs.size(); ++i)
      out.probs[i] += q.cond({{r, out.domain.values[i]}}, tz) * pz;
  }
  return out;
}

}  // namespace detail

// Law of the response when T is set to t_val, by adjusting for Z.
template <class P>
BasicPmf<P> adjust(const scm::BasicJointTable<P>& joint, const std::string& t, Value t_val, const std::string& r,
                   const std::vector<std::string>& z) {
  detail::check_roles(t, r, z);
  require(joint.domain(t).index_of(t_val).has_value(), ErrorKind::invalid_argument,
          "value " + std::to_string(t_val) + " outside the domain of " + t);
  Probe<P> q(joint, "adjustment for " + braces(NodeSet(z.begin(), z.end())));
  return detail::adjust_over(q, t, t_val, r, configurations(joint, z));
}

template <class P>
P ate(const scm::BasicJointTable<P>& joint, const std::string& t, Value t1, Value t0, const std::string& r,
      const std::vector<std::string>& z) {
  return adjust(joint, t, t1, r, z).mean() - adjust(joint, t, t0, r, z).mean();
}

template <class P>
BasicEffectReport<P> effect_report(const scm::BasicJointTable<P>& joint, const std::string& t,
                                   const std::vector<Value>& t_values, const std::string& r,
                                   const std::vector<std::string>& z) {
  BasicEffectReport<P> rep{"adjustment", t, t_values, r, {}, std::nullopt,
                           "adjustment formula: sum over z of P(R | T=t, Z=z) P(Z=z)"};
  for (Value v : t_values) rep.per_t.push_back(adjust(joint, t, v, r, z));
  // Two values read as (baseline, treated).
  if (t_values.size() == 2) rep.ate = rep.per_t[1].mean() - rep.per_t[0].mean();
  return rep;
}

// x-configuration -> P(T = . | X = x), for configurations of positive mass.
using PropensityTable = std::map<Assignment, std::vector<double>>;

template <class P>
PropensityTable propensity_table(const scm::BasicJointTable<P>& joint, const std::string& t,
                                 const std::vector<std::string>& x) {
  Probe<P> q(joint, "propensity table");
  PropensityTable out;
  for (const auto& xc : configurations(joint, x)) {
    if (!q.positive(xc)) continue;
    std::vector<double> row;
    for (Value v : q.values(t)) row.push_back(to_double(q.cond({{t, v}}, xc)));
    out[xc] = std::move(row);
  }
  return out;
}

// Adjusts over strata of equal propensity instead of over x itself.
template <class P>
BasicPmf<P> propensity_adjust(const scm::BasicJointTable<P>& joint, const std::string& t, Value t_val,
                              const std::string& r, const std::vector<std::string>& x) {
  detail::check_roles(t, r, x);
  const auto table = propensity_table(joint, t, x);
  std::vector<std::vector<double>> keys;
  std::vector<std::vector<Assignment>> groups;
  for (const auto& [xc, lam] : table) {
    std::size_t g = 0;
    for (; g < keys.size(); ++g) {
      bool same = true;
      for (std::size_t i = 0; i < lam.size() && same; ++i) same = std::abs(lam[i] - keys[g][i]) <= 1e-12;
      if (same) break;
    }
    if (g == keys.size()) {
      keys.push_back(lam);
      groups.emplace_back();
    }
    groups[g].push_back(xc);
  }
  Probe<P> q(joint, "propensity-score adjustment");
  const Domain& rd = joint.domain(r);
  BasicPmf<P> out{r, rd, std::vector<P>(rd.size(), P(0))};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    P pg = 0, ptg = 0;
    std::vector<P> ptrg(rd.size(), P(0));
    for (const auto& xc : groups[g]) {
      pg += q.p(xc);
      Assignment tx = merge(xc, {{t, t_val}});
      ptg += q.p(tx);
      for (std::size_t i = 0; i < rd.size(); ++i) ptrg[i] += q.p(merge(tx, {{r, rd.values[i]}}));
    }
    if (negligible(ptg))
      fail(ErrorKind::positivity, "P(" + t + "=" + std::to_string(t_val) + ", propensity stratum containing " +
                                      describe(groups[g].front()) + ") = 0 in propensity-score adjustment");
    for (std::size_t i = 0; i < rd.size(); ++i) out.probs[i] += ptrg[i] / ptg * pg;
  }
  return out;
}

inline const Template& frontdoor_template() {
  static const Template t{"front-door (Y <- X -> W, Y -> Z -> W, X latent)",
                          {"Y", "Z", "W"},
                          {"X"},
                          {{"X", "Y"}, {"X", "W"}, {"Y", "Z"}, {"Z", "W"}}};
  return t;
}

template <class P>
struct FrontdoorResult {
  std::string y, z, w;
  std::map<std::pair<Value, Value>, P> l;  // (y, w) -> l_y(w)
  std::map<std::pair<Value, Value>, P> m;  // (z, w) -> m_z(w)

  BasicPmf<P> law_given(Value yv, const Domain& wd) const {
    BasicPmf<P> out{w, wd, {}};
    for (Value wv : wd.values) out.probs.push_back(l.at({yv, wv}));
    return out;
  }
};

// Effect of Y on W through the mediator Z when a latent X confounds Y and W.
template <class P>
FrontdoorResult<P> frontdoor(const graph::Dag& dag, const scm::BasicJointTable<P>& joint, const std::string& y,
                             const std::string& z, const std::string& w) {
  match_template(dag, frontdoor_template(), {{"Y", y}, {"Z", z}, {"W", w}});
  Probe<P> q(joint, "front-door formula");
  FrontdoorResult<P> res{y, z, w, {}, {}};
  for (Value zv : q.values(z))
    for (Value wv : q.values(w)) {
      P s = 0;
      for (Value y2 : q.values(y)) {
        P py = q.p({{y, y2}});
        if (negligible(py)) continue;
        s += q.cond({{w, wv}}, {{y, y2}, {z, zv}}) * py;
      }
      res.m[{zv, wv}] = s;
    }
  for (Value yv : q.values(y)) {
    if (!q.positive({{y, yv}})) continue;
    for (Value wv : q.values(w)) {
      P s = 0;
      for (Value zv : q.values(z)) {
        P pz = q.cond({{z, zv}}, {{y, yv}});
        if (negligible(pz)) continue;
        s += res.m.at({zv, wv}) * pz;
      }
      res.l[{yv, wv}] = s;
    }
  }
  return res;
}

inline const Template& eelworms_template() {
  static const Template t{"eelworms (A, B latent)",
                          {"X", "U", "V", "W", "Y"},
                          {"A", "B"},
                          {{"A", "U"},
                           {"A", "B"},
                           {"A", "X"},
                           {"U", "V"},
                           {"B", "W"},
                           {"X", "V"},
                           {"V", "W"},
                           {"X", "Y"},
                           {"V", "Y"},
                           {"W", "Y"}}};
  return t;
}

// (x, y) -> law of Y when X is set to x, for the fumigation example.
template <class P>
std::map<std::pair<Value, Value>, P> eelworms_effect(const graph::Dag& dag, const scm::BasicJointTable<P>& joint,
                                                      const std::map<std::string, std::string>& roles) {
  match_template(dag, eelworms_template(), roles);
  const auto &X = roles.at("X"), &U = roles.at("U"), &V = roles.at("V"), &W = roles.at("W"), &Y = roles.at("Y");
  Probe<P> q(joint, "eelworms formula");
  std::map<std::pair<Value, Value>, P> out;
  for (Value x : q.values(X)) {
    std::vector<P> mu(q.values(Y).size(), P(0));
    for (Value v : q.values(V))
      for (Value w : q.values(W)) {
        P weight = 0;
        for (Value u : q.values(U)) {
          P inner = 0;
          for (Value x2 : q.values(X)) {
            P pxu = q.p({{X, x2}, {U, u}});
            if (negligible(pxu)) continue;
            inner += q.cond({{W, w}}, {{V, v}, {X, x2}, {U, u}}) * pxu;
          }
          if (negligible(inner)) continue;
          weight += q.cond({{V, v}}, {{X, x}, {U, u}}) * inner;
        }
        if (negligible(weight)) continue;
        for (std::size_t i = 0; i < mu.size(); ++i)
          mu[i] += q.cond({{Y, q.values(Y)[i]}}, {{X, x}, {V, v}, {W, w}}) * weight;
      }
    for (std::size_t i = 0; i < mu.size(); ++i) out[{x, q.values(Y)[i]}] = mu[i];
  }
  return out;
}

inline const std::vector<std::string>& gformula_roles() {
  static const std::vector<std::string> r{"X", "T", "R", "X'", "T'", "R'"};
  return r;
}

inline Template gformula_template() {
  Template t{"two-stage sequential treatment", gformula_roles(), {}, {}};
  const auto& r = gformula_roles();
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j) t.edges.emplace_back(r[i], r[j]);
  return t;
}

template <class P>
struct GFormulaResult {
  BasicPmf<P> overall;
  std::map<Value, BasicPmf<P>> given_x;  // the x-conditional variant, for x of positive mass
};

// Law of the final response when both treatments are set.
template <class P>
GFormulaResult<P> gformula2(const graph::Dag& dag, const scm::BasicJointTable<P>& joint,
                            const std::map<std::string, std::string>& roles, Value t, Value t2) {
  match_template(dag, gformula_template(), roles);
  const auto &X = roles.at("X"), &T = roles.at("T"), &R = roles.at("R"), &X2 = roles.at("X'"),
             &T2 = roles.at("T'"), &R2 = roles.at("R'");
  Probe<P> q(joint, "two-stage g-formula");
  const Domain& rd = joint.domain(R2);
  GFormulaResult<P> res{{R2, rd, std::vector<P>(rd.size(), P(0))}, {}};
  for (Value x : q.values(X)) {
    P px = q.p({{X, x}});
    if (negligible(px)) continue;
    BasicPmf<P> cond{R2, rd, std::vector<P>(rd.size(), P(0))};
    for (Value r : q.values(R)) {
      P pr = q.cond({{R, r}}, {{X, x}, {T, t}});
      if (negligible(pr)) continue;
      for (Value x2 : q.values(X2)) {
        P px2 = q.cond({{X2, x2}}, {{X, x}, {T, t}, {R, r}});
        if (negligible(px2)) continue;
        for (std::size_t i = 0; i < rd.size(); ++i)
          cond.probs[i] += q.cond({{R2, rd.values[i]}}, {{X, x}, {T, t}, {R, r}, {X2, x2}, {T2, t2}}) * px2 * pr;
      }
    }
    for (std::size_t i = 0; i < rd.size(); ++i) res.overall.probs[i] += cond.probs[i] * px;
    res.given_x.emplace(x, std::move(cond));
  }
  return res;
}

}  // namespace causal::identify
