#pragma once

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graph.hpp"
#include "query.hpp"
#include "scm.hpp"

namespace causal::estimands {

using Roles = std::map<std::string, std::string>;

inline const Template& two_stage_template() {
  static const Template t{"two-stage treatment (U latent)",
                          {"Y1", "Y2", "Y3", "Y4"},
                          {"U"},
                          {{"U", "Y3"}, {"U", "Y1"}, {"Y4", "Y3"}, {"Y4", "Y1"}, {"Y3", "Y2"}, {"Y2", "Y1"}, {"Y4", "Y2"}}};
  return t;
}

template <class P>
struct DirectEffect {
  BasicPmf<P> law;  // of Y1 with Y2 set to y2, among Y4 = t
  P nu;             // its mean
};

// Direct effect of the first treatment Y4 on Y1 when the second treatment
// Y2 is held at y2.
template <class P>
DirectEffect<P> two_stage_direct(const graph::Dag& dag, const scm::BasicJointTable<P>& joint, const Roles& roles,
                                 Value y2, Value t) {
  match_template(dag, two_stage_template(), roles);
  const auto &Y1 = roles.at("Y1"), &Y2 = roles.at("Y2"), &Y3 = roles.at("Y3"), &Y4 = roles.at("Y4");
  Probe<P> q(joint, "two-stage direct effect");
  const Domain& yd = joint.domain(Y1);
  BasicPmf<P> law{Y1, yd, std::vector<P>(yd.size(), P(0))};
  for (Value y3 : q.values(Y3)) {
    P w = q.cond({{Y3, y3}}, {{Y4, t}});
    if (negligible(w)) continue;
    for (std::size_t i = 0; i < yd.size(); ++i)
      law.probs[i] += q.cond({{Y1, yd.values[i]}}, {{Y2, y2}, {Y3, y3}, {Y4, t}}) * w;
  }
  P nu = law.mean();
  return {std::move(law), nu};
}

namespace detail {

inline void require_binary01(const Domain& d, const std::string& node) {
  require(d.size() == 2 && d.index_of(0) && d.index_of(1), ErrorKind::invalid_argument,
          node + " must take the values 0 and 1");
}

}  // namespace detail

template <class P>
struct PolicyResult {
  std::map<Value, BasicPmf<P>> law;  // y4 -> law of Y1 under the policy
  std::map<Value, P> mean;
  bool improves = false;             // E(Y1 | Y4=1) < E(Y1 | Y4=0) under the policy
};

// Policy "give the second treatment to everyone with Y3 = 1", evaluated from
// observational data.
template <class P>
PolicyResult<P> antibiotic_policy(const graph::Dag& dag, const scm::BasicJointTable<P>& joint, const Roles& roles) {
  match_template(dag, two_stage_template(), roles);
  const auto &Y1 = roles.at("Y1"), &Y2 = roles.at("Y2"), &Y3 = roles.at("Y3"), &Y4 = roles.at("Y4");
  detail::require_binary01(joint.domain(Y2), Y2);
  detail::require_binary01(joint.domain(Y3), Y3);
  Probe<P> q(joint, "policy formula");
  const Domain& yd = joint.domain(Y1);
  PolicyResult<P> res;
  for (Value y4 : q.values(Y4)) {
    if (!q.positive({{Y4, y4}})) continue;
    BasicPmf<P> law{Y1, yd, std::vector<P>(yd.size(), P(0))};
    P p3 = q.cond({{Y3, 1}}, {{Y4, y4}});
    for (std::size_t i = 0; i < yd.size(); ++i) {
      law.probs[i] = q.cond({{Y1, yd.values[i]}, {Y3, 0}}, {{Y4, y4}});
      if (!negligible(p3)) law.probs[i] += q.cond({{Y1, yd.values[i]}}, {{Y2, 1}, {Y3, 1}, {Y4, y4}}) * p3;
    }
    res.mean[y4] = law.mean();
    res.law.emplace(y4, std::move(law));
  }
  if (res.mean.count(0) && res.mean.count(1)) res.improves = res.mean.at(1) < res.mean.at(0);
  return res;
}

inline const Template& hiring_template() {
  static const Template t{"hiring (S -> B -> Q -> H, S -> Q, S -> H, B -> H)",
                          {"H", "B", "Q", "S"},
                          {},
                          {{"S", "B"}, {"S", "Q"}, {"S", "H"}, {"B", "Q"}, {"B", "H"}, {"Q", "H"}}};
  return t;
}

using Triple = std::array<Value, 3>;

// (h, b, q) -> P(H=h | B=b, Q=q) when the employer's perception of sex is
// drawn from sigma independently of the applicant.
template <class P>
std::map<Triple, P> mediation_fixed_sex(const graph::Dag& dag, const scm::BasicJointTable<P>& joint,
                                        const Roles& roles, const std::map<Value, P>& sigma) {
  match_template(dag, hiring_template(), roles);
  const auto &H = roles.at("H"), &B = roles.at("B"), &Q = roles.at("Q"), &S = roles.at("S");
  P total = 0;
  for (const auto& [s, p] : sigma) {
    require(joint.domain(S).index_of(s).has_value(), ErrorKind::invalid_argument,
            "assumed sex value " + std::to_string(s) + " outside the domain of " + S);
    require(p >= 0, ErrorKind::invalid_argument, "negative mass in the assumed-sex distribution");
    total += p;
  }
  require(std::abs(to_double(total) - 1) <= 1e-12, ErrorKind::invalid_argument,
          "assumed-sex distribution sums to " + std::to_string(to_double(total)));
  Probe<P> q(joint, "hiring formula with assumed sex");
  std::map<Triple, P> out;
  for (Value b : q.values(B))
    for (Value qq : q.values(Q))
      for (Value h : q.values(H)) {
        P s = 0;
        for (const auto& [sv, ps] : sigma) {
          if (negligible(ps)) continue;
          s += q.cond({{H, h}}, {{B, b}, {Q, qq}, {S, sv}}) * ps;
        }
        out[{h, b, qq}] = s;
      }
  return out;
}

template <class P>
struct NaturalIndirect {
  P value;
  P under_s0;  // sum over (b,q) of E(H | b, q, S=1) P(b, q | S=0)
  P under_s1;  // same with P(b, q | S=1)
};

template <class P>
NaturalIndirect<P> natural_indirect(const graph::Dag& dag, const scm::BasicJointTable<P>& joint, const Roles& roles) {
  match_template(dag, hiring_template(), roles);
  const auto &H = roles.at("H"), &B = roles.at("B"), &Q = roles.at("Q"), &S = roles.at("S");
  detail::require_binary01(joint.domain(S), S);
  Probe<P> q(joint, "natural indirect effect");
  NaturalIndirect<P> res{0, 0, 0};
  for (Value b : q.values(B))
    for (Value qq : q.values(Q)) {
      P w0 = q.cond({{B, b}, {Q, qq}}, {{S, 0}});
      P w1 = q.cond({{B, b}, {Q, qq}}, {{S, 1}});
      if (negligible(w0) && negligible(w1)) continue;
      P e = q.expect(H, {{B, b}, {Q, qq}, {S, 1}});
      res.under_s0 += e * w0;
      res.under_s1 += e * w1;
    }
  res.value = res.under_s0 - res.under_s1;
  return res;
}

constexpr double weak_instrument_floor = 1e-12;

template <class P>
struct IvResult {
  P theta;
  P numerator;
  P denominator;
  bool valid = true;
};

namespace detail {

template <class P>
void require_strong(const P& den, const std::string& what) {
  if (!(std::abs(to_double(den)) > weak_instrument_floor))
    fail(ErrorKind::weak_instrument, "instrument does not move the treatment: " + what + " = " +
                                         std::to_string(to_double(den)));
}

}  // namespace detail

// Wald ratio for a binary instrument: the larger instrument value plays I=1.
template <class P>
IvResult<P> iv_theta(const scm::BasicJointTable<P>& joint, const Roles& roles) {
  const auto &I = roles.at("I"), &T = roles.at("T"), &R = roles.at("R");
  const Domain& id = joint.domain(I);
  require(id.size() == 2, ErrorKind::invalid_argument, "instrument " + I + " must be binary");
  require(joint.domain(T).size() == 2, ErrorKind::invalid_argument, "treatment " + T + " must be binary");
  Value i0 = std::min(id.values[0], id.values[1]), i1 = std::max(id.values[0], id.values[1]);
  Probe<P> q(joint, "instrumental-variable ratio");
  P num = q.expect(R, {{I, i1}}) - q.expect(R, {{I, i0}});
  P den = q.expect(T, {{I, i1}}) - q.expect(T, {{I, i0}});
  detail::require_strong(den, "E(T|I=" + std::to_string(i1) + ") - E(T|I=" + std::to_string(i0) + ")");
  return {num / den, num, den, true};
}

// Same ratio from sample averages.
inline IvResult<double> iv_theta(const scm::Dataset& d, const Roles& roles) {
  const std::size_t ci = d.column(roles.at("I")), ct = d.column(roles.at("T")), cr = d.column(roles.at("R"));
  std::map<Value, std::array<double, 3>> acc;  // i -> (count, sum T, sum R)
  for (const auto& row : d.rows) {
    auto& a = acc[row[ci]];
    a[0] += 1;
    a[1] += static_cast<double>(row[ct]);
    a[2] += static_cast<double>(row[cr]);
  }
  require(acc.size() == 2, ErrorKind::invalid_argument,
          "instrument " + roles.at("I") + " must take exactly two values in the data");
  const auto& lo = acc.begin()->second;
  const auto& hi = acc.rbegin()->second;
  double num = hi[2] / hi[0] - lo[2] / lo[0];
  double den = hi[1] / hi[0] - lo[1] / lo[0];
  detail::require_strong(den, "difference of treatment averages");
  return {num / den, num, den, true};
}

template <class P>
struct IvTerm {
  Value level;
  P theta;
  P numerator;
  P denominator;
  P weight;  // p_k
};

template <class P>
struct IvMultiResult {
  Value base;
  std::vector<IvTerm<P>> terms;
  P overall;  // sum of theta_k p_k
};

template <class P>
IvMultiResult<P> iv_multi(const scm::BasicJointTable<P>& joint, const Roles& roles, Value i0) {
  const auto &I = roles.at("I"), &T = roles.at("T"), &R = roles.at("R");
  require(joint.domain(I).index_of(i0).has_value(), ErrorKind::invalid_argument,
          "base value " + std::to_string(i0) + " outside the domain of " + I);
  Probe<P> q(joint, "multi-level instrument");
  IvMultiResult<P> res{i0, {}, 0};
  const P er0 = q.expect(R, {{I, i0}}), et0 = q.expect(T, {{I, i0}});
  std::vector<Value> levels = q.values(I);
  std::sort(levels.begin(), levels.end());
  P norm = 0;
  for (Value ik : levels) {
    if (ik == i0) continue;
    P num = q.expect(R, {{I, ik}}) - er0;
    P den = q.expect(T, {{I, ik}}) - et0;
    detail::require_strong(den, "denominator for level " + std::to_string(ik));
    P w = q.p({{I, ik}}) * den;
    norm += w;
    res.terms.push_back({ik, num / den, num, den, w});
  }
  require(!res.terms.empty(), ErrorKind::invalid_argument, "instrument " + I + " has no level besides the base");
  detail::require_strong(norm, "normalizer of the level weights");
  for (auto& t : res.terms) {
    t.weight /= norm;
    res.overall += t.theta * t.weight;
  }
  return res;
}

struct TslsResult {
  std::size_t n = 0;
  double beta = 0;         // cov(I,R) / cov(I,T)
  double first_stage = 0;  // cov(I,T) / var(I)
  double reduced = 0;      // cov(I,R) / var(I)
  double ratio = 0;        // reduced / first_stage
  double intercept = 0;
  double se = 0;           // homoskedastic standard error of beta
  double ols_slope = 0;    // regression of R on T, for comparison
};

inline TslsResult iv_tsls(std::span<const double> i, std::span<const double> t, std::span<const double> r) {
  require(i.size() == t.size() && t.size() == r.size(), ErrorKind::invalid_argument, "columns of unequal length");
  const std::size_t n = i.size();
  require(n >= 3, ErrorKind::invalid_argument, "need at least three observations");
  auto mean = [n](std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(n);
  };
  const double mi = mean(i), mt = mean(t), mr = mean(r);
  double sii = 0, sit = 0, sir = 0, stt = 0, str = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double di = i[k] - mi, dt = t[k] - mt, dr = r[k] - mr;
    sii += di * di;
    sit += di * dt;
    sir += di * dr;
    stt += dt * dt;
    str += dt * dr;
  }
  const double nn = static_cast<double>(n);
  detail::require_strong(sit / nn, "sample covariance of instrument and treatment");
  require(sii > 0, ErrorKind::weak_instrument, "instrument is constant");
  TslsResult res;
  res.n = n;
  res.beta = sir / sit;
  res.first_stage = sit / sii;
  res.reduced = sir / sii;
  res.ratio = res.reduced / res.first_stage;
  res.intercept = mr - res.beta * mt;
  double rss = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = r[k] - res.intercept - res.beta * t[k];
    rss += e * e;
  }
  const double s2 = rss / (nn - 2);
  res.se = std::sqrt(s2 * sii) / std::abs(sit);
  res.ols_slope = stt > 0 ? str / stt : 0;
  return res;
}

inline TslsResult iv_tsls(const scm::Dataset& d, const Roles& roles) {
  std::array<std::vector<double>, 3> cols;
  const std::array<std::size_t, 3> idx{d.column(roles.at("I")), d.column(roles.at("T")), d.column(roles.at("R"))};
  for (const auto& row : d.rows)
    for (std::size_t c = 0; c < 3; ++c) cols[c].push_back(static_cast<double>(row[idx[c]]));
  return iv_tsls(cols[0], cols[1], cols[2]);
}

inline double odds(double p) { return p / (1 - p); }

// Odds ratio from exposure probabilities among cases (p) and non-cases (q).
inline double odds_ratio_pq(double p, double q) { return p * (1 - q) / (q * (1 - p)); }

struct OddsStratum {
  Assignment x;
  double p = 0;         // P(T=1 | R=1, x)
  double q = 0;         // P(T=1 | R=0, x)
  double e_disease = 0;  // odds of R=1 under T=1 over odds under T=0
  double e_exposure = 0;  // the same ratio computed from p and q
  double weight = 0;     // P(x | R=1)
};

struct OddsRatioReport {
  std::vector<OddsStratum> strata;
  double overall = 0;  // E[e(X) | R=1]
};

template <class P>
OddsRatioReport odds_ratio(const scm::BasicJointTable<P>& joint, const std::string& r, const std::string& t,
                           const std::vector<std::string>& x) {
  detail::require_binary01(joint.domain(r), r);
  detail::require_binary01(joint.domain(t), t);
  Probe<P> q(joint, "odds ratio");
  const double pr1 = to_double(q.p({{r, 1}}));
  require(pr1 > positivity_floor, ErrorKind::positivity, "P(" + r + "=1) = 0 in odds ratio");
  OddsRatioReport rep;
  for (const auto& xc : configurations(joint, x)) {
    if (!q.positive(xc)) continue;
    for (Value tv : {0, 1})
      for (Value rv : {0, 1}) {
        Assignment cell = merge(xc, {{t, tv}, {r, rv}});
        if (!q.positive(cell))
          fail(ErrorKind::positivity, "P(" + describe(cell) + ") = 0 in odds ratio");
      }
    OddsStratum s;
    s.x = xc;
    const double d1 = to_double(q.cond({{r, 1}}, merge(xc, {{t, 1}})));
    const double d0 = to_double(q.cond({{r, 1}}, merge(xc, {{t, 0}})));
    s.e_disease = odds(d1) / odds(d0);
    s.p = to_double(q.cond({{t, 1}}, merge(xc, {{r, 1}})));
    s.q = to_double(q.cond({{t, 1}}, merge(xc, {{r, 0}})));
    s.e_exposure = odds_ratio_pq(s.p, s.q);
    s.weight = to_double(q.p(merge(xc, {{r, 1}}))) / pr1;
    rep.overall += s.e_disease * s.weight;
    rep.strata.push_back(std::move(s));
  }
  return rep;
}

}  // namespace causal::estimands
