#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "graph.hpp"
#include "query.hpp"
#include "scm.hpp"

namespace causal::docalc {

struct NodePartition {
  std::vector<std::string> w, x, y, z;
};

// Suffix naming the augmentation copies of Z in the double-prime model.
inline const std::string augment_suffix = "''";

template <class P>
void check_partition(const scm::BasicScm<P>& m, const NodePartition& part) {
  NodeSet seen;
  for (const auto* s : {&part.w, &part.x, &part.y, &part.z})
    for (const auto& n : *s) {
      require(m.dag.has_node(n), ErrorKind::invalid_argument, "partition names unknown node " + n);
      require(seen.insert(n).second, ErrorKind::invalid_argument, "node " + n + " appears in two partition sets");
    }
  require(!part.y.empty(), ErrorKind::invalid_argument, "the response set Y is empty");
}

namespace detail {

template <class P>
void check_values(const scm::BasicScm<P>& m, const std::vector<std::string>& nodes, const Assignment& a,
                  const std::string& what) {
  for (const auto& n : nodes) {
    auto it = a.find(n);
    require(it != a.end(), ErrorKind::invalid_argument, what + " gives no value for " + n);
    require(m.domain(n).index_of(it->second).has_value(), ErrorKind::invalid_argument,
            "value " + std::to_string(it->second) + " outside the domain of " + n);
  }
  for (const auto& [k, _] : a)
    require(std::find(nodes.begin(), nodes.end(), k) != nodes.end(), ErrorKind::invalid_argument,
            what + " assigns " + k + ", which is not in its set");
}

// Drops the parents listed in `fixed` from a table, keeping the rows where
// they take the given values.
template <class P>
scm::BasicCpt<P> fix_parents(const scm::BasicScm<P>& m, const std::string& node, const Assignment& fixed) {
  const auto& old = m.cpt(node);
  scm::BasicCpt<P> out;
  std::vector<std::size_t> radix, fixed_idx;
  std::vector<bool> is_fixed;
  for (const auto& p : old.parents) {
    radix.push_back(m.domain(p).size());
    auto it = fixed.find(p);
    is_fixed.push_back(it != fixed.end());
    fixed_idx.push_back(it != fixed.end() ? *m.domain(p).index_of(it->second) : 0);
    if (it == fixed.end()) out.parents.push_back(p);
  }
  std::size_t rows = 1;
  for (const auto& p : out.parents) rows *= m.domain(p).size();
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::size_t> free_idx(out.parents.size());
    std::size_t rr = r;
    for (std::size_t i = out.parents.size(); i-- > 0;) {
      free_idx[i] = rr % m.domain(out.parents[i]).size();
      rr /= m.domain(out.parents[i]).size();
    }
    std::size_t old_row = 0, k = 0;
    for (std::size_t i = 0; i < old.parents.size(); ++i)
      old_row = old_row * radix[i] + (is_fixed[i] ? fixed_idx[i] : free_idx[k++]);
    out.rows.push_back(old.rows[old_row]);
  }
  return out;
}

// Removes the mechanisms of the fixed nodes and substitutes their values
// wherever they occur.
template <class P>
scm::BasicScm<P> mutilate(const scm::BasicScm<P>& m, const Assignment& fixed) {
  scm::BasicScm<P> out;
  out.name = m.name;
  out.description = m.description;
  for (const auto& n : m.dag.nodes()) {
    if (fixed.count(n)) continue;
    auto c = fix_parents(m, n, fixed);
    out.add_node(n, m.domain(n), c.parents, c.rows);
  }
  return out;
}

template <class P>
void reattach_exogenous(const scm::BasicScm<P>& m, scm::BasicScm<P>& out, const std::vector<std::string>& nodes) {
  for (const auto& n : nodes)
    if (m.dag.parents(n).empty()) out.add_node(n, m.domain(n), {}, m.cpt(n).rows);
}

}  // namespace detail

// X's mechanisms removed and X replaced by x everywhere. With `reattach`,
// parentless members of X come back as isolated nodes with their original law.
template <class P>
scm::BasicScm<P> build_m_prime(const scm::BasicScm<P>& m, const NodePartition& part, const Assignment& x,
                               bool reattach = true) {
  check_partition(m, part);
  detail::check_values(m, part.x, x, "x");
  auto out = detail::mutilate(m, x);
  if (reattach) detail::reattach_exogenous(m, out, part.x);
  return out;
}

inline std::string augmented(const std::string& node) { return node + augment_suffix; }

// X and Z mechanisms removed and replaced by x and z. With `augment`, every Z
// node gets a copy (named with the augmentation suffix) driven by its own
// mechanism: X parents fixed at x, Z parents bound to the copies, all other
// parents bound to the double-prime nodes.
template <class P>
scm::BasicScm<P> build_m_doubleprime(const scm::BasicScm<P>& m, const NodePartition& part, const Assignment& x,
                                     const Assignment& z, bool augment = false) {
  check_partition(m, part);
  detail::check_values(m, part.x, x, "x");
  detail::check_values(m, part.z, z, "z");
  auto out = detail::mutilate(m, merge(x, z));
  if (!augment) return out;
  detail::reattach_exogenous(m, out, part.x);
  NodeSet zs(part.z.begin(), part.z.end());
  for (const auto& n : graph::topological_order(m.dag)) {
    if (!zs.count(n)) continue;
    const std::string copy = augmented(n);
    require(!m.dag.has_node(copy), ErrorKind::invalid_argument, "augmentation name " + copy + " already in use");
    auto c = detail::fix_parents(m, n, x);
    for (auto& p : c.parents)
      if (zs.count(p)) p = augmented(p);
    out.add_node(copy, m.domain(n), c.parents, c.rows);
  }
  return out;
}

struct Condition {
  bool holds = true;
  double deviation = 0;
};

// Y independent of Z given W in the model with X set to x.
template <class P>
Condition check_c1(const scm::BasicScm<P>& m, const NodePartition& part, const Assignment& x, double tol) {
  auto mp = build_m_prime(m, part, x, false);
  if (part.z.empty()) return {};
  auto j = scm::joint_distribution(mp);
  auto ci = scm::cond_independent(j, part.y, part.z, part.w, tol);
  return {ci.independent, ci.max_deviation};
}

// In the augmented double-prime model, the law of Y given W is unchanged by
// conditioning on the copies of Z taking the value z.
template <class P>
Condition check_c2(const scm::BasicScm<P>& m, const NodePartition& part, const Assignment& x, const Assignment& z,
                   double tol) {
  auto mpp = build_m_doubleprime(m, part, x, z, true);
  if (part.z.empty()) return {};
  auto j = scm::joint_distribution(mpp);
  Probe<P> q(j, "condition C2");
  Assignment zc;
  for (const auto& [k, v] : z) zc[augmented(k)] = v;
  Condition c;
  for (const auto& w : configurations(j, part.w)) {
    if (!q.positive(merge(w, zc))) continue;
    for (const auto& y : configurations(j, part.y)) {
      double d = std::abs(to_double(q.cond(y, merge(w, zc))) - to_double(q.cond(y, w)));
      c.deviation = std::max(c.deviation, d);
    }
  }
  c.holds = c.deviation <= tol;
  return c;
}

struct RuleVerdict {
  int rule = 1;
  std::string condition;  // "C1" or "C2"
  bool condition_holds = false;
  double condition_deviation = 0;
  double identity_deviation = 0;
  bool pass = false;
};

// Rule 1: P(y | do x, z, w) = P(y | do x, w) under C1.
// Rule 2: P(y | do x, do z, w) = P(y | do x, z, w) under C2.
template <class P>
RuleVerdict verify_rule(const scm::BasicScm<P>& m, const NodePartition& part, int rule, const Assignment& x,
                        const Assignment& z, double tol) {
  require(rule == 1 || rule == 2, ErrorKind::invalid_argument, "only rules 1 and 2 are supported");
  RuleVerdict v;
  v.rule = rule;
  v.condition = rule == 1 ? "C1" : "C2";
  const Condition c = rule == 1 ? check_c1(m, part, x, tol) : check_c2(m, part, x, z, tol);
  v.condition_holds = c.holds;
  v.condition_deviation = c.deviation;
  detail::check_values(m, part.z, z, "z");

  auto jp = scm::joint_distribution(build_m_prime(m, part, x, false));
  Probe<P> qp(jp, "rule " + std::to_string(rule));
  if (!qp.positive(z)) fail(ErrorKind::zero_probability, "P(" + describe(z) + ") = 0 in the model with X set");
  std::optional<scm::BasicJointTable<P>> jpp;
  std::optional<Probe<P>> qpp;
  if (rule == 2) {
    jpp.emplace(scm::joint_distribution(build_m_doubleprime(m, part, x, z, false)));
    qpp.emplace(*jpp, "rule 2");
  }
  for (const auto& w : configurations(jp, part.w)) {
    if (!qp.positive(merge(w, z))) continue;
    for (const auto& y : configurations(jp, part.y)) {
      const double rhs = to_double(qp.cond(y, merge(w, z)));
      const double lhs = rule == 1 ? to_double(qp.cond(y, w)) : to_double(qpp->cond(y, w));
      v.identity_deviation = std::max(v.identity_deviation, std::abs(lhs - rhs));
    }
  }
  v.pass = v.condition_holds && v.identity_deviation <= tol;
  return v;
}

}  // namespace causal::docalc
