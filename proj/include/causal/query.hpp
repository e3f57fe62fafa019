#pragma once

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graph.hpp"
#include "scm.hpp"

namespace causal {

// Distribution of a single node.
template <class P>
struct BasicPmf {
  std::string node;
  Domain domain;
  std::vector<P> probs;

  P mean() const {
    P m = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) m += P(domain.values[i]) * probs[i];
    return m;
  }
  P at(Value v) const {
    auto i = domain.index_of(v);
    require(i.has_value(), ErrorKind::invalid_argument, "value " + std::to_string(v) + " outside the domain of " + node);
    return probs[*i];
  }
};

using Pmf = BasicPmf<double>;

template <class P>
BasicPmf<P> pmf_of(const scm::BasicJointTable<P>& t) {
  require(t.nodes.size() == 1, ErrorKind::invalid_argument, "expected a table over one node");
  return {t.nodes[0], t.domains[0], t.probs};
}

template <class P>
double total_variation(const BasicPmf<P>& a, const BasicPmf<P>& b) {
  require(a.probs.size() == b.probs.size(), ErrorKind::invalid_argument, "distributions over different domains");
  double s = 0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) s += std::abs(to_double(a.probs[i]) - to_double(b.probs[i]));
  return s / 2;
}

// Cached marginal lookups over one joint table, with the positivity checks
// every identification formula needs.
template <class P>
class Probe {
 public:
  Probe(const scm::BasicJointTable<P>& j, std::string formula) : j_(j), formula_(std::move(formula)) {}

  const Domain& domain(const std::string& n) const { return j_.domain(n); }
  const std::vector<Value>& values(const std::string& n) const { return j_.domain(n).values; }

  P p(const Assignment& ev) const {
    if (ev.empty()) return P(1);
    std::vector<std::string> key;
    for (const auto& [k, _] : ev) key.push_back(k);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, scm::marginal(j_, key)).first;
    return it->second.at(ev);
  }

  bool positive(const Assignment& ev) const { return !negligible(p(ev)); }

  // P(target | given); the conditioning event must have positive mass.
  P cond(const Assignment& target, const Assignment& given) const {
    P pg = p(given);
    if (negligible(pg)) fail(ErrorKind::positivity, "P(" + describe(given) + ") = 0 in " + formula_);
    Assignment both = given;
    for (const auto& [k, v] : target) {
      require(!given.count(k), ErrorKind::invalid_argument, "node " + k + " on both sides of a conditional");
      both[k] = v;
    }
    return p(both) / pg;
  }

  P expect(const std::string& node, const Assignment& given) const {
    P e = 0;
    for (Value v : values(node)) e += P(v) * cond({{node, v}}, given);
    return e;
  }

  const std::string& formula() const { return formula_; }

 private:
  const scm::BasicJointTable<P>& j_;
  std::string formula_;
  mutable std::map<std::vector<std::string>, scm::BasicJointTable<P>> cache_;
};

// Every configuration of the listed nodes, as assignments.
inline std::vector<Assignment> configurations(const std::vector<std::string>& nodes,
                                              const std::vector<const Domain*>& doms) {
  std::vector<Assignment> out{{}};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::vector<Assignment> next;
    for (const auto& a : out)
      for (Value v : doms[i]->values) {
        Assignment b = a;
        b[nodes[i]] = v;
        next.push_back(std::move(b));
      }
    out = std::move(next);
  }
  return out;
}

template <class P>
std::vector<Assignment> configurations(const scm::BasicJointTable<P>& j, const std::vector<std::string>& nodes) {
  std::vector<const Domain*> d;
  for (const auto& n : nodes) d.push_back(&j.domain(n));
  return configurations(nodes, d);
}

inline Assignment merge(Assignment a, const Assignment& b) {
  for (const auto& [k, v] : b) a[k] = v;
  return a;
}

// Checks that the graph is a subgraph of a fixed template once role nodes
// are bound and the remaining (latent) nodes are matched to the template's
// latent names in some order.
struct Template {
  std::string name;
  std::vector<std::string> roles;
  std::vector<std::string> latents;
  std::vector<std::pair<std::string, std::string>> edges;
};

inline void match_template(const graph::Dag& dag, const Template& tpl, const std::map<std::string, std::string>& binding) {
  std::map<std::string, std::string> inv;  // node -> template name
  for (const auto& role : tpl.roles) {
    auto it = binding.find(role);
    require(it != binding.end(), ErrorKind::invalid_argument, "role " + role + " is not bound");
    require(dag.has_node(it->second), ErrorKind::invalid_argument,
            "role " + role + " bound to unknown node " + it->second);
    require(!inv.count(it->second), ErrorKind::invalid_argument, "node " + it->second + " bound to two roles");
    inv[it->second] = role;
  }
  std::vector<std::string> free;
  for (const auto& n : dag.nodes())
    if (!inv.count(n)) free.push_back(n);
  if (free.size() > tpl.latents.size())
    fail(ErrorKind::structure, "model does not have the " + tpl.name + " structure: unexpected nodes beyond " +
                                   std::to_string(tpl.latents.size()) + " latent ones");
  std::set<std::pair<std::string, std::string>> allowed(tpl.edges.begin(), tpl.edges.end());
  std::vector<std::size_t> perm(tpl.latents.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::string first_bad;
  do {
    auto name = [&](const std::string& n) -> std::string {
      auto it = inv.find(n);
      if (it != inv.end()) return it->second;
      for (std::size_t i = 0; i < free.size(); ++i)
        if (free[i] == n) return tpl.latents[perm[i]];
      return n;
    };
    bool ok = true;
    for (const auto& [a, b] : dag.edges())
      if (!allowed.count({name(a), name(b)})) {
        ok = false;
        if (first_bad.empty()) first_bad = a + "->" + b;
        break;
      }
    if (ok) return;
  } while (std::next_permutation(perm.begin(), perm.end()));
  fail(ErrorKind::structure, "model does not have the " + tpl.name + " structure: edge " + first_bad + " not allowed");
}

}  // namespace causal
