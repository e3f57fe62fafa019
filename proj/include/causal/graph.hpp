#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace causal {

// Orders identifiers so that digit runs compare numerically: X2 < X10.
struct NaturalLess {
  bool operator()(const std::string& a, const std::string& b) const {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
        std::size_t i2 = i, j2 = j;
        while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
        while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
        std::string da = a.substr(i, i2 - i), db = b.substr(j, j2 - j);
        da.erase(0, std::min(da.find_first_not_of('0'), da.size()));
        db.erase(0, std::min(db.find_first_not_of('0'), db.size()));
        if (da.size() != db.size()) return da.size() < db.size();
        if (da != db) return da < db;
        i = i2;
        j = j2;
      } else {
        if (a[i] != b[j]) return a[i] < b[j];
        ++i;
        ++j;
      }
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return a < b;
  }
};

using NodeSet = std::set<std::string, NaturalLess>;

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

inline std::string join(const NodeSet& s, const std::string& sep) {
  return join(std::vector<std::string>(s.begin(), s.end()), sep);
}

inline std::string braces(const NodeSet& s) { return "{" + join(s, ",") + "}"; }

namespace graph {

class Dag {
 public:
  Dag() = default;

  Dag(std::initializer_list<std::pair<std::string, std::string>> edges) {
    for (const auto& [a, b] : edges) add_edge(a, b);
  }

  void add_node(const std::string& id) {
    require(!id.empty(), ErrorKind::invalid_argument, "empty node identifier");
    nodes_.try_emplace(id);
  }

  void add_edge(const std::string& from, const std::string& to) {
    require(from != to, ErrorKind::invalid_argument, "self-loop on " + from);
    add_node(from);
    add_node(to);
    require(!nodes_[from].children.count(to), ErrorKind::invalid_argument,
            "parallel edge " + from + "->" + to);
    nodes_[from].children.insert(to);
    nodes_[to].parents.insert(from);
  }

  void remove_edge(const std::string& from, const std::string& to) {
    check(from);
    check(to);
    nodes_[from].children.erase(to);
    nodes_[to].parents.erase(from);
  }

  void remove_node(const std::string& id) {
    check(id);
    for (const auto& p : nodes_[id].parents) nodes_[p].children.erase(id);
    for (const auto& c : nodes_[id].children) nodes_[c].parents.erase(id);
    nodes_.erase(id);
  }

  bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }
  bool has_edge(const std::string& from, const std::string& to) const {
    auto it = nodes_.find(from);
    return it != nodes_.end() && it->second.children.count(to) > 0;
  }

  NodeSet nodes() const {
    NodeSet s;
    for (const auto& [k, _] : nodes_) s.insert(k);
    return s;
  }
  std::size_t size() const { return nodes_.size(); }

  const NodeSet& parents(const std::string& id) const { return at(id).parents; }
  const NodeSet& children(const std::string& id) const { return at(id).children; }

  std::vector<std::pair<std::string, std::string>> edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, n] : nodes_)
      for (const auto& c : n.children) out.emplace_back(k, c);
    return out;
  }

  void check(const std::string& id) const {
    require(has_node(id), ErrorKind::invalid_argument, "unknown node " + id);
  }

 private:
  struct Adj {
    NodeSet parents, children;
  };
  const Adj& at(const std::string& id) const {
    auto it = nodes_.find(id);
    require(it != nodes_.end(), ErrorKind::invalid_argument, "unknown node " + id);
    return it->second;
  }
  std::map<std::string, Adj, NaturalLess> nodes_;
};

// Kahn's algorithm with a sorted frontier, so the result is unique.
inline std::vector<std::string> topological_order(const Dag& dag) {
  std::map<std::string, std::size_t, NaturalLess> indeg;
  NodeSet ready;
  for (const auto& n : dag.nodes()) {
    indeg[n] = dag.parents(n).size();
    if (indeg[n] == 0) ready.insert(n);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string n = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(n);
    for (const auto& c : dag.children(n))
      if (--indeg[c] == 0) ready.insert(c);
  }
  if (order.size() == dag.size()) return order;

  // Walk parents among the leftover nodes until one repeats: that is a cycle.
  NodeSet left;
  for (const auto& [n, d] : indeg)
    if (d > 0) left.insert(n);
  std::vector<std::string> walk{*left.begin()};
  std::map<std::string, std::size_t> seen{{walk[0], 0}};
  while (true) {
    std::string next;
    for (const auto& p : dag.parents(walk.back()))
      if (left.count(p)) {
        next = p;
        break;
      }
    if (auto it = seen.find(next); it != seen.end()) {
      std::vector<std::string> cyc(walk.begin() + static_cast<std::ptrdiff_t>(it->second), walk.end());
      std::reverse(cyc.begin(), cyc.end());
      cyc.push_back(cyc.front());
      fail(ErrorKind::cyclic_graph, "cycle " + join(cyc, "->"));
    }
    seen[next] = walk.size();
    walk.push_back(next);
  }
}

inline NodeSet descendants(const Dag& dag, const std::string& node) {
  dag.check(node);
  NodeSet out;
  std::vector<std::string> stack{node};
  while (!stack.empty()) {
    std::string n = stack.back();
    stack.pop_back();
    for (const auto& c : dag.children(n))
      if (out.insert(c).second) stack.push_back(c);
  }
  out.erase(node);
  return out;
}

inline NodeSet ancestors(const Dag& dag, const std::string& node) {
  dag.check(node);
  NodeSet out;
  std::vector<std::string> stack{node};
  while (!stack.empty()) {
    std::string n = stack.back();
    stack.pop_back();
    for (const auto& p : dag.parents(n))
      if (out.insert(p).second) stack.push_back(p);
  }
  out.erase(node);
  return out;
}

// forward[i] is true when the step nodes[i] -> nodes[i+1] follows the edge.
struct Path {
  std::vector<std::string> nodes;
  std::vector<bool> forward;

  std::string str() const {
    std::string s = nodes.empty() ? "" : nodes[0];
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) s += (forward[i] ? " -> " : " <- ") + nodes[i + 1];
    return s;
  }
  bool operator==(const Path&) const = default;

  // Interior node i (0 < i < size-1) is a collider when both adjacent arrows point at it.
  bool collider(std::size_t i) const { return forward[i - 1] && !forward[i]; }
};

inline bool path_less(const Path& a, const Path& b) {
  if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
  NaturalLess lt;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (lt(a.nodes[i], b.nodes[i])) return true;
    if (lt(b.nodes[i], a.nodes[i])) return false;
  }
  return a.forward < b.forward;
}

constexpr std::size_t default_path_cap = 100000;

// Simple paths from t to r that start with an arrow into t and end with an
// arrow into r.
inline std::vector<Path> backdoor_paths(const Dag& dag, const std::string& t, const std::string& r,
                                        std::size_t cap = default_path_cap) {
  dag.check(t);
  dag.check(r);
  require(t != r, ErrorKind::invalid_argument, "treatment and response are the same node " + t);
  std::vector<Path> out;
  Path cur{{t}, {}};
  NodeSet on_path{t};

  std::function<void(const std::string&)> extend = [&](const std::string& n) {
    auto step = [&](const std::string& m, bool fwd) {
      if (on_path.count(m)) return;
      if (m == r) {
        if (!fwd) return;
        Path p = cur;
        p.nodes.push_back(m);
        p.forward.push_back(true);
        out.push_back(std::move(p));
        if (out.size() > cap)
          fail(ErrorKind::resource_limit, "more than " + std::to_string(cap) + " back-door paths");
        return;
      }
      cur.nodes.push_back(m);
      cur.forward.push_back(fwd);
      on_path.insert(m);
      extend(m);
      on_path.erase(m);
      cur.nodes.pop_back();
      cur.forward.pop_back();
    };
    if (n == t) {
      for (const auto& p : dag.parents(n)) step(p, false);
      return;
    }
    for (const auto& p : dag.parents(n)) step(p, false);
    for (const auto& c : dag.children(n)) step(c, true);
  };
  extend(t);
  std::sort(out.begin(), out.end(), path_less);
  return out;
}

enum class Verdict { satisfies_i, satisfies_ii, violates };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfies_i: return "satisfies-(i)";
    case Verdict::satisfies_ii: return "satisfies-(ii)";
    case Verdict::violates: return "violates";
  }
  return "?";
}

struct PathVerdict {
  Path path;
  Verdict verdict;
  std::string witness;  // the blocking node or collider; empty on violation
};

struct BackdoorReport {
  std::string treatment, response;
  NodeSet adjust;
  bool valid = true;
  std::vector<PathVerdict> paths;
  std::vector<std::string> warnings;

  std::vector<Path> violating() const {
    std::vector<Path> v;
    for (const auto& p : paths)
      if (p.verdict == Verdict::violates) v.push_back(p.path);
    return v;
  }
};

namespace detail {

using DescMap = std::map<std::string, NodeSet, NaturalLess>;

inline PathVerdict judge(const Path& p, const NodeSet& z, const std::function<const NodeSet&(const std::string&)>& desc) {
  const std::size_t n = p.nodes.size();
  // (i): a conditioned node on the path points an arrow along it.
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (z.count(p.nodes[i]) && !p.collider(i)) return {p, Verdict::satisfies_i, p.nodes[i]};
  // (ii): no conditioned node points an arrow, and some collider has
  // neither itself nor a descendant conditioned on.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!p.collider(i)) continue;
    const auto& c = p.nodes[i];
    if (z.count(c)) continue;
    bool hit = false;
    for (const auto& d : desc(c))
      if (z.count(d)) {
        hit = true;
        break;
      }
    if (!hit) return {p, Verdict::satisfies_ii, c};
  }
  return {p, Verdict::violates, ""};
}

inline BackdoorReport run_criterion(const Dag& dag, const std::string& t, const std::string& r, const NodeSet& z,
                                    const std::vector<Path>& paths) {
  DescMap cache;
  auto desc = [&](const std::string& n) -> const NodeSet& {
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, descendants(dag, n)).first;
    return it->second;
  };
  BackdoorReport rep;
  rep.treatment = t;
  rep.response = r;
  rep.adjust = z;
  for (const auto& p : paths) {
    rep.paths.push_back(judge(p, z, desc));
    if (rep.paths.back().verdict == Verdict::violates) rep.valid = false;
  }
  return rep;
}

}  // namespace detail

inline BackdoorReport check_backdoor(const Dag& dag, const std::string& t, const std::string& r, const NodeSet& z,
                                     std::size_t cap = default_path_cap) {
  dag.check(t);
  dag.check(r);
  require(t != r, ErrorKind::invalid_argument, "treatment and response are the same node " + t);
  for (const auto& n : z) dag.check(n);
  require(!z.count(t) && !z.count(r), ErrorKind::invalid_argument,
          "adjustment set " + braces(z) + " contains the treatment or the response");
  NodeSet dt = descendants(dag, t);
  for (const auto& n : z)
    if (dt.count(n))
      fail(ErrorKind::routed_to_extended,
           n + " is a descendant of " + t + "; use the extended check with it as a descendant member");
  return detail::run_criterion(dag, t, r, z, backdoor_paths(dag, t, r, cap));
}

namespace detail {

inline bool directed_path_avoiding(const Dag& dag, const std::string& from, const std::string& to,
                                   const NodeSet& blocked) {
  NodeSet seen{from};
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    std::string n = stack.back();
    stack.pop_back();
    for (const auto& c : dag.children(n)) {
      if (c == to) return true;
      if (blocked.count(c) || !seen.insert(c).second) continue;
      stack.push_back(c);
    }
  }
  return false;
}

}  // namespace detail

// Conditioning on descendants of t: those nodes are folded together with t
// into one pseudo-treatment node that inherits every incoming arrow of the
// merged nodes and every outgoing arrow to the rest of the graph.
inline Dag merge_pseudo_treatment(const Dag& dag, const std::string& t, const NodeSet& z_desc,
                                  const std::string& pseudo) {
  NodeSet merged = z_desc;
  merged.insert(t);
  Dag g;
  for (const auto& n : dag.nodes())
    if (!merged.count(n)) g.add_node(n);
  g.add_node(pseudo);
  for (const auto& [a, b] : dag.edges()) {
    bool ma = merged.count(a) > 0, mb = merged.count(b) > 0;
    if (ma && mb) continue;
    std::string a2 = ma ? pseudo : a, b2 = mb ? pseudo : b;
    if (!g.has_edge(a2, b2)) g.add_edge(a2, b2);
  }
  for (const auto& n : g.parents(pseudo))
    if (g.children(pseudo).count(n))
      fail(ErrorKind::invalid_argument, "merging " + braces(merged) + " creates a cycle through " + n +
                                            "; intermediate descendants must be conditioned on as well");
  topological_order(g);
  return g;
}

inline BackdoorReport check_backdoor_extended(const Dag& dag, const std::string& t, const std::string& r,
                                              const NodeSet& z_desc, const NodeSet& z_nondesc,
                                              std::size_t cap = default_path_cap) {
  dag.check(t);
  dag.check(r);
  require(t != r, ErrorKind::invalid_argument, "treatment and response are the same node " + t);
  NodeSet dt = descendants(dag, t);
  for (const auto& n : z_desc) {
    dag.check(n);
    require(dt.count(n) > 0, ErrorKind::invalid_argument, n + " is not a descendant of " + t);
    require(n != r, ErrorKind::invalid_argument, "the response cannot be conditioned on");
  }
  for (const auto& n : z_nondesc) {
    dag.check(n);
    require(!dt.count(n), ErrorKind::invalid_argument, n + " is a descendant of " + t);
  }
  if (z_desc.empty()) return check_backdoor(dag, t, r, z_nondesc, cap);

  const std::string pseudo = t + "*";
  require(!dag.has_node(pseudo), ErrorKind::invalid_argument, "node name " + pseudo + " is reserved");
  Dag g = merge_pseudo_treatment(dag, t, z_desc, pseudo);
  BackdoorReport rep = detail::run_criterion(g, pseudo, r, z_nondesc, backdoor_paths(g, pseudo, r, cap));
  rep.treatment = t;
  NodeSet all = z_nondesc;
  all.insert(z_desc.begin(), z_desc.end());
  rep.adjust = all;

  // Members of z_desc lying on a directed t -> r path hold part of the effect fixed.
  NodeSet on_path;
  NodeSet anc_r = ancestors(dag, r);
  for (const auto& n : z_desc)
    if (anc_r.count(n)) on_path.insert(n);
  if (!on_path.empty()) {
    if (detail::directed_path_avoiding(dag, t, r, z_desc))
      rep.warnings.push_back("effect of " + t + " on " + r + " partly overruled by conditioning on " +
                             braces(on_path));
    else
      rep.warnings.push_back("effect of " + t + " on " + r + " completely overruled by conditioning on " +
                             braces(on_path) + ": the resulting law no longer involves " + t);
  }
  return rep;
}

constexpr std::size_t max_adjustment_candidates = 20;

inline std::vector<NodeSet> enumerate_valid_adjustment_sets(const Dag& dag, const std::string& t,
                                                            const std::string& r, const NodeSet& candidates,
                                                            std::size_t cap = default_path_cap) {
  dag.check(t);
  dag.check(r);
  require(t != r, ErrorKind::invalid_argument, "treatment and response are the same node " + t);
  if (candidates.size() > max_adjustment_candidates)
    fail(ErrorKind::resource_limit, "at most " + std::to_string(max_adjustment_candidates) +
                                        " candidates, got " + std::to_string(candidates.size()));
  NodeSet dt = descendants(dag, t);
  for (const auto& n : candidates) {
    dag.check(n);
    require(n != t && n != r && !dt.count(n), ErrorKind::invalid_argument,
            "candidate " + n + " is the treatment, the response or a descendant of the treatment");
  }
  std::vector<std::string> cand(candidates.begin(), candidates.end());
  const std::size_t k = cand.size();
  auto paths = backdoor_paths(dag, t, r, cap);

  std::vector<std::uint32_t> masks(std::size_t(1) << k);
  for (std::uint32_t m = 0; m < masks.size(); ++m) masks[m] = m;
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return __builtin_popcount(a) < __builtin_popcount(b); });

  std::vector<std::uint32_t> minimal;
  for (auto m : masks) {
    bool covered = false;
    for (auto s : minimal)
      if ((s & m) == s) {
        covered = true;
        break;
      }
    if (covered) continue;
    NodeSet z;
    for (std::size_t i = 0; i < k; ++i)
      if (m >> i & 1u) z.insert(cand[i]);
    if (detail::run_criterion(dag, t, r, z, paths).valid) minimal.push_back(m);
  }
  std::vector<NodeSet> out;
  for (auto m : minimal) {
    NodeSet z;
    for (std::size_t i = 0; i < k; ++i)
      if (m >> i & 1u) z.insert(cand[i]);
    out.push_back(z);
  }
  return out;
}

}  // namespace graph
}  // namespace causal
