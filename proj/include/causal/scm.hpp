#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "error.hpp"
#include "exogenous.hpp"
#include "graph.hpp"

namespace causal {

using Value = long long;
using Rational = boost::multiprecision::cpp_rational;

// Numeric view of a probability, whatever its representation.
template <class P>
double to_double(const P& p) {
  if constexpr (std::is_floating_point_v<P>)
    return static_cast<double>(p);
  else
    return p.template convert_to<double>();
}

// Conditioning events below this mass are treated as impossible.
constexpr double positivity_floor = 1e-15;

template <class P>
bool negligible(const P& p) {
  if constexpr (std::is_floating_point_v<P>)
    return p < positivity_floor;
  else
    return p <= 0;
}

struct Domain {
  std::vector<Value> values;
  std::vector<std::string> labels;  // optional display names, parallel to values

  Domain() = default;
  Domain(std::initializer_list<Value> v) : values(v) {}
  explicit Domain(std::vector<Value> v) : values(std::move(v)) {}

  static Domain range(std::size_t n) {
    Domain d;
    for (std::size_t i = 0; i < n; ++i) d.values.push_back(static_cast<Value>(i));
    return d;
  }
  static Domain labelled(std::vector<std::string> names) {
    Domain d = range(names.size());
    d.labels = std::move(names);
    return d;
  }

  std::size_t size() const { return values.size(); }

  std::optional<std::size_t> index_of(Value v) const {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] == v) return i;
    return std::nullopt;
  }

  std::string label(std::size_t i) const { return labels.empty() ? std::to_string(values[i]) : labels[i]; }

  // Accepts a label or an integer value.
  std::optional<std::size_t> parse(const std::string& s) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == s) return i;
    try {
      std::size_t used = 0;
      Value v = std::stoll(s, &used);
      if (used == s.size()) return index_of(v);
    } catch (const std::exception&) {
    }
    return std::nullopt;
  }

  bool operator==(const Domain&) const = default;
};

using Assignment = std::map<std::string, Value, NaturalLess>;
using Intervention = Assignment;

inline std::string describe(const Assignment& a) {
  std::string s;
  for (const auto& [k, v] : a) {
    if (!s.empty()) s += ", ";
    s += k + "=" + std::to_string(v);
  }
  return s.empty() ? "(empty event)" : s;
}

namespace scm {

// Rows are indexed by the mixed-radix number formed from the parents' value
// indices in declared order, the last parent varying fastest.
template <class P>
struct BasicCpt {
  std::vector<std::string> parents;
  std::vector<std::vector<P>> rows;
};

template <class P>
struct BasicScm {
  graph::Dag dag;
  std::map<std::string, Domain, NaturalLess> domains;
  std::map<std::string, BasicCpt<P>, NaturalLess> cpts;
  std::string name;
  std::string description;

  void add_node(const std::string& id, Domain d, std::vector<std::string> parents, std::vector<std::vector<P>> rows) {
    dag.add_node(id);
    for (const auto& p : parents) dag.add_edge(p, id);
    domains[id] = std::move(d);
    cpts[id] = BasicCpt<P>{std::move(parents), std::move(rows)};
  }

  const Domain& domain(const std::string& id) const {
    auto it = domains.find(id);
    require(it != domains.end(), ErrorKind::invalid_argument, "unknown node " + id);
    return it->second;
  }
  const BasicCpt<P>& cpt(const std::string& id) const {
    auto it = cpts.find(id);
    require(it != cpts.end(), ErrorKind::invalid_argument, "unknown node " + id);
    return it->second;
  }
  BasicCpt<P>& cpt(const std::string& id) {
    auto it = cpts.find(id);
    require(it != cpts.end(), ErrorKind::invalid_argument, "unknown node " + id);
    return it->second;
  }
  std::size_t row_count(const std::string& id) const {
    std::size_t n = 1;
    for (const auto& p : cpt(id).parents) n *= domain(p).size();
    return n;
  }
};

using Cpt = BasicCpt<double>;
using Scm = BasicScm<double>;
using RationalScm = BasicScm<Rational>;

template <class P>
std::string row_key(const BasicScm<P>& m, const std::string& node, std::size_t row) {
  const auto& ps = m.cpt(node).parents;
  std::vector<std::string> parts(ps.size());
  for (std::size_t i = ps.size(); i-- > 0;) {
    const Domain& d = m.domain(ps[i]);
    parts[i] = d.label(row % d.size());
    row /= d.size();
  }
  return join(parts, "|");
}

template <class P>
std::vector<std::string> validate_scm(const BasicScm<P>& m) {
  std::vector<std::string> errs;
  try {
    graph::topological_order(m.dag);
  } catch (const Error& e) {
    errs.push_back(e.what());
  }
  for (const auto& n : m.dag.nodes()) {
    if (!m.domains.count(n)) errs.push_back("node " + n + " has no domain");
    if (!m.cpts.count(n)) errs.push_back("node " + n + " has no table");
  }
  for (const auto& [n, d] : m.domains) {
    if (!m.dag.has_node(n)) errs.push_back("domain declared for unknown node " + n);
    if (d.values.empty()) errs.push_back("node " + n + " has an empty domain");
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j)
        if (d.values[i] == d.values[j]) errs.push_back("node " + n + " has repeated domain value");
    if (!d.labels.empty() && d.labels.size() != d.size()) errs.push_back("node " + n + " has mismatched labels");
  }
  for (const auto& [n, c] : m.cpts) {
    if (!m.dag.has_node(n)) {
      errs.push_back("table declared for unknown node " + n);
      continue;
    }
    NodeSet declared;
    bool parents_ok = true;
    for (const auto& p : c.parents) {
      if (!declared.insert(p).second) errs.push_back("structure violation: table of " + n + " repeats parent " + p);
      if (!m.dag.has_node(p) || !m.dag.parents(n).count(p)) {
        errs.push_back("structure violation: table of " + n + " references " + p + ", which is not a parent of " + n);
        parents_ok = false;
      }
      if (!m.domains.count(p)) parents_ok = false;
    }
    for (const auto& p : m.dag.parents(n))
      if (!declared.count(p)) {
        errs.push_back("structure violation: table of " + n + " omits parent " + p);
        parents_ok = false;
      }
    if (!parents_ok || !m.domains.count(n)) continue;
    const std::size_t want = m.row_count(n);
    const std::size_t width = m.domains.at(n).size();
    if (c.rows.size() != want) {
      errs.push_back("table of " + n + " has " + std::to_string(c.rows.size()) + " rows, expected " +
                     std::to_string(want));
      continue;
    }
    for (std::size_t r = 0; r < want; ++r) {
      const auto& row = c.rows[r];
      std::string where = "node " + n + " row '" + row_key(m, n, r) + "'";
      if (row.size() != width) {
        errs.push_back(where + " has " + std::to_string(row.size()) + " entries, expected " + std::to_string(width));
        continue;
      }
      P sum = 0;
      bool neg = false;
      for (const auto& p : row) {
        if (p < 0) neg = true;
        sum += p;
      }
      if (neg) errs.push_back("normalization violation: " + where + " has a negative entry");
      bool ok;
      if constexpr (std::is_floating_point_v<P>)
        ok = std::abs(sum - 1.0) <= 1e-12;
      else
        ok = (sum == 1);
      if (!ok) {
        std::ostringstream os;
        os.precision(17);
        os << "normalization violation: " << where << " sums to " << to_double(sum);
        errs.push_back(os.str());
      }
    }
  }
  return errs;
}

template <class P>
void ensure_valid(const BasicScm<P>& m) {
  auto errs = validate_scm(m);
  if (!errs.empty()) fail(ErrorKind::invalid_argument, "invalid model: " + join(errs, "; "));
}

// A probability table over a list of nodes, stored densely with the last
// node varying fastest.
template <class P>
struct BasicJointTable {
  std::vector<std::string> nodes;
  std::vector<Domain> domains;
  std::vector<P> probs;

  BasicJointTable() = default;
  BasicJointTable(std::vector<std::string> n, std::vector<Domain> d) : nodes(std::move(n)), domains(std::move(d)) {
    std::size_t total = 1;
    for (const auto& x : domains) total *= x.size();
    probs.assign(total, P(0));
  }

  std::size_t size() const { return probs.size(); }

  std::optional<std::size_t> position(const std::string& node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == node) return i;
    return std::nullopt;
  }
  std::size_t pos(const std::string& node) const {
    auto p = position(node);
    require(p.has_value(), ErrorKind::invalid_argument, "node " + node + " not in table");
    return *p;
  }
  const Domain& domain(const std::string& node) const { return domains[pos(node)]; }

  std::vector<std::size_t> config(std::size_t flat) const {
    std::vector<std::size_t> c(nodes.size());
    for (std::size_t i = nodes.size(); i-- > 0;) {
      c[i] = flat % domains[i].size();
      flat /= domains[i].size();
    }
    return c;
  }
  std::size_t flat(const std::vector<std::size_t>& c) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) f = f * domains[i].size() + c[i];
    return f;
  }
  Value value(std::size_t node_pos, std::size_t idx) const { return domains[node_pos].values[idx]; }

  // Probability of a full configuration given by values.
  P at(const Assignment& a) const {
    std::vector<std::size_t> c(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto it = a.find(nodes[i]);
      require(it != a.end(), ErrorKind::invalid_argument, "configuration misses node " + nodes[i]);
      auto k = domains[i].index_of(it->second);
      require(k.has_value(), ErrorKind::invalid_argument,
              "value " + std::to_string(it->second) + " outside the domain of " + nodes[i]);
      c[i] = *k;
    }
    return probs[flat(c)];
  }

  P total() const {
    P s = 0;
    for (const auto& p : probs) s += p;
    return s;
  }
};

using JointTable = BasicJointTable<double>;
using RationalJointTable = BasicJointTable<Rational>;

constexpr std::size_t max_joint_configs = 10'000'000;

template <class P>
BasicJointTable<P> joint_distribution(const BasicScm<P>& m, std::size_t max_configs = max_joint_configs) {
  ensure_valid(m);
  auto order = graph::topological_order(m.dag);
  std::vector<Domain> doms;
  long double count = 1;
  for (const auto& n : order) {
    doms.push_back(m.domain(n));
    count *= static_cast<long double>(doms.back().size());
  }
  if (count > static_cast<long double>(max_configs))
    fail(ErrorKind::resource_limit, "joint has " + std::to_string(static_cast<double>(count)) +
                                        " configurations, limit " + std::to_string(max_configs));
  BasicJointTable<P> out(order, doms);
  const std::size_t k = order.size();
  std::vector<std::vector<std::size_t>> ppos(k);
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& p : m.cpt(order[i]).parents) {
      for (std::size_t j = 0; j < i; ++j)
        if (order[j] == p) ppos[i].push_back(j);
    }
  std::vector<const BasicCpt<P>*> cpts(k);
  for (std::size_t i = 0; i < k; ++i) cpts[i] = &m.cpt(order[i]);

  std::vector<std::size_t> cur(k);
  std::function<void(std::size_t, std::size_t, const P&)> rec = [&](std::size_t i, std::size_t flat, const P& acc) {
    if (i == k) {
      out.probs[flat] = acc;
      return;
    }
    std::size_t row = 0;
    for (auto j : ppos[i]) row = row * doms[j].size() + cur[j];
    const auto& pr = cpts[i]->rows[row];
    for (std::size_t v = 0; v < doms[i].size(); ++v) {
      if (pr[v] == 0) continue;
      cur[i] = v;
      rec(i + 1, flat * doms[i].size() + v, acc * pr[v]);
    }
  };
  rec(0, 0, P(1));
  return out;
}

// Marginal over `keep`, in the order given.
template <class P>
BasicJointTable<P> marginal(const BasicJointTable<P>& j, const std::vector<std::string>& keep) {
  std::vector<std::size_t> idx;
  std::vector<Domain> doms;
  for (const auto& n : keep) {
    for (auto i : idx)
      require(j.nodes[i] != n, ErrorKind::invalid_argument, "node " + n + " listed twice");
    idx.push_back(j.pos(n));
    doms.push_back(j.domains[idx.back()]);
  }
  BasicJointTable<P> out(keep, doms);
  const std::size_t k = j.nodes.size();
  std::vector<std::size_t> c(k, 0);
  for (std::size_t f = 0; f < j.probs.size(); ++f) {
    if (j.probs[f] != 0) {
      std::size_t g = 0;
      for (std::size_t a = 0; a < idx.size(); ++a) g = g * doms[a].size() + c[idx[a]];
      out.probs[g] += j.probs[f];
    }
    for (std::size_t i = k; i-- > 0;) {
      if (++c[i] < j.domains[i].size()) break;
      c[i] = 0;
    }
  }
  return out;
}

// Exact conditional law of `targets` given the event `given`.
template <class P>
BasicJointTable<P> restrict(const BasicJointTable<P>& j, const std::vector<std::string>& targets,
                            const Assignment& given) {
  for (const auto& t : targets)
    require(!given.count(t), ErrorKind::invalid_argument, "node " + t + " is both a target and conditioned on");
  std::vector<std::string> all = targets;
  for (const auto& [k, _] : given) all.push_back(k);
  auto m = marginal(j, all);
  std::vector<std::size_t> gidx;
  for (const auto& [k, v] : given) {
    auto i = m.domain(k).index_of(v);
    require(i.has_value(), ErrorKind::invalid_argument, "value " + std::to_string(v) + " outside the domain of " + k);
    gidx.push_back(*i);
  }
  std::vector<Domain> tdoms(m.domains.begin(), m.domains.begin() + static_cast<std::ptrdiff_t>(targets.size()));
  BasicJointTable<P> out(targets, tdoms);
  std::size_t gsize = 1;
  for (std::size_t i = targets.size(); i < all.size(); ++i) gsize *= m.domains[i].size();
  std::size_t goff = 0;
  for (std::size_t i = 0; i < gidx.size(); ++i) goff = goff * m.domains[targets.size() + i].size() + gidx[i];
  P norm = 0;
  for (std::size_t t = 0; t < out.probs.size(); ++t) {
    out.probs[t] = m.probs[t * gsize + goff];
    norm += out.probs[t];
  }
  if (negligible(norm)) fail(ErrorKind::zero_probability, "conditioning on zero-probability event " + describe(given));
  for (auto& p : out.probs) p /= norm;
  return out;
}

template <class P>
P probability(const BasicJointTable<P>& j, const Assignment& event) {
  std::vector<std::string> ns;
  for (const auto& [k, _] : event) ns.push_back(k);
  return marginal(j, ns).at(event);
}

template <class P>
BasicScm<P> intervene(const BasicScm<P>& m, const Intervention& iv) {
  BasicScm<P> out = m;
  for (const auto& [node, v] : iv) {
    require(m.dag.has_node(node), ErrorKind::invalid_argument, "cannot intervene on unknown node " + node);
    auto idx = m.domain(node).index_of(v);
    require(idx.has_value(), ErrorKind::invalid_argument,
            "intervention value " + std::to_string(v) + " outside the domain of " + node);
    for (const auto& p : NodeSet(out.dag.parents(node))) out.dag.remove_edge(p, node);
    std::vector<P> row(m.domain(node).size(), P(0));
    row[*idx] = 1;
    out.cpts[node] = BasicCpt<P>{{}, {row}};
  }
  return out;
}

template <class P>
double total_variation(const BasicJointTable<P>& a, const BasicJointTable<P>& b) {
  require(a.nodes.size() == b.nodes.size(), ErrorKind::invalid_argument, "tables over different nodes");
  const auto bb = marginal(b, a.nodes);
  require(a.domains == bb.domains, ErrorKind::invalid_argument, "tables over different domains");
  double s = 0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) s += std::abs(to_double(a.probs[i]) - to_double(bb.probs[i]));
  return s / 2;
}

struct CiResult {
  bool independent = true;
  double max_deviation = 0;
};

template <class P>
CiResult cond_independent(const BasicJointTable<P>& j, const std::vector<std::string>& a,
                          const std::vector<std::string>& b, const std::vector<std::string>& c, double tol) {
  NodeSet seen;
  for (const auto* s : {&a, &b, &c})
    for (const auto& n : *s) {
      j.pos(n);
      require(seen.insert(n).second, ErrorKind::invalid_argument, "node " + n + " appears in more than one set");
    }
  std::vector<std::string> all = c;
  all.insert(all.end(), a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  auto m = marginal(j, all);
  std::size_t nc = 1, na = 1, nb = 1;
  for (std::size_t i = 0; i < c.size(); ++i) nc *= m.domains[i].size();
  for (std::size_t i = 0; i < a.size(); ++i) na *= m.domains[c.size() + i].size();
  for (std::size_t i = 0; i < b.size(); ++i) nb *= m.domains[c.size() + a.size() + i].size();
  CiResult res;
  std::vector<double> pa(na), pb(nb);
  for (std::size_t ci = 0; ci < nc; ++ci) {
    double pc = 0;
    std::fill(pa.begin(), pa.end(), 0.0);
    std::fill(pb.begin(), pb.end(), 0.0);
    for (std::size_t ai = 0; ai < na; ++ai)
      for (std::size_t bi = 0; bi < nb; ++bi) {
        double p = to_double(m.probs[(ci * na + ai) * nb + bi]);
        pc += p;
        pa[ai] += p;
        pb[bi] += p;
      }
    if (pc < positivity_floor) continue;
    for (std::size_t ai = 0; ai < na; ++ai)
      for (std::size_t bi = 0; bi < nb; ++bi) {
        double pab = to_double(m.probs[(ci * na + ai) * nb + bi]) / pc;
        double dev = std::abs(pab - (pa[ai] / pc) * (pb[bi] / pc));
        res.max_deviation = std::max(res.max_deviation, dev);
      }
  }
  res.independent = res.max_deviation <= tol;
  return res;
}

// Observed rows; row index is collection order.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<Domain> domains;
  std::vector<std::vector<Value>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    fail(ErrorKind::invalid_argument, "unknown column " + name);
  }
  std::size_t size() const { return rows.size(); }
};

// Draws population rows one at a time: one uniform stream per node (in
// topological order), each value the inverse cdf of its table row.
class Sampler {
 public:
  Sampler(const Scm& m, const exogenous::DigitStream& source) {
    ensure_valid(m);
    order_ = graph::topological_order(m.dag);
    const std::size_t k = order_.size();
    streams_ = k ? exogenous::split_streams(source, k) : std::vector<exogenous::UniformStream>{};
    for (std::size_t i = 0; i < k; ++i) {
      const auto& n = order_[i];
      doms_.push_back(m.domain(n));
      std::vector<std::size_t> pp;
      for (const auto& p : m.cpt(n).parents)
        for (std::size_t j = 0; j < i; ++j)
          if (order_[j] == p) pp.push_back(j);
      ppos_.push_back(pp);
      std::vector<std::vector<exogenous::CdfPoint<std::size_t>>> cdfs;
      for (const auto& row : m.cpt(n).rows) {
        std::vector<exogenous::CdfPoint<std::size_t>> cdf;
        double acc = 0;
        for (std::size_t v = 0; v < row.size(); ++v) {
          if (row[v] <= 0) continue;
          acc += row[v];
          cdf.push_back({v, acc});
        }
        cdf.back().threshold = 1.0;
        cdfs.push_back(std::move(cdf));
      }
      cdfs_.push_back(std::move(cdfs));
    }
  }

  const std::vector<std::string>& order() const { return order_; }
  const std::vector<Domain>& domains() const { return doms_; }

  // Value indices of the next population row, in order().
  const std::vector<std::size_t>& next() {
    cur_.assign(order_.size(), 0);
    for (std::size_t i = 0; i < order_.size(); ++i) {
      std::size_t row = 0;
      for (auto j : ppos_[i]) row = row * doms_[j].size() + cur_[j];
      double u = streams_[i].next_uniform();
      cur_[i] = exogenous::inverse_cdf_sample(cdfs_[i][row], u);
    }
    return cur_;
  }

 private:
  std::vector<std::string> order_;
  std::vector<Domain> doms_;
  std::vector<std::vector<std::size_t>> ppos_;
  std::vector<std::vector<std::vector<exogenous::CdfPoint<std::size_t>>>> cdfs_;
  std::vector<exogenous::UniformStream> streams_;
  std::vector<std::size_t> cur_;
};

inline Dataset sample(const Scm& m, const exogenous::DigitStream& source, std::size_t n) {
  Sampler s(m, source);
  Dataset d;
  d.columns = s.order();
  d.domains = s.domains();
  d.rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& idx = s.next();
    std::vector<Value> row(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) row[i] = d.domains[i].values[idx[i]];
    d.rows.push_back(std::move(row));
  }
  return d;
}

// Relative frequencies of the rows over the listed columns.
inline JointTable empirical(const Dataset& d, const std::vector<std::string>& cols) {
  std::vector<std::size_t> ci;
  std::vector<Domain> doms;
  for (const auto& c : cols) {
    ci.push_back(d.column(c));
    doms.push_back(d.domains[ci.back()]);
  }
  JointTable t(cols, doms);
  if (d.rows.empty()) return t;
  for (const auto& row : d.rows) {
    std::vector<std::size_t> c(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      auto k = doms[i].index_of(row[ci[i]]);
      require(k.has_value(), ErrorKind::invalid_argument, "dataset value outside the domain of " + cols[i]);
      c[i] = *k;
    }
    t.probs[t.flat(c)] += 1.0;
  }
  for (auto& p : t.probs) p /= static_cast<double>(d.rows.size());
  return t;
}

inline Scm as_double(const RationalScm& m) {
  Scm out;
  out.dag = m.dag;
  out.domains = m.domains;
  out.name = m.name;
  out.description = m.description;
  for (const auto& [n, c] : m.cpts) {
    Cpt d{c.parents, {}};
    for (const auto& row : c.rows) {
      std::vector<double> r;
      for (const auto& p : row) r.push_back(causal::to_double(p));
      d.rows.push_back(r);
    }
    out.cpts[n] = d;
  }
  return out;
}

}  // namespace scm
}  // namespace causal
