#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "exogenous.hpp"
#include "scm.hpp"

namespace causal::casecontrol {

struct CcRow {
  std::vector<Value> x;
  Value t = 0;
  Value r = 0;
  std::size_t pair = 0;       // 1-based pair number
  bool is_case = false;
  std::size_t index = 0;      // position in the simulated population
};

// Cases at odd positions (1-based), each followed by its matched control.
struct CaseControlSample {
  std::vector<std::string> x_nodes;
  std::string t_node, r_node;
  std::vector<CcRow> rows;
  std::size_t population_rows = 0;

  std::size_t pairs() const { return rows.size() / 2; }
};

constexpr std::size_t default_budget = 10'000'000;

// Scans the population in order. The first N rows with R=1 become cases. The
// scan then continues past the last case, and each later row becomes the
// control of the earliest case with the same x that still lacks one, so
// controls follow the law of (T, R) given x and keep whatever R they have.
inline CaseControlSample simulate_case_control(const scm::Scm& population, const std::string& r,
                                               const std::string& t, const std::vector<std::string>& x,
                                               std::size_t n_pairs, const exogenous::DigitStream& source,
                                               std::size_t budget = default_budget) {
  require(n_pairs > 0, ErrorKind::invalid_argument, "pair count must be positive");
  for (const auto& n : {r, t}) {
    const Domain& d = population.domain(n);
    require(d.size() == 2 && d.index_of(0) && d.index_of(1), ErrorKind::invalid_argument,
            n + " must take the values 0 and 1");
  }
  for (const auto& n : x) population.domain(n);
  {
    auto joint = scm::joint_distribution(population);
    if (negligible(scm::probability(joint, {{r, 1}})))
      fail(ErrorKind::exhaustion, "P(" + r + "=1) = 0: the population has no cases");
  }
  scm::Sampler sampler(population, source);
  const auto& order = sampler.order();
  auto col = [&](const std::string& n) {
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == n) return i;
    fail(ErrorKind::invalid_argument, "unknown node " + n);
  };
  const std::size_t cr = col(r), ct = col(t);
  std::vector<std::size_t> cx;
  for (const auto& n : x) cx.push_back(col(n));
  const auto& doms = sampler.domains();

  CaseControlSample s{x, t, r, std::vector<CcRow>(2 * n_pairs), 0};
  std::map<std::vector<Value>, std::deque<std::size_t>> pending;  // x -> pairs awaiting a control
  std::size_t cases = 0, controls = 0;
  while (controls < n_pairs) {
    if (s.population_rows >= budget)
      fail(ErrorKind::exhaustion, "population budget of " + std::to_string(budget) + " rows exhausted with " +
                                      std::to_string(cases) + " cases and " + std::to_string(controls) +
                                      " controls of " + std::to_string(n_pairs) + " pairs");
    const auto& idx = sampler.next();
    ++s.population_rows;
    CcRow row;
    for (std::size_t c : cx) row.x.push_back(doms[c].values[idx[c]]);
    row.t = doms[ct].values[idx[ct]];
    row.r = doms[cr].values[idx[cr]];
    row.index = s.population_rows;
    if (cases < n_pairs) {
      if (row.r != 1) continue;
      row.is_case = true;
      row.pair = ++cases;
      pending[row.x].push_back(row.pair);
      s.rows[2 * (row.pair - 1)] = std::move(row);
      continue;
    }
    auto it = pending.find(row.x);
    if (it == pending.end() || it->second.empty()) continue;
    row.pair = it->second.front();
    it->second.pop_front();
    ++controls;
    s.rows[2 * row.pair - 1] = std::move(row);
  }
  return s;
}

inline void write_csv(std::ostream& os, const CaseControlSample& s) {
  for (const auto& n : s.x_nodes) os << n << ",";
  os << s.t_node << "," << s.r_node << ",pair_id,role\n";
  for (const auto& row : s.rows) {
    for (Value v : row.x) os << v << ",";
    os << row.t << "," << row.r << "," << row.pair << "," << (row.is_case ? "case" : "control") << "\n";
  }
}

struct CcStratum {
  std::vector<Value> x;
  std::size_t cases = 0;
  std::size_t a1 = 0, a0 = 0;  // exposed / unexposed cases
  std::size_t c1 = 0, c0 = 0;  // exposed / unexposed controls with R=0
  double p = 0, q = 0;
  double e = 0;
  double se_log = 0;  // delta-method standard error of log e
};

struct CcEstimate {
  std::vector<CcStratum> strata;
  double overall = 0;  // e weighted by case x-frequencies over retained strata
  std::vector<std::string> warnings;
};

inline CcEstimate estimate_cc_or(const CaseControlSample& s) {
  std::map<std::vector<Value>, CcStratum> by_x;
  for (const auto& row : s.rows) {
    auto& st = by_x[row.x];
    st.x = row.x;
    if (row.is_case) {
      ++st.cases;
      (row.t == 1 ? st.a1 : st.a0)++;
    } else if (row.r == 0) {
      (row.t == 1 ? st.c1 : st.c0)++;
    }
  }
  CcEstimate out;
  std::size_t kept_cases = 0;
  for (auto& [x, st] : by_x) {
    if (!st.a1 || !st.a0 || !st.c1 || !st.c0) {
      std::string key;
      for (std::size_t i = 0; i < x.size(); ++i) key += (i ? ", " : "") + s.x_nodes[i] + "=" + std::to_string(x[i]);
      out.warnings.push_back("stratum {" + key + "} dropped: empty case/control exposure cell");
      continue;
    }
    const double a1 = double(st.a1), a0 = double(st.a0), c1 = double(st.c1), c0 = double(st.c0);
    st.p = a1 / (a1 + a0);
    st.q = c1 / (c1 + c0);
    st.e = (a1 * c0) / (a0 * c1);
    st.se_log = std::sqrt(1 / a1 + 1 / a0 + 1 / c1 + 1 / c0);
    kept_cases += st.cases;
    out.strata.push_back(st);
  }
  for (const auto& st : out.strata) out.overall += st.e * double(st.cases) / double(kept_cases);
  return out;
}

}  // namespace causal::casecontrol
