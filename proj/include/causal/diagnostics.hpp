#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "scm.hpp"

namespace causal::diagnostics {

struct Stratum {
  Assignment key;
  std::vector<std::size_t> rows;                 // dataset row indices, in collection order
  std::vector<std::vector<std::size_t>> blocks;  // k contiguous pieces of `rows`
  bool too_small = false;                        // fewer rows than blocks
};

// Groups rows by the given columns (t_col may be empty) and cuts each group
// into k contiguous blocks whose sizes differ by at most one. Rows are taken
// in dataset order, or sorted by `order_col` when one is named.
inline std::vector<Stratum> stratify_split(const scm::Dataset& data, const std::vector<std::string>& x_cols,
                                           const std::string& t_col, std::size_t k,
                                           const std::string& order_col = "") {
  require(k >= 2, ErrorKind::invalid_argument, "split count must be at least 2");
  std::vector<std::string> keys = x_cols;
  if (!t_col.empty()) keys.push_back(t_col);
  std::vector<std::size_t> ci;
  for (const auto& c : keys) ci.push_back(data.column(c));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (!order_col.empty()) {
    const std::size_t oc = data.column(order_col);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.rows[a][oc] < data.rows[b][oc]; });
  }
  std::map<Assignment, Stratum> groups;
  for (std::size_t r : order) {
    Assignment key;
    for (std::size_t i = 0; i < keys.size(); ++i) key[keys[i]] = data.rows[r][ci[i]];
    auto& s = groups[key];
    s.key = key;
    s.rows.push_back(r);
  }
  std::vector<Stratum> out;
  for (auto& [_, s] : groups) {
    const std::size_t n = s.rows.size(), base = n / k, extra = n % k;
    std::size_t at = 0;
    for (std::size_t b = 0; b < k; ++b) {
      const std::size_t len = base + (b < extra ? 1 : 0);
      s.blocks.emplace_back(s.rows.begin() + static_cast<std::ptrdiff_t>(at),
                            s.rows.begin() + static_cast<std::ptrdiff_t>(at + len));
      at += len;
    }
    s.too_small = n < k;
    out.push_back(std::move(s));
  }
  return out;
}

struct ChiSquare {
  double statistic = 0;
  int df = 0;
  double pvalue = 1;
};

// Chi-square test of homogeneity for two count vectors over the same ordered
// categories. Empty categories are dropped; neighbouring categories are then
// pooled left to right until every expected count reaches 5, with any short
// tail folded into the last pooled group. Fewer than two groups gives p = 1.
inline ChiSquare two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), ErrorKind::invalid_argument, "count vectors over different domains");
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] >= 0 && b[i] >= 0, ErrorKind::invalid_argument, "negative count");
    na += a[i];
    nb += b[i];
  }
  require(na > 0 && nb > 0, ErrorKind::invalid_argument, "empty sample");
  const double n = na + nb, small = std::min(na, nb);
  std::vector<std::pair<double, double>> groups;
  std::pair<double, double> cur{0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] + b[i] == 0) continue;
    cur.first += a[i];
    cur.second += b[i];
    if (small * (cur.first + cur.second) / n >= 5) {
      groups.push_back(cur);
      cur = {0, 0};
    }
  }
  if (cur.first + cur.second > 0) {
    if (groups.empty())
      groups.push_back(cur);
    else {
      groups.back().first += cur.first;
      groups.back().second += cur.second;
    }
  }
  ChiSquare res;
  if (groups.size() < 2) return res;
  for (const auto& [ga, gb] : groups) {
    const double col = ga + gb, ea = na * col / n, eb = nb * col / n;
    res.statistic += (ga - ea) * (ga - ea) / ea + (gb - eb) * (gb - eb) / eb;
  }
  res.df = static_cast<int>(groups.size()) - 1;
  boost::math::chi_squared dist(res.df);
  res.pvalue = std::clamp(boost::math::cdf(boost::math::complement(dist, res.statistic)), 0.0, 1.0);
  return res;
}

// Asymptotic Kolmogorov tail probability P(K > lambda).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

struct Uniformity {
  double statistic = 0;
  double pvalue = 1;
};

// Kolmogorov-Smirnov distance to the uniform law, with the small-sample
// corrected asymptotic p-value.
inline Uniformity uniformity_check(std::vector<double> pvals) {
  require(pvals.size() >= 5, ErrorKind::invalid_argument,
          "uniformity check needs at least 5 p-values, got " + std::to_string(pvals.size()));
  std::sort(pvals.begin(), pvals.end());
  const double n = static_cast<double>(pvals.size());
  Uniformity u;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
    u.statistic = std::max({u.statistic, hi - pvals[i], pvals[i] - lo});
  }
  const double rn = std::sqrt(n);
  u.pvalue = kolmogorov_tail((rn + 0.12 + 0.11 / rn) * u.statistic);
  return u;
}

struct BlockTest {
  std::size_t first_block = 0;  // compares blocks first_block and first_block + 1
  ChiSquare test;
};

struct StratumReport {
  std::string pass;  // "response" or "treatment"
  Assignment key;
  std::string variable;
  std::vector<std::vector<double>> counts;  // per block, over the variable's domain
  std::vector<BlockTest> tests;
};

struct HomogeneityReport {
  std::vector<StratumReport> strata;
  std::vector<double> pvalues;  // every block test, in stratum order
  std::optional<Uniformity> uniformity;
  double min_pvalue = 1;
  double bonferroni = 1;  // min p-value times the number of tests, capped at 1
  bool uniformity_alarm = false;
  bool extreme_alarm = false;
  bool alarm = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline void run_pass(const scm::Dataset& data, const std::vector<Stratum>& strata, const std::string& pass,
                     const std::string& var, HomogeneityReport& rep) {
  const std::size_t vc = data.column(var);
  const Domain& dom = data.domains[vc];
  for (const auto& s : strata) {
    if (s.too_small) continue;
    StratumReport sr{pass, s.key, var, {}, {}};
    for (const auto& blk : s.blocks) {
      std::vector<double> c(dom.size(), 0.0);
      for (std::size_t r : blk) {
        auto i = dom.index_of(data.rows[r][vc]);
        require(i.has_value(), ErrorKind::invalid_argument, "dataset value outside the domain of " + var);
        c[*i] += 1;
      }
      sr.counts.push_back(std::move(c));
    }
    for (std::size_t b = 0; b + 1 < sr.counts.size(); ++b) {
      sr.tests.push_back({b, two_sample_pvalue(sr.counts[b], sr.counts[b + 1])});
      rep.pvalues.push_back(sr.tests.back().test.pvalue);
    }
    rep.strata.push_back(std::move(sr));
  }
}

}  // namespace detail

// Index-split homogeneity checks: responses within (x, t) strata, then
// treatments within x strata, followed by a uniformity check of all p-values.
inline HomogeneityReport homogeneity_report(const scm::Dataset& data, const std::vector<std::string>& x_cols,
                                            const std::string& t_col, const std::string& r_col, std::size_t k = 2,
                                            double threshold = 0.01, const std::string& order_col = "") {
  HomogeneityReport rep;
  detail::run_pass(data, stratify_split(data, x_cols, t_col, k, order_col), "response", r_col, rep);
  if (!t_col.empty())
    detail::run_pass(data, stratify_split(data, x_cols, "", k, order_col), "treatment", t_col, rep);
  if (rep.strata.empty()) {
    rep.warnings.push_back("no usable strata: every stratum has fewer rows than blocks");
    return rep;
  }
  for (double p : rep.pvalues) rep.min_pvalue = std::min(rep.min_pvalue, p);
  rep.bonferroni = std::min(1.0, rep.min_pvalue * static_cast<double>(rep.pvalues.size()));
  rep.extreme_alarm = rep.bonferroni < threshold;
  if (rep.pvalues.size() >= 5) {
    rep.uniformity = uniformity_check(rep.pvalues);
    rep.uniformity_alarm = rep.uniformity->pvalue < threshold;
  } else {
    rep.warnings.push_back("fewer than 5 p-values: uniformity check skipped");
  }
  rep.alarm = rep.uniformity_alarm || rep.extreme_alarm;
  return rep;
}

}  // namespace causal::diagnostics
