// Command-line front end: every subcommand loads its inputs, runs one library
// operation and prints a JSON report {command, inputs, result, citations,
// warnings, error}. Exit 0 on success, 1 on domain errors, 2 on usage errors.

#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "causal/casecontrol.hpp"
#include "causal/diagnostics.hpp"
#include "causal/docalc.hpp"
#include "causal/estimands.hpp"
#include "causal/examples.hpp"
#include "causal/gaussian.hpp"
#include "causal/graph.hpp"
#include "causal/identify.hpp"
#include "causal/io.hpp"
#include "causal/scm.hpp"

using namespace causal;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string model, out, format = "json", t, r, adjust, roles, t_values, z, data, given, do_, nodes, sigma;
  std::string params, w, x, y, at, descendants, candidates, order_col, model_out, name, hold;
  std::optional<std::string> base;
  std::uint64_t seed = 0;
  std::size_t n = 0, k = 2, budget = casecontrol::default_budget;
  double tol = 1e-12, threshold = 0.01;
  int rule = 1;
  bool exact = false, list = false, propensity = false;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Run {
  std::string command;
  json inputs = json::object();
  json result = json::object();
  std::vector<std::string> citations, warnings;
  std::optional<std::string> error;
  std::optional<Table> table;
  std::optional<std::string> csv;  // preformatted table text
  int status = 0;

  json report() const {
    json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["result"] = result;
    j["citations"] = citations;
    j["warnings"] = warnings;
    j["error"] = error ? json(*error) : json(nullptr);
    return j;
  }
};

// ---- flag parsing --------------------------------------------------------

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    if (cur.empty()) throw UsageError("empty item in list '" + s + "'");
    out.push_back(cur);
  }
  if (s.back() == sep) throw UsageError("empty item in list '" + s + "'");
  return out;
}

std::vector<std::pair<std::string, std::string>> pairs(const std::string& s) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : split(s)) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw UsageError("expected key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

template <class P>
void require_node(const scm::BasicScm<P>& m, const std::string& n) {
  if (!m.domains.count(n)) throw UsageError("model has no node " + n);
}

template <class P>
std::vector<std::string> node_list(const scm::BasicScm<P>& m, const std::string& s) {
  auto v = split(s);
  for (const auto& n : v) require_node(m, n);
  return v;
}

template <class P>
Value parse_value(const scm::BasicScm<P>& m, const std::string& node, const std::string& text) {
  require_node(m, node);
  const Domain& d = m.domain(node);
  auto i = d.parse(text);
  if (!i) throw UsageError("value " + text + " is not in the domain of " + node);
  return d.values[*i];
}

template <class P>
Assignment parse_assignment(const scm::BasicScm<P>& m, const std::string& s) {
  Assignment a;
  for (const auto& [k, v] : pairs(s)) {
    if (a.count(k)) throw UsageError("node " + k + " assigned twice");
    a[k] = parse_value(m, k, v);
  }
  return a;
}

template <class P>
std::map<std::string, std::string> parse_roles(const scm::BasicScm<P>& m, const std::string& s,
                                               const std::vector<std::string>& needed) {
  if (s.empty()) throw UsageError("--roles is required: " + causal::join(needed, "=..,") + "=..");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : pairs(s)) {
    require_node(m, v);
    out[k] = v;
  }
  for (const auto& n : needed)
    if (!out.count(n)) throw UsageError("--roles misses role " + n);
  for (const auto& [k, _] : out)
    if (std::find(needed.begin(), needed.end(), k) == needed.end()) throw UsageError("unknown role " + k);
  return out;
}

void need(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

// ---- output helpers ------------------------------------------------------

template <class P>
json num(const P& p) {
  if constexpr (std::is_floating_point_v<P>)
    return p;
  else
    return p.str();
}

template <class P>
std::string num_text(const P& p) {
  if constexpr (std::is_floating_point_v<P>)
    return io::detail::fmt17(p);
  else
    return p.str();
}

json value_json(const Domain& d, Value v) {
  if (d.labels.empty()) return v;
  return d.label(*d.index_of(v));
}

std::string value_text(const Domain& d, Value v) { return d.label(*d.index_of(v)); }

json assignment_json(const Assignment& a, const std::function<const Domain&(const std::string&)>& dom) {
  json j = json::object();
  for (const auto& [k, v] : a) j[k] = value_json(dom(k), v);
  return j;
}

template <class P>
json pmf_json(const BasicPmf<P>& p) {
  json j;
  j["node"] = p.node;
  j["values"] = json::array();
  j["probs"] = json::array();
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    j["values"].push_back(value_json(p.domain, p.domain.values[i]));
    j["probs"].push_back(num(p.probs[i]));
  }
  if (p.domain.labels.empty()) j["mean"] = num(p.mean());
  return j;
}

template <class P>
void joint_rows(const scm::BasicJointTable<P>& t, Run& run) {
  json rows = json::array();
  Table tab;
  tab.header = t.nodes;
  tab.header.push_back("p");
  for (std::size_t f = 0; f < t.size(); ++f) {
    auto c = t.config(f);
    json row = json::object();
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      row[t.nodes[i]] = value_json(t.domains[i], t.value(i, c[i]));
      cells.push_back(t.domains[i].label(c[i]));
    }
    rows.push_back({{"assignment", row}, {"p", num(t.probs[f])}});
    cells.push_back(num_text(t.probs[f]));
    tab.rows.push_back(std::move(cells));
  }
  run.result["nodes"] = t.nodes;
  run.result["rows"] = rows;
  run.table = std::move(tab);
}

template <class P>
scm::BasicScm<P> load(const Flags& f) {
  need(f.model, "-m/--model");
  auto m = io::load_model<P>(f.model);
  scm::ensure_valid(m);
  return m;
}

// ---- subcommands ---------------------------------------------------------

void cmd_validate(const Flags& f, Run& run) {
  need(f.model, "-m/--model");
  auto m = io::load_model<double>(f.model);
  auto errs = scm::validate_scm(m);
  run.result["nodes"] = graph::topological_order(m.dag);
  if (errs.empty()) {
    run.result["status"] = "ok";
    return;
  }
  run.result["status"] = "invalid";
  run.result["violations"] = errs;
  fail(ErrorKind::structure, std::to_string(errs.size()) + " violation(s); first: " + errs.front());
}

template <class P>
void cmd_joint(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto nodes = f.nodes.empty() ? graph::topological_order(m.dag) : node_list(m, f.nodes);
  auto j = scm::joint_distribution(m);
  if (f.given.empty()) {
    joint_rows(scm::marginal(j, nodes), run);
  } else {
    auto g = parse_assignment(m, f.given);
    run.result["given"] = assignment_json(g, [&](const std::string& n) -> const Domain& { return m.domain(n); });
    joint_rows(scm::restrict(j, nodes, g), run);
  }
  run.citations.push_back("joint law: product of the conditional tables in topological order");
}

template <class P>
void cmd_intervene(const Flags& f, Run& run) {
  auto m = load<P>(f);
  need(f.do_, "--do");
  auto iv = parse_assignment(m, f.do_);
  auto mi = scm::intervene(m, iv);
  auto nodes = f.nodes.empty() ? graph::topological_order(mi.dag) : node_list(mi, f.nodes);
  run.result["do"] = assignment_json(iv, [&](const std::string& n) -> const Domain& { return m.domain(n); });
  joint_rows(scm::marginal(scm::joint_distribution(mi), nodes), run);
  if (!f.model_out.empty()) {
    std::ofstream os(f.model_out);
    require(os.good(), ErrorKind::parse, "cannot write " + f.model_out);
    os << io::model_to_json(mi);
    run.result["model_out"] = f.model_out;
  }
  run.citations.push_back("intervention: the set nodes lose their parents and become point masses");
}

void cmd_sample(const Flags& f, Run& run) {
  auto m = load<double>(f);
  if (f.n == 0) throw UsageError("--n must be positive");
  auto d = scm::sample(m, exogenous::DigitStream(f.seed), f.n);
  run.result["columns"] = d.columns;
  json rows = json::array();
  for (const auto& r : d.rows) rows.push_back(r);
  run.result["rows"] = rows;
  std::ostringstream os;
  io::write_csv(os, d);
  run.csv = os.str();
  run.citations.push_back("sampling: inverse-cdf draws from one exogenous stream per node");
}

json backdoor_json(const graph::BackdoorReport& rep) {
  json j;
  j["treatment"] = rep.treatment;
  j["response"] = rep.response;
  j["adjust"] = std::vector<std::string>(rep.adjust.begin(), rep.adjust.end());
  j["valid"] = rep.valid;
  j["paths"] = json::array();
  for (const auto& pv : rep.paths)
    j["paths"].push_back({{"path", pv.path.str()}, {"verdict", graph::to_string(pv.verdict)}, {"witness", pv.witness}});
  j["violating"] = json::array();
  for (const auto& p : rep.violating()) j["violating"].push_back(p.str());
  return j;
}

void cmd_backdoor(const Flags& f, Run& run) {
  auto m = load<double>(f);
  need(f.t, "-t");
  need(f.r, "-r");
  require_node(m, f.t);
  require_node(m, f.r);
  auto zl = node_list(m, f.z);
  NodeSet z(zl.begin(), zl.end());
  graph::BackdoorReport rep;
  if (f.descendants.empty()) {
    rep = graph::check_backdoor(m.dag, f.t, f.r, z);
  } else {
    auto dl = node_list(m, f.descendants);
    rep = graph::check_backdoor_extended(m.dag, f.t, f.r, NodeSet(dl.begin(), dl.end()), z);
  }
  run.result = backdoor_json(rep);
  run.warnings = rep.warnings;
  run.citations.push_back("back-door criterion: every back-door path blocked by a non-descendant of T");
  if (!rep.valid) {
    run.error = "back-door criterion fails for " + braces(z) + ": " + std::to_string(rep.violating().size()) +
                " path(s) left open, first " + rep.violating().front().str();
    run.status = 1;
  }
}

void cmd_adjust_sets(const Flags& f, Run& run) {
  auto m = load<double>(f);
  need(f.t, "-t");
  need(f.r, "-r");
  require_node(m, f.t);
  require_node(m, f.r);
  NodeSet cand;
  if (f.candidates.empty()) {
    auto desc = graph::descendants(m.dag, f.t);
    for (const auto& [n, _] : m.domains)
      if (n != f.t && n != f.r && !desc.count(n)) cand.insert(n);
  } else {
    auto cl = node_list(m, f.candidates);
    cand.insert(cl.begin(), cl.end());
  }
  auto sets = graph::enumerate_valid_adjustment_sets(m.dag, f.t, f.r, cand);
  run.result["candidates"] = std::vector<std::string>(cand.begin(), cand.end());
  run.result["minimal_sets"] = json::array();
  for (const auto& s : sets) run.result["minimal_sets"].push_back(std::vector<std::string>(s.begin(), s.end()));
  run.citations.push_back("back-door criterion, minimal valid sets among the candidates");
}

template <class P>
std::vector<Value> t_values(const scm::BasicScm<P>& m, const std::string& t, const std::string& text) {
  if (text.empty()) return m.domain(t).values;
  std::vector<Value> out;
  for (const auto& s : split(text)) out.push_back(parse_value(m, t, s));
  return out;
}

template <class P>
void cmd_effect(const Flags& f, Run& run) {
  auto m = load<P>(f);
  need(f.t, "-t");
  need(f.r, "-r");
  require_node(m, f.t);
  require_node(m, f.r);
  auto z = node_list(m, f.adjust);
  auto tv = t_values(m, f.t, f.t_values);
  auto j = scm::joint_distribution(m);
  identify::BasicEffectReport<P> rep;
  if (f.propensity) {
    rep = {"propensity-score adjustment", f.t, tv, f.r, {}, std::nullopt,
           "propensity-score adjustment: strata of equal P(T | X) replace the strata of X"};
    for (Value v : tv) rep.per_t.push_back(identify::propensity_adjust(j, f.t, v, f.r, z));
    if (tv.size() == 2) rep.ate = rep.per_t[1].mean() - rep.per_t[0].mean();
  } else {
    rep = identify::effect_report(j, f.t, tv, f.r, z);
  }
  run.result["estimand"] = rep.estimand;
  run.result["adjust"] = z;
  run.result["per_t"] = json::array();
  Table tab{{f.t, f.r, "p"}, {}};
  const Domain& td = m.domain(f.t);
  for (std::size_t i = 0; i < tv.size(); ++i) {
    json e = pmf_json(rep.per_t[i]);
    e["t"] = value_json(td, tv[i]);
    run.result["per_t"].push_back(e);
    for (std::size_t k = 0; k < rep.per_t[i].probs.size(); ++k)
      tab.rows.push_back({value_text(td, tv[i]), rep.per_t[i].domain.label(k), num_text(rep.per_t[i].probs[k])});
  }
  run.result["ate"] = rep.ate ? num(*rep.ate) : json(nullptr);
  run.table = std::move(tab);
  run.citations.push_back(rep.citation);
}

template <class P>
void cmd_frontdoor(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"Y", "Z", "W"});
  auto j = scm::joint_distribution(m);
  auto res = identify::frontdoor(m.dag, j, roles["Y"], roles["Z"], roles["W"]);
  run.result["laws"] = json::array();
  for (Value y : m.domain(roles["Y"]).values) {
    json e = pmf_json(res.law_given(y, m.domain(roles["W"])));
    e["do"] = {{roles["Y"], value_json(m.domain(roles["Y"]), y)}};
    run.result["laws"].push_back(e);
  }
  run.citations.push_back("front-door formula: sum over z of P(z | y) sum over y' of P(w | z, y') P(y')");
}

template <class P>
void cmd_eelworms(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"X", "U", "V", "W", "Y"});
  auto j = scm::joint_distribution(m);
  auto res = identify::eelworms_effect(m.dag, j, roles);
  const Domain &xd = m.domain(roles["X"]), &yd = m.domain(roles["Y"]);
  run.result["laws"] = json::array();
  for (Value x : xd.values) {
    BasicPmf<P> p{roles["Y"], yd, {}};
    for (Value y : yd.values) p.probs.push_back(res.at({x, y}));
    json e = pmf_json(p);
    e["do"] = {{roles["X"], value_json(xd, x)}};
    run.result["laws"].push_back(e);
  }
  run.citations.push_back("fumigation formula: law of Y under do(X) from the visible nodes X, U, V, W, Y");
}

template <class P>
void cmd_gformula(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, identify::gformula_roles());
  auto tv = split(f.t_values);
  if (tv.size() != 2) throw UsageError("--t-values needs exactly two values: t,t'");
  const Value t1 = parse_value(m, roles["T"], tv[0]), t2 = parse_value(m, roles["T'"], tv[1]);
  auto res = identify::gformula2(m.dag, scm::joint_distribution(m), roles, t1, t2);
  run.result["overall"] = pmf_json(res.overall);
  run.result["given_x"] = json::array();
  for (const auto& [x, p] : res.given_x) {
    json e = pmf_json(p);
    e["x"] = value_json(m.domain(roles["X"]), x);
    run.result["given_x"].push_back(e);
  }
  run.citations.push_back("two-stage g-formula: sum over x, r, x' of P(r' | x, t, r, x', t') P(x' | x, t, r) P(r | x, t) P(x)");
}

template <class P>
void cmd_direct(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"Y1", "Y2", "Y3", "Y4"});
  need(f.hold, "--hold");
  const Value y2 = parse_value(m, roles["Y2"], f.hold);
  auto tv = t_values(m, roles["Y4"], f.t_values);
  auto j = scm::joint_distribution(m);
  run.result["per_t"] = json::array();
  std::vector<P> nus;
  for (Value t : tv) {
    auto d = estimands::two_stage_direct(m.dag, j, roles, y2, t);
    json e = pmf_json(d.law);
    e["t"] = value_json(m.domain(roles["Y4"]), t);
    e["nu"] = num(d.nu);
    run.result["per_t"].push_back(e);
    nus.push_back(d.nu);
  }
  run.result["difference"] = nus.size() == 2 ? num(P(nus[1] - nus[0])) : json(nullptr);
  run.citations.push_back("two-stage direct effect: sum over y3 of P(y1 | y2, y3, y4) P(y3 | y4)");
}

template <class P>
void cmd_policy(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"Y1", "Y2", "Y3", "Y4"});
  auto res = estimands::antibiotic_policy(m.dag, scm::joint_distribution(m), roles);
  run.result["per_t"] = json::array();
  for (const auto& [t, p] : res.law) {
    json e = pmf_json(p);
    e["t"] = value_json(m.domain(roles["Y4"]), t);
    e["mean"] = num(res.mean.at(t));
    run.result["per_t"].push_back(e);
  }
  run.result["improves"] = res.improves;
  run.citations.push_back("policy: second treatment given exactly when Y3 = 1, evaluated from observational data");
}

template <class P>
void cmd_mediation(const Flags& f, Run& run) {
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"H", "B", "Q", "S"});
  auto j = scm::joint_distribution(m);
  if (!f.sigma.empty()) {
    std::map<Value, P> sigma;
    for (const auto& [k, v] : pairs(f.sigma)) {
      P p;
      try {
        p = io::detail::parse_prob<P>(json(v));
      } catch (const Error&) {
        throw UsageError("--sigma mass '" + v + "' is not a probability");
      }
      sigma[parse_value(m, roles["S"], k)] = p;
    }
    auto res = estimands::mediation_fixed_sex(m.dag, j, roles, sigma);
    run.result["fixed_sex"] = json::array();
    for (const auto& [key, p] : res)
      run.result["fixed_sex"].push_back({{"h", value_json(m.domain(roles["H"]), key[0])},
                                         {"b", value_json(m.domain(roles["B"]), key[1])},
                                         {"q", value_json(m.domain(roles["Q"]), key[2])},
                                         {"p", num(p)}});
    run.citations.push_back("hiring formula with the perceived sex drawn from sigma");
  } else {
    auto res = estimands::natural_indirect(m.dag, j, roles);
    run.result["natural_indirect"] = num(res.value);
    run.result["under_s0"] = num(res.under_s0);
    run.result["under_s1"] = num(res.under_s1);
    run.citations.push_back("natural indirect effect: sum over (b, q) of E(H | b, q, S=1) [P(b, q | S=0) - P(b, q | S=1)]");
  }
}

template <class P>
json iv_json(const estimands::IvResult<P>& r) {
  return {{"theta", num(r.theta)}, {"numerator", num(r.numerator)}, {"denominator", num(r.denominator)}};
}

template <class P>
void cmd_iv(const Flags& f, Run& run) {
  if (!f.data.empty()) {
    std::optional<scm::Scm> m;
    if (!f.model.empty()) m = load<double>(f);
    auto d = io::read_csv_file(f.data, m ? &*m : nullptr);
    std::map<std::string, std::string> roles;
    for (const auto& [k, v] : pairs(f.roles)) roles[k] = v;
    for (const char* k : {"I", "T", "R"})
      if (!roles.count(k)) throw UsageError(std::string("--roles misses role ") + k);
    run.result["rows"] = d.size();
    auto tsls = estimands::iv_tsls(d, roles);
    run.result["tsls"] = {{"beta", tsls.beta},       {"se", tsls.se},           {"first_stage", tsls.first_stage},
                          {"reduced", tsls.reduced}, {"ratio", tsls.ratio},     {"intercept", tsls.intercept},
                          {"ols_slope", tsls.ols_slope}, {"n", tsls.n}};
    run.citations.push_back("two-stage least squares: cov(I, R) / cov(I, T)");
    if (d.domains[d.column(roles["I"])].size() == 2) {
      run.result["wald"] = iv_json(estimands::iv_theta(d, roles));
      run.citations.push_back("Wald ratio: (E(R | I=1) - E(R | I=0)) / (E(T | I=1) - E(T | I=0))");
    }
    return;
  }
  auto m = load<P>(f);
  auto roles = parse_roles(m, f.roles, {"I", "T", "R"});
  auto j = scm::joint_distribution(m);
  if (f.base) {
    auto res = estimands::iv_multi(j, roles, parse_value(m, roles["I"], *f.base));
    run.result["base"] = res.base;
    run.result["terms"] = json::array();
    for (const auto& t : res.terms)
      run.result["terms"].push_back({{"level", t.level},
                                     {"theta", num(t.theta)},
                                     {"numerator", num(t.numerator)},
                                     {"denominator", num(t.denominator)},
                                     {"weight", num(t.weight)}});
    run.result["overall"] = num(res.overall);
    run.citations.push_back("multi-level instrument: Wald ratios against the base level, weighted by p_k");
  } else {
    run.result = iv_json(estimands::iv_theta(j, roles));
    run.citations.push_back("Wald ratio: (E(R | I=1) - E(R | I=0)) / (E(T | I=1) - E(T | I=0))");
  }
}

template <class P>
void cmd_oddsratio(const Flags& f, Run& run) {
  auto m = load<P>(f);
  need(f.t, "-t");
  need(f.r, "-r");
  require_node(m, f.t);
  require_node(m, f.r);
  auto x = node_list(m, f.adjust);
  auto rep = estimands::odds_ratio(scm::joint_distribution(m), f.r, f.t, x);
  run.result["strata"] = json::array();
  for (const auto& s : rep.strata)
    run.result["strata"].push_back({{"x", assignment_json(s.x, [&](const std::string& n) -> const Domain& { return m.domain(n); })},
                                    {"p", s.p},
                                    {"q", s.q},
                                    {"e_disease", s.e_disease},
                                    {"e_exposure", s.e_exposure},
                                    {"weight", s.weight}});
  run.result["overall"] = rep.overall;
  run.citations.push_back("odds ratio: odds of R under T=1 over odds under T=0, equal to p(1-q) / (q(1-p))");
}

void cmd_casecontrol(const Flags& f, Run& run) {
  auto m = load<double>(f);
  need(f.t, "-t");
  need(f.r, "-r");
  require_node(m, f.t);
  require_node(m, f.r);
  if (f.n == 0) throw UsageError("--n (number of pairs) must be positive");
  auto x = node_list(m, f.adjust);
  auto s = casecontrol::simulate_case_control(m, f.r, f.t, x, f.n, exogenous::DigitStream(f.seed), f.budget);
  auto est = casecontrol::estimate_cc_or(s);
  run.result["pairs"] = s.pairs();
  run.result["population_rows"] = s.population_rows;
  run.result["strata"] = json::array();
  for (const auto& st : est.strata)
    run.result["strata"].push_back({{"x", st.x},   {"cases", st.cases}, {"a1", st.a1}, {"a0", st.a0},
                                    {"c1", st.c1}, {"c0", st.c0},       {"p", st.p},   {"q", st.q},
                                    {"e", st.e},   {"se_log", st.se_log}});
  run.result["overall"] = est.overall;
  run.warnings = est.warnings;
  std::ostringstream os;
  casecontrol::write_csv(os, s);
  run.csv = os.str();
  run.citations.push_back("matched case-control sampling; odds ratio p(1-q) / (q(1-p)) with delta-method SE");
}

void cmd_docalc(const Flags& f, Run& run) {
  auto m = load<double>(f);
  docalc::NodePartition part{node_list(m, f.w), node_list(m, f.x), node_list(m, f.y), node_list(m, f.z)};
  if (f.rule != 1 && f.rule != 2) throw UsageError("--rule must be 1 or 2");
  Assignment xa, za;
  for (const auto& [k, v] : parse_assignment(m, f.at)) {
    if (std::find(part.x.begin(), part.x.end(), k) != part.x.end())
      xa[k] = v;
    else if (std::find(part.z.begin(), part.z.end(), k) != part.z.end())
      za[k] = v;
    else
      throw UsageError("--at assigns " + k + ", which is in neither --x nor -z");
  }
  auto v = docalc::verify_rule(m, part, f.rule, xa, za, f.tol);
  run.result = {{"rule", v.rule},
                {"condition", v.condition},
                {"condition_holds", v.condition_holds},
                {"condition_deviation", v.condition_deviation},
                {"identity_deviation", v.identity_deviation},
                {"pass", v.pass}};
  run.citations.push_back(f.rule == 1 ? "rule 1: P(y | do x, z, w) = P(y | do x, w) when C1 holds"
                                      : "rule 2: P(y | do x, do z, w) = P(y | do x, z, w) when C2 holds");
}

void cmd_diagnose(const Flags& f, Run& run) {
  need(f.data, "--data");
  need(f.r, "-r");
  std::optional<scm::Scm> m;
  if (!f.model.empty()) m = load<double>(f);
  auto d = io::read_csv_file(f.data, m ? &*m : nullptr);
  auto rep = diagnostics::homogeneity_report(d, split(f.adjust), f.t, f.r, f.k, f.threshold, f.order_col);
  run.result["pvalues"] = rep.pvalues;
  run.result["min_pvalue"] = rep.min_pvalue;
  run.result["bonferroni"] = rep.bonferroni;
  run.result["uniformity"] = rep.uniformity ? json{{"statistic", rep.uniformity->statistic},
                                                   {"pvalue", rep.uniformity->pvalue}}
                                            : json(nullptr);
  run.result["uniformity_alarm"] = rep.uniformity_alarm;
  run.result["extreme_alarm"] = rep.extreme_alarm;
  run.result["alarm"] = rep.alarm;
  run.result["strata"] = json::array();
  for (const auto& s : rep.strata) {
    json tests = json::array();
    for (const auto& t : s.tests)
      tests.push_back({{"blocks", {t.first_block, t.first_block + 1}},
                       {"statistic", t.test.statistic},
                       {"df", t.test.df},
                       {"pvalue", t.test.pvalue}});
    run.result["strata"].push_back(
        {{"pass", s.pass}, {"key", s.key}, {"variable", s.variable}, {"counts", s.counts}, {"tests", tests}});
  }
  run.warnings = rep.warnings;
  run.citations.push_back("index-split homogeneity: chi-square tests between consecutive blocks, KS uniformity of the p-values");
}

void cmd_example(const Flags& f, Run& run) {
  if (f.list) {
    run.result["examples"] = json::array();
    for (const auto& e : examples::list_examples()) {
      json params = json::array();
      for (const auto& p : e.params) params.push_back({{"name", p.name}, {"default", p.fallback}, {"doc", p.doc}});
      run.result["examples"].push_back(
          {{"name", e.name}, {"summary", e.summary}, {"citation", e.citation}, {"params", params}});
    }
    return;
  }
  need(f.name, "example name (or --list)");
  examples::ExampleSpec spec{f.name, {}};
  for (const auto& [k, v] : pairs(f.params)) {
    try {
      std::size_t used = 0;
      spec.params[k] = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw UsageError("parameter " + k + " needs a number, got '" + v + "'");
    }
  }
  auto out = examples::build_example(spec);
  std::optional<scm::BasicScm<Rational>> exact;
  if (f.exact) {
    // Rational tables need the parameters as written, not their doubles.
    if (f.name != "simpson_binary") throw UsageError("--exact output exists only for simpson_binary");
    examples::SimpsonBinaryParams<Rational> q;
    bool beta1 = false;
    for (const auto& [k, v] : pairs(f.params)) {
      const Rational r = io::detail::parse_rational(v);
      if (k.size() == 3 && k[0] == 'p' && (k[1] == '0' || k[1] == '1') && (k[2] == '0' || k[2] == '1'))
        q.p[k[1] - '0'][k[2] - '0'] = r;
      else if (k == "beta")
        q.beta0 = r;
      else if (k == "beta1")
        q.beta1 = r, beta1 = r >= 0;
      else if (k == "px0")
        q.px0 = r;
      else if (k == "paradox")
        q.paradox = r != 0;
    }
    if (!beta1) q.beta1 = 1 - q.beta0;
    exact = examples::simpson_binary(q);
  }
  for (const auto& e : examples::list_examples())
    if (e.name == f.name) {
      run.result["summary"] = e.summary;
      run.citations.push_back(e.citation);
    }
  run.result["name"] = out.name;
  run.result["notes"] = out.notes;
  if (exact)
    run.result["model"] = json::parse(io::model_to_json(*exact));
  else if (out.discrete)
    run.result["model"] = json::parse(io::model_to_json(*out.discrete));
  if (f.name == "simpson_continuous") {
    gaussian::SimpsonParams q;
    auto get = [&](const char* k, double& dst) {
      if (spec.params.count(k)) dst = spec.params.at(k);
    };
    get("alpha", q.alpha), get("beta", q.beta), get("gamma", q.gamma), get("mu", q.mu);
    get("sigma1", q.sigma1), get("sigma2", q.sigma2), get("sigma3", q.sigma3);
    auto rep = gaussian::simpson_cont_report(q);
    run.result["closed_form"] = {{"observational_slope", rep.observational_slope},
                                 {"causal_slope", rep.causal_slope},
                                 {"paradox", rep.paradox}};
  } else if (f.name == "lord") {
    gaussian::LordParams q;
    auto get = [&](const char* k, double& dst) {
      if (spec.params.count(k)) dst = spec.params.at(k);
    };
    get("mu1", q.mu1), get("mu2", q.mu2), get("sigma", q.sigma), get("p", q.p), get("rho", q.rho);
    auto rep = gaussian::lord_report(q);
    run.result["closed_form"] = {{"gain_mean", {rep.gain[0].mean, rep.gain[1].mean}},
                                 {"gain_var", {rep.gain[0].var, rep.gain[1].var}},
                                 {"response_mean", {rep.response[0].mean, rep.response[1].mean}},
                                 {"response_var", {rep.response[0].var, rep.response[1].var}},
                                 {"mean_r", rep.mean_r},
                                 {"var_r", rep.var_r},
                                 {"direct_difference", rep.direct_difference}};
  }
  if (!f.model_out.empty() && out.discrete) {
    std::ofstream os(f.model_out);
    require(os.good(), ErrorKind::parse, "cannot write " + f.model_out);
    os << (exact ? io::model_to_json(*exact) : io::model_to_json(*out.discrete));
    run.result["model_out"] = f.model_out;
  }
}

// ---- wiring --------------------------------------------------------------

using Handler = std::function<void(const Flags&, Run&)>;

#define CAUSAL_DISPATCH(fn) [](const Flags& f, Run& r) { f.exact ? fn<Rational>(f, r) : fn<double>(f, r); }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os.good()) throw UsageError("cannot write " + path);
  os << text;
}

std::string table_csv(const Table& t) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural causal models: interventions, identification formulas and diagnostics"};
  app.require_subcommand(1);
  Flags f;

  struct Sub {
    CLI::App* app;
    Handler run;
    bool table;
  };
  std::vector<Sub> subs;
  auto add = [&](const std::string& name, const std::string& help, Handler h, bool table = false) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--out", f.out, "write the report (or table) here instead of stdout");
    s->add_option("--format", f.format, "json (default) or csv")->check(CLI::IsMember({"json", "csv"}));
    subs.push_back({s, std::move(h), table});
    return s;
  };
  auto model = [&](CLI::App* s, bool required = true) {
    auto* o = s->add_option("-m,--model", f.model, "model file (JSON)");
    if (required) o->required();
  };
  auto tr = [&](CLI::App* s) {
    s->add_option("-t,--treatment", f.t, "treatment node")->required();
    s->add_option("-r,--response", f.r, "response node")->required();
  };
  auto exact = [&](CLI::App* s) { s->add_flag("--exact", f.exact, "exact rational arithmetic"); };
  auto roles = [&](CLI::App* s, const std::string& needed) {
    s->add_option("--roles", f.roles, "role bindings " + needed)->required();
  };

  auto* s = add("validate", "check a model file", cmd_validate);
  model(s);

  s = add("joint", "joint or conditional distribution", CAUSAL_DISPATCH(cmd_joint), true);
  model(s), exact(s);
  s->add_option("--nodes", f.nodes, "nodes to keep, comma separated (default all)");
  s->add_option("--given", f.given, "conditioning event k=v,...");

  s = add("intervene", "distribution after do(...)", CAUSAL_DISPATCH(cmd_intervene), true);
  model(s), exact(s);
  s->add_option("--do", f.do_, "intervention k=v,...")->required();
  s->add_option("--nodes", f.nodes, "nodes to keep (default all)");
  s->add_option("--model-out", f.model_out, "write the intervened model here");

  s = add("sample", "seeded sample from the model", cmd_sample, true);
  model(s);
  s->add_option("--seed", f.seed, "seed of the digit source")->required();
  s->add_option("--n", f.n, "number of rows")->required();

  s = add("backdoor", "check the back-door criterion for an adjustment set", cmd_backdoor);
  model(s), tr(s);
  s->add_option("-z,--adjust", f.z, "adjustment set, comma separated");
  s->add_option("--descendants", f.descendants, "descendants of T in the adjustment set (extended check)");

  s = add("adjust-sets", "minimal valid adjustment sets", cmd_adjust_sets);
  model(s), tr(s);
  s->add_option("--candidates", f.candidates, "candidate nodes (default: non-descendants of T)");

  s = add("effect", "interventional law by adjustment", CAUSAL_DISPATCH(cmd_effect), true);
  model(s), tr(s), exact(s);
  s->add_option("--adjust,-z", f.adjust, "adjustment set, comma separated");
  s->add_option("--t-values", f.t_values, "treatment values (default all); two values give the ATE");
  s->add_flag("--propensity", f.propensity, "adjust over propensity strata");

  s = add("frontdoor", "front-door formula", CAUSAL_DISPATCH(cmd_frontdoor));
  model(s), exact(s), roles(s, "Y=..,Z=..,W=..");

  s = add("eelworms", "fumigation formula with two latent nodes", CAUSAL_DISPATCH(cmd_eelworms));
  model(s), exact(s), roles(s, "X=..,U=..,V=..,W=..,Y=..");

  s = add("gformula", "two-stage g-formula", CAUSAL_DISPATCH(cmd_gformula));
  model(s), exact(s), roles(s, "X=..,T=..,R=..,X'=..,T'=..,R'=..");
  s->add_option("--t-values", f.t_values, "values of T and T'")->required();

  s = add("direct-effect", "direct effect of Y4 on Y1 with Y2 held fixed", CAUSAL_DISPATCH(cmd_direct));
  model(s), exact(s), roles(s, "Y1=..,Y2=..,Y3=..,Y4=..");
  s->add_option("--hold", f.hold, "value at which Y2 is held")->required();
  s->add_option("--t-values", f.t_values, "values of Y4 (default all)");

  s = add("policy", "treat-when-Y3 policy evaluated from observational data", CAUSAL_DISPATCH(cmd_policy));
  model(s), exact(s), roles(s, "Y1=..,Y2=..,Y3=..,Y4=..");

  s = add("mediation", "natural indirect effect or fixed perceived sex", CAUSAL_DISPATCH(cmd_mediation));
  model(s), exact(s), roles(s, "H=..,B=..,Q=..,S=..");
  s->add_option("--sigma", f.sigma, "assumed-sex distribution s=p,...");

  s = add("iv", "instrumental-variable estimands", CAUSAL_DISPATCH(cmd_iv));
  model(s, false), exact(s), roles(s, "I=..,T=..,R=..");
  s->add_option("--data", f.data, "dataset (CSV) for TSLS and the sample Wald ratio");
  s->add_option("--base", f.base, "base level of a multi-level instrument");

  s = add("oddsratio", "population odds ratio per stratum", CAUSAL_DISPATCH(cmd_oddsratio));
  model(s), tr(s), exact(s);
  s->add_option("--adjust,-z", f.adjust, "stratifying nodes");

  s = add("casecontrol", "simulate a matched case-control study and estimate the odds ratio", cmd_casecontrol, true);
  model(s), tr(s);
  s->add_option("--adjust,-z", f.adjust, "matching nodes");
  s->add_option("--seed", f.seed, "seed of the digit source")->required();
  s->add_option("--n", f.n, "number of case-control pairs")->required();
  s->add_option("--budget", f.budget, "maximum population rows scanned");

  s = add("docalc", "check a do-calculus rule on a model", cmd_docalc);
  model(s);
  s->add_option("--rule", f.rule, "1 or 2")->required();
  s->add_option("--w", f.w, "conditioning nodes W");
  s->add_option("--x", f.x, "intervened nodes X");
  s->add_option("--y", f.y, "outcome nodes Y")->required();
  s->add_option("-z", f.z, "nodes Z");
  s->add_option("--at", f.at, "values of X and Z, k=v,...");
  s->add_option("--tol", f.tol, "tolerance (default 1e-12)");

  s = add("diagnose", "index-split homogeneity checks on a dataset", cmd_diagnose);
  model(s, false);
  s->add_option("--data", f.data, "dataset (CSV)")->required();
  s->add_option("-t,--treatment", f.t, "treatment column (optional)");
  s->add_option("-r,--response", f.r, "response column")->required();
  s->add_option("--adjust,-z", f.adjust, "covariate columns");
  s->add_option("--k", f.k, "blocks per stratum (default 2)");
  s->add_option("--threshold", f.threshold, "alarm threshold (default 0.01)");
  s->add_option("--order-col", f.order_col, "column defining collection order");

  s = add("example", "build a catalogued example model", cmd_example);
  s->add_option("name", f.name, "example name");
  s->add_flag("--list", f.list, "list the catalog");
  s->add_option("--param", f.params, "parameters k=v,...");
  s->add_option("--model-out", f.model_out, "write the model file here");
  exact(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const Sub* sub = nullptr;
  for (const auto& c : subs)
    if (c.app->parsed()) sub = &c;
  Run run;
  run.command = sub->app->get_name();
  for (const auto* opt : sub->app->get_options()) {
    if (opt->count() == 0 || opt->get_single_name() == "help") continue;
    const auto& res = opt->results();
    std::string v;
    for (std::size_t i = 0; i < res.size(); ++i) v += (i ? "," : "") + res[i];
    run.inputs[opt->get_single_name()] = opt->get_expected_max() == 0 ? json(true) : json(v);
  }

  try {
    if (f.format == "csv" && !sub->table) throw UsageError("--format csv is not available for " + run.command);
    sub->run(f, run);
  } catch (const UsageError& e) {
    run.error = std::string("usage: ") + e.what();
    run.status = 2;
  } catch (const Error& e) {
    run.error = e.what();
    run.status = e.kind() == ErrorKind::parse ? 2 : 1;
  } catch (const std::exception& e) {
    run.error = std::string("internal: ") + e.what();
    run.status = 1;
  }

  try {
    if (!run.error && f.format == "csv")
      write_text(f.out, run.csv ? *run.csv : table_csv(*run.table));
    else
      write_text(f.out, run.report().dump(2) + "\n");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (run.error) std::cerr << "error: " << *run.error << "\n";
  return run.status;
}
