#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scm.hpp"

namespace causal::io {

using nlohmann::json;

namespace detail {

inline std::string quote(const std::string& s) { return json(s).dump(); }

inline std::string fmt17(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  return buf;
}

template <class P>
std::string prob_text(const P& p) {
  if constexpr (std::is_floating_point_v<P>)
    return fmt17(p);
  else
    return quote(p.str());
}

// "0.25", "1e-3", "3/8" -> exact rational.
inline Rational parse_rational(const std::string& text) {
  std::string s = text;
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    Rational num = parse_rational(s.substr(0, slash)), den = parse_rational(s.substr(slash + 1));
    require(den != 0, ErrorKind::parse, "zero denominator in " + text);
    return num / den;
  }
  long exp10 = 0;
  auto e = s.find_first_of("eE");
  if (e != std::string::npos) {
    const std::string ex = s.substr(e + 1);
    std::size_t used = 0;
    try {
      exp10 = std::stol(ex, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(!ex.empty() && used == ex.size(), ErrorKind::parse, "malformed probability " + text);
    s = s.substr(0, e);
  }
  bool neg = !s.empty() && s[0] == '-';
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) s = s.substr(1);
  auto dot = s.find('.');
  std::string digits = s;
  if (dot != std::string::npos) {
    exp10 -= static_cast<long>(s.size() - dot - 1);
    digits = s.substr(0, dot) + s.substr(dot + 1);
  }
  require(!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit), ErrorKind::parse,
          "malformed probability " + text);
  // cpp_int reads a leading 0 as an octal prefix.
  const auto nz = digits.find_first_not_of('0');
  boost::multiprecision::cpp_int n(nz == std::string::npos ? std::string("0") : digits.substr(nz));
  Rational r(n);
  boost::multiprecision::cpp_int ten = 10;
  boost::multiprecision::cpp_int scale = boost::multiprecision::pow(ten, static_cast<unsigned>(std::labs(exp10)));
  r = exp10 >= 0 ? r * Rational(scale) : r / Rational(scale);
  return neg ? -r : r;
}

template <class P>
P parse_prob(const json& j) {
  std::string text;
  if (j.is_string())
    text = j.get<std::string>();
  else if (j.is_number())
    text = j.dump();
  else
    fail(ErrorKind::parse, "probability must be a number or a string, got " + j.dump());
  if constexpr (std::is_floating_point_v<P>) {
    if (text.find('/') != std::string::npos) return to_double(parse_rational(text));
    // Underflow to a subnormal is fine; only overflow and junk are errors.
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(text.c_str(), &end);
    require(!text.empty() && end == text.c_str() + text.size() && !(errno == ERANGE && std::isinf(v)),
            ErrorKind::parse, "malformed probability " + text);
    return v;
  } else {
    return parse_rational(text);
  }
}

}  // namespace detail

template <class P>
scm::BasicScm<P> model_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::parse, "model document must be an object");
  require(doc.contains("nodes") && doc["nodes"].is_array(), ErrorKind::parse, "model needs a 'nodes' array");
  scm::BasicScm<P> m;
  if (doc.contains("meta")) {
    const auto& meta = doc["meta"];
    if (meta.contains("name")) m.name = meta["name"].get<std::string>();
    if (meta.contains("description")) m.description = meta["description"].get<std::string>();
  }
  struct Raw {
    std::string id;
    std::vector<std::string> parents;
    json table;
  };
  std::vector<Raw> raws;
  for (const auto& n : doc["nodes"]) {
    require(n.is_object() && n.contains("id") && n["id"].is_string(), ErrorKind::parse, "node without an 'id'");
    std::string id = n["id"].get<std::string>();
    require(!m.domains.count(id), ErrorKind::parse, "node " + id + " declared twice");
    require(n.contains("domain") && n["domain"].is_array() && !n["domain"].empty(), ErrorKind::parse,
            "node " + id + " needs a non-empty 'domain'");
    Domain d;
    const auto& dom = n["domain"];
    if (dom[0].is_string()) {
      std::vector<std::string> labels;
      for (const auto& v : dom) {
        require(v.is_string(), ErrorKind::parse, "node " + id + " mixes labels and integers in its domain");
        labels.push_back(v.get<std::string>());
      }
      d = Domain::labelled(labels);
    } else {
      for (const auto& v : dom) {
        require(v.is_number_integer(), ErrorKind::parse, "node " + id + " has a non-integer domain value");
        d.values.push_back(v.get<Value>());
      }
    }
    Raw r{id, {}, n.value("table", json::object())};
    if (n.contains("parents"))
      for (const auto& p : n["parents"]) r.parents.push_back(p.get<std::string>());
    m.dag.add_node(id);
    m.domains[id] = d;
    raws.push_back(std::move(r));
  }
  for (const auto& r : raws) {
    for (const auto& p : r.parents) {
      require(m.domains.count(p), ErrorKind::parse, "node " + r.id + " lists unknown parent " + p);
      m.dag.add_edge(p, r.id);
    }
    require(r.table.is_object(), ErrorKind::parse, "table of " + r.id + " must be an object keyed by parent values");
    scm::BasicCpt<P> c{r.parents, {}};
    std::size_t rows = 1;
    for (const auto& p : r.parents) rows *= m.domains[p].size();
    c.rows.resize(rows);
    std::set<std::size_t> filled;
    for (const auto& [key, probs] : r.table.items()) {
      std::vector<std::string> parts;
      if (!r.parents.empty()) {
        std::stringstream ss(key);
        std::string part;
        while (std::getline(ss, part, '|')) parts.push_back(part);
        if (!key.empty() && key.back() == '|') parts.push_back("");
      }
      require(parts.size() == r.parents.size(), ErrorKind::parse,
              "table key '" + key + "' of " + r.id + " does not match its " + std::to_string(r.parents.size()) +
                  " parents");
      std::size_t idx = 0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const Domain& pd = m.domains[r.parents[i]];
        auto k = pd.parse(parts[i]);
        require(k.has_value(), ErrorKind::parse,
                "table key '" + key + "' of " + r.id + " has value '" + parts[i] + "' outside the domain of " +
                    r.parents[i]);
        idx = idx * pd.size() + *k;
      }
      require(filled.insert(idx).second, ErrorKind::parse, "table of " + r.id + " repeats row '" + key + "'");
      require(probs.is_array(), ErrorKind::parse, "row '" + key + "' of " + r.id + " must be an array");
      for (const auto& p : probs) c.rows[idx].push_back(detail::parse_prob<P>(p));
    }
    require(filled.size() == rows, ErrorKind::parse,
            "table of " + r.id + " has " + std::to_string(filled.size()) + " rows, expected " + std::to_string(rows));
    m.cpts[r.id] = std::move(c);
  }
  return m;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, what + ": " + e.what());
  }
}

template <class P = double>
scm::BasicScm<P> load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::parse, "cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json<P>(parse_json_text(ss.str(), path));
}

// Canonical text: keys sorted, nodes in identifier order, probabilities
// with 17 significant digits.
template <class P>
std::string model_to_json(const scm::BasicScm<P>& m) {
  std::ostringstream os;
  os << "{\n  \"meta\": {\"description\": " << detail::quote(m.description) << ", \"name\": " << detail::quote(m.name)
     << "},\n  \"nodes\": [";
  bool first = true;
  for (const auto& id : m.dag.nodes()) {
    const Domain& d = m.domain(id);
    const auto& c = m.cpt(id);
    os << (first ? "\n" : ",\n") << "    {\"domain\": [";
    first = false;
    for (std::size_t i = 0; i < d.size(); ++i)
      os << (i ? ", " : "") << (d.labels.empty() ? std::to_string(d.values[i]) : detail::quote(d.labels[i]));
    os << "], \"id\": " << detail::quote(id) << ", \"parents\": [";
    for (std::size_t i = 0; i < c.parents.size(); ++i) os << (i ? ", " : "") << detail::quote(c.parents[i]);
    os << "], \"table\": {";
    std::map<std::string, std::size_t> keyed;
    for (std::size_t r = 0; r < c.rows.size(); ++r) keyed[scm::row_key(m, id, r)] = r;
    bool fr = true;
    for (const auto& [key, r] : keyed) {
      os << (fr ? "\n" : ",\n") << "      " << detail::quote(key) << ": [";
      fr = false;
      for (std::size_t v = 0; v < c.rows[r].size(); ++v) os << (v ? ", " : "") << detail::prob_text(c.rows[r][v]);
      os << "]";
    }
    os << (c.rows.empty() ? "}}" : "\n    }}");
  }
  os << "\n  ]\n}\n";
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

// Comma-separated with a header row. Columns named in `model` are matched
// against its domains; other columns must hold integers and get the sorted
// set of observed values as their domain.
inline scm::Dataset read_csv(std::istream& in, const scm::Scm* model = nullptr) {
  scm::Dataset d;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse, "dataset has no header row");
  d.columns = split_csv_line(line);
  const std::size_t k = d.columns.size();
  std::vector<bool> declared(k, false);
  d.domains.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    if (model && model->domains.count(d.columns[i])) {
      declared[i] = true;
      d.domains[i] = model->domain(d.columns[i]);
    }
  std::vector<std::set<Value>> seen(k);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    require(cells.size() == k, ErrorKind::parse,
            "line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(k));
    std::vector<Value> row(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (declared[i]) {
        auto idx = d.domains[i].parse(cells[i]);
        require(idx.has_value(), ErrorKind::parse,
                "line " + std::to_string(lineno) + ": '" + cells[i] + "' outside the domain of " + d.columns[i]);
        row[i] = d.domains[i].values[*idx];
      } else {
        try {
          std::size_t used = 0;
          row[i] = std::stoll(cells[i], &used);
          require(used == cells[i].size(), ErrorKind::parse, "trailing characters");
        } catch (const std::exception&) {
          fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": '" + cells[i] + "' is not an integer");
        }
        seen[i].insert(row[i]);
      }
    }
    d.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < k; ++i)
    if (!declared[i]) d.domains[i] = Domain(std::vector<Value>(seen[i].begin(), seen[i].end()));
  return d;
}

inline scm::Dataset read_csv_file(const std::string& path, const scm::Scm* model = nullptr) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::parse, "cannot open dataset " + path);
  return read_csv(in, model);
}

inline void write_csv(std::ostream& os, const scm::Dataset& d) {
  os << join(d.columns, ",") << "\n";
  for (const auto& row : d.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      auto idx = d.domains[i].index_of(row[i]);
      os << (idx ? d.domains[i].label(*idx) : std::to_string(row[i]));
    }
    os << "\n";
  }
}

}  // namespace causal::io
