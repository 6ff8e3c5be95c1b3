#ifndef RISKCONTRACT_SCENARIO_IO_HPP
#define RISKCONTRACT_SCENARIO_IO_HPP

// Scenario file reader/writer. Grammar (see README for the full key list):
//
//   document := { blank | comment | section | entry }
//   comment  := '#' ...            (also allowed after a value)
//   section  := '[' ('network' | 'costs' | 'sim') ']'
//   entry    := key '=' value
//   matrix   := row { ';' row }    row := number { ',' number }
//
// Vectors may be written as one row or one column. Keys are lower_snake_case,
// unknown or duplicated keys are errors.

#include "riskcontract/format.hpp"
#include "riskcontract/model.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>

namespace riskcontract {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(std::string_view(s).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

struct Entry {
  std::string value;
  int line = 0;
};

class EntryTable {
 public:
  void add(const std::string& section, const std::string& key, Entry e) {
    auto& sec = sections_[section];
    if (sec.count(key)) throw ParseError(e.line, key, "duplicate key");
    sec.emplace(key, std::move(e));
  }

  std::optional<Entry> take(const std::string& section, const std::string& key) {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return std::nullopt;
    auto it = sit->second.find(key);
    if (it == sit->second.end()) return std::nullopt;
    Entry e = it->second;
    sit->second.erase(it);
    return e;
  }

  Entry require(const std::string& section, const std::string& key) {
    auto e = take(section, key);
    if (!e) throw ParseError(0, key, "missing required key in [" + section + "]");
    return *e;
  }

  void reject_leftovers() const {
    for (const auto& [sec, entries] : sections_) {
      if (!entries.empty()) {
        const auto& [key, e] = *entries.begin();
        throw ParseError(e.line, key, "unknown key in [" + sec + "]");
      }
    }
  }

 private:
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

inline double parse_number(const std::string& text, const Entry& e, const std::string& key) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError(e.line, key, "empty number");
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(e.line, key, "not a number: '" + t + "'");
  }
  return v;
}

inline Matrix parse_matrix(const Entry& e, const std::string& key) {
  const auto rows = split(e.value, ';');
  std::vector<std::vector<double>> data;
  for (const auto& row : rows) {
    std::vector<double> r;
    for (const auto& cell : split(row, ',')) r.push_back(parse_number(cell, e, key));
    data.push_back(std::move(r));
  }
  const std::size_t cols = data.front().size();
  for (const auto& r : data) {
    if (r.size() != cols) throw ParseError(e.line, key, "ragged matrix rows");
  }
  Matrix m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = data[i][j];
  return m;
}

inline Vector parse_vector(const Entry& e, const std::string& key) {
  Matrix m = parse_matrix(e, key);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw ParseError(e.line, key, "expected a vector (one row or one column)");
}

inline long long parse_integer(const Entry& e, const std::string& key) {
  const std::string t = trim(e.value);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ParseError(e.line, key, "not an integer: '" + t + "'");
  }
  return v;
}

inline std::uint64_t parse_unsigned(const Entry& e, const std::string& key) {
  const std::string t = trim(e.value);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ParseError(e.line, key, "not an unsigned integer: '" + t + "'");
  }
  return v;
}

inline std::string fmt(double v) { return format_number(v); }

inline std::string fmt(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += fmt(m(i, j));
    }
  }
  return out;
}

inline std::string fmt_row(const Vector& v) { return fmt(Matrix(v.transpose())); }

}  // namespace detail

/// Parses and validates a scenario document.
///
/// Defaults: volatility = zero, delta_a = 1, delta_p = 2, gamma = -1,
/// effort_cost = lq, p_max = 10, dt = 1e-3, n_paths = 10000, seed = 42,
/// vol_cap = inf. Throws ParseError on malformed text and ValidationError
/// listing every violated invariant.
inline Scenario load_scenario(std::string_view text) {
  using namespace detail;
  static const std::set<std::string> kSections = {"network", "costs", "sim"};
  EntryTable table;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "", "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!kSections.count(section)) {
        throw ParseError(line_no, "", "unknown section [" + section + "]");
      }
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(line_no, "", "expected 'key = value'");
      std::string key = trim(std::string_view(line).substr(0, eq));
      std::string value = trim(std::string_view(line).substr(eq + 1));
      if (section.empty()) throw ParseError(line_no, key, "entry outside of a section");
      if (key.empty()) throw ParseError(line_no, "", "empty key");
      for (char ch : key) {
        if (!(std::islower(static_cast<unsigned char>(ch)) ||
              std::isdigit(static_cast<unsigned char>(ch)) || ch == '_')) {
          throw ParseError(line_no, key, "keys must be lower_snake_case");
        }
      }
      if (value.empty()) throw ParseError(line_no, key, "empty value");
      table.add(section, key, Entry{value, line_no});
    }
    if (nl == text.size()) break;
  }

  Scenario s;
  auto& net = s.network;
  auto& c = s.costs;

  // [network]
  net.A = parse_matrix(table.require("network", "a"), "a");
  net.rho = parse_vector(table.require("network", "rho"), "rho");
  net.y0 = parse_vector(table.require("network", "y0"), "y0");
  net.n = static_cast<int>(net.y0.size());
  if (auto e = table.take("network", "n")) {
    const auto n = parse_integer(*e, "n");
    if (n != net.n) throw ParseError(e->line, "n", "does not match the length of y0");
  }
  if (auto e = table.take("network", "volatility")) {
    const auto v = trim(e->value);
    if (v == "zero") net.volatility.kind = VolatilityKind::Zero;
    else if (v == "constant") net.volatility.kind = VolatilityKind::ConstantMatrix;
    else if (v == "state_scaled") net.volatility.kind = VolatilityKind::StateScaled;
    else throw ParseError(e->line, "volatility", "expected zero | constant | state_scaled");
  }
  if (auto e = table.take("network", "d")) {
    net.volatility.D = parse_matrix(*e, "d");
  } else if (net.volatility.kind != VolatilityKind::Zero) {
    throw ParseError(0, "d", "required when volatility is not zero");
  }
  if (net.volatility.kind == VolatilityKind::Zero) net.volatility.D = Matrix();

  // [costs]
  {
    auto e = table.require("costs", "discount_rate");
    c.r = parse_number(e.value, e, "discount_rate");
  }
  {
    auto e = table.require("costs", "horizon");
    c.T = parse_number(e.value, e, "horizon");
  }
  {
    auto e = table.require("costs", "ja_floor");
    c.jA_floor = parse_number(e.value, e, "ja_floor");
  }
  if (auto e = table.take("costs", "effort_cost")) {
    const auto v = trim(e->value);
    if (v == "lq") c.effort_cost_kind = EffortCostKind::LQ;
    else if (v == "power") c.effort_cost_kind = EffortCostKind::Power;
    else if (v == "tabulated") c.effort_cost_kind = EffortCostKind::Tabulated;
    else throw ParseError(e->line, "effort_cost", "expected lq | power | tabulated");
  }
  if (c.is_lq()) {
    c.R = parse_matrix(table.require("costs", "effort_cost_matrix"), "effort_cost_matrix");
  } else if (c.effort_cost_kind == EffortCostKind::Power) {
    c.marginal.kind = EffortCostKind::Power;
    auto ec = table.require("costs", "power_coef");
    c.marginal.coef = parse_number(ec.value, ec, "power_coef");
    auto ex = table.require("costs", "power_exponent");
    c.marginal.exponent = parse_number(ex.value, ex, "power_exponent");
  } else {
    c.marginal.kind = EffortCostKind::Tabulated;
    Matrix tab = parse_matrix(table.require("costs", "marginal_table"), "marginal_table");
    if (tab.cols() != 2) throw ParseError(0, "marginal_table", "rows must be 'effort, marginal'");
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
      c.marginal.table_e.push_back(tab(i, 0));
      c.marginal.table_m.push_back(tab(i, 1));
    }
  }
  auto optional_number = [&](const char* sec, const char* key, double& dst) {
    if (auto e = table.take(sec, key)) dst = parse_number(e->value, *e, key);
  };
  optional_number("costs", "delta_a", c.delta_A);
  optional_number("costs", "delta_p", c.delta_P);
  optional_number("costs", "gamma", c.gamma);
  optional_number("costs", "p_max", c.p_max);
  if (auto e = table.take("costs", "e_max")) c.e_max = parse_vector(*e, "e_max");

  // [sim]
  optional_number("sim", "dt", s.sim.dt);
  if (auto e = table.take("sim", "n_paths")) {
    const auto v = parse_integer(*e, "n_paths");
    if (v < 0 || v > std::numeric_limits<int>::max())
      throw ParseError(e->line, "n_paths", "out of range");
    s.sim.n_paths = static_cast<int>(v);
  }
  if (auto e = table.take("sim", "seed")) s.sim.seed = parse_unsigned(*e, "seed");
  if (auto e = table.take("sim", "vol_cap")) {
    const auto v = trim(e->value);
    s.sim.vol_cap = (v == "inf") ? std::numeric_limits<double>::infinity()
                                 : parse_number(v, *e, "vol_cap");
    if (std::isnan(s.sim.vol_cap)) throw ParseError(e->line, "vol_cap", "not a number");
  }

  table.reject_leftovers();
  require_valid(s);
  return s;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

/// Writes a document that load_scenario maps back to an identical Scenario.
inline std::string serialize_scenario(const Scenario& s) {
  using detail::fmt;
  using detail::fmt_row;
  std::ostringstream os;
  const auto& net = s.network;
  const auto& c = s.costs;
  os << "[network]\n";
  os << "n = " << net.n << "\n";
  os << "a = " << fmt(net.A) << "\n";
  os << "rho = " << fmt_row(net.rho) << "\n";
  os << "y0 = " << fmt_row(net.y0) << "\n";
  switch (net.volatility.kind) {
    case VolatilityKind::Zero:
      os << "volatility = zero\n";
      break;
    case VolatilityKind::ConstantMatrix:
      os << "volatility = constant\n" << "d = " << fmt(net.volatility.D) << "\n";
      break;
    case VolatilityKind::StateScaled:
      os << "volatility = state_scaled\n" << "d = " << fmt(net.volatility.D) << "\n";
      break;
  }
  os << "\n[costs]\n";
  os << "discount_rate = " << fmt(c.r) << "\n";
  os << "horizon = " << fmt(c.T) << "\n";
  os << "ja_floor = " << fmt(c.jA_floor) << "\n";
  switch (c.effort_cost_kind) {
    case EffortCostKind::LQ:
      os << "effort_cost = lq\n" << "effort_cost_matrix = " << fmt(c.R) << "\n";
      break;
    case EffortCostKind::Power:
      os << "effort_cost = power\n"
         << "power_coef = " << fmt(c.marginal.coef) << "\n"
         << "power_exponent = " << fmt(c.marginal.exponent) << "\n";
      break;
    case EffortCostKind::Tabulated: {
      os << "effort_cost = tabulated\nmarginal_table = ";
      for (std::size_t i = 0; i < c.marginal.table_e.size(); ++i) {
        if (i) os << "; ";
        os << fmt(c.marginal.table_e[i]) << ", " << fmt(c.marginal.table_m[i]);
      }
      os << "\n";
      break;
    }
  }
  os << "delta_a = " << fmt(c.delta_A) << "\n";
  os << "delta_p = " << fmt(c.delta_P) << "\n";
  os << "gamma = " << fmt(c.gamma) << "\n";
  os << "p_max = " << fmt(c.p_max) << "\n";
  if (c.e_max.size() != 0) os << "e_max = " << fmt_row(c.e_max) << "\n";
  os << "\n[sim]\n";
  os << "dt = " << fmt(s.sim.dt) << "\n";
  os << "n_paths = " << s.sim.n_paths << "\n";
  os << "seed = " << s.sim.seed << "\n";
  os << "vol_cap = " << fmt(s.sim.vol_cap) << "\n";
  return os.str();
}

}  // namespace riskcontract

#endif  // RISKCONTRACT_SCENARIO_IO_HPP
