#ifndef RISKCONTRACT_MODEL_HPP
#define RISKCONTRACT_MODEL_HPP

// Problem-instance data model: the risk network, the cost structure of both
// parties, and the Monte-Carlo controls. Everything downstream takes a
// validated Scenario by const reference.
//
// Orientation of A: entry A(i, j) scales the influence of node j's risk on
// node i's drift (row receives, column emits). With A = [2, 0.2; 0, 2] node 2
// pushes risk into node 1 and node 1 does not affect node 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskcontract {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class VolatilityKind { Zero, ConstantMatrix, StateScaled };

/// Diffusion coefficient of the risk SDE.
///   Zero:           Sigma(Y) = 0
///   ConstantMatrix: Sigma(Y) = D
///   StateScaled:    Sigma(Y) = D * diag(Y)
struct VolatilitySpec {
  VolatilityKind kind = VolatilityKind::Zero;
  Matrix D;

  Matrix sigma(const Vector& y) const {
    const auto n = y.size();
    switch (kind) {
      case VolatilityKind::Zero:
        return Matrix::Zero(n, n);
      case VolatilityKind::ConstantMatrix:
        return D;
      case VolatilityKind::StateScaled:
        return D * y.asDiagonal();
    }
    return Matrix::Zero(n, n);
  }

  // Sigma(Y) * dB without materializing Sigma.
  Vector apply(const Vector& y, const Vector& db) const {
    switch (kind) {
      case VolatilityKind::Zero:
        return Vector::Zero(y.size());
      case VolatilityKind::ConstantMatrix:
        return D * db;
      case VolatilityKind::StateScaled:
        return D * y.cwiseProduct(db);
    }
    return Vector::Zero(y.size());
  }

  bool operator==(const VolatilitySpec& o) const {
    if (kind != o.kind) return false;
    if (kind == VolatilityKind::Zero) return true;
    return D.rows() == o.D.rows() && D.cols() == o.D.cols() && D == o.D;
  }
};

struct RiskNetwork {
  int n = 0;
  Matrix A;
  Vector rho;
  Vector y0;
  VolatilitySpec volatility;

  bool operator==(const RiskNetwork& o) const {
    return n == o.n && A.rows() == o.A.rows() && A.cols() == o.A.cols() &&
           A == o.A && rho.size() == o.rho.size() && rho == o.rho &&
           y0.size() == o.y0.size() && y0 == o.y0 &&
           volatility == o.volatility;
  }
};

enum class EffortCostKind { LQ, Power, Tabulated };

/// Per-node scalar effort cost for the general (non-LQ) case, described by
/// its marginal f'(e), which must be strictly increasing with f'(0) >= 0.
///   Power:     f'(e) = coef * e^exponent, f(e) = coef * e^(exponent+1) / (exponent+1)
///   Tabulated: f' piecewise linear through (e_i, m_i), e_0 = 0, linear
///              continuation past the last knot; f is its exact integral.
struct MarginalCost {
  EffortCostKind kind = EffortCostKind::Power;
  double coef = 1.0;
  double exponent = 1.0;
  std::vector<double> table_e;
  std::vector<double> table_m;

  double marginal(double e) const {
    e = std::max(e, 0.0);
    if (kind == EffortCostKind::Power) return coef * std::pow(e, exponent);
    const std::size_t seg = segment(e);
    const double e0 = table_e[seg], e1 = table_e[seg + 1];
    const double m0 = table_m[seg], m1 = table_m[seg + 1];
    return m0 + (m1 - m0) * (e - e0) / (e1 - e0);
  }

  double cost(double e) const {
    e = std::max(e, 0.0);
    if (kind == EffortCostKind::Power) {
      return coef * std::pow(e, exponent + 1.0) / (exponent + 1.0);
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < table_e.size(); ++i) {
      const double a = table_e[i];
      const double b = (i + 2 == table_e.size()) ? std::max(e, a)
                                                  : std::min(e, table_e[i + 1]);
      if (b <= a) break;
      total += 0.5 * (b - a) * (marginal(a) + marginal(b));
    }
    return total;
  }

  /// Effort whose marginal cost equals zeta; zero when zeta <= f'(0).
  double inverse_marginal(double zeta) const {
    if (kind == EffortCostKind::Power) {
      if (zeta <= 0.0) return 0.0;
      return std::pow(zeta / coef, 1.0 / exponent);
    }
    if (zeta <= table_m.front()) return 0.0;
    std::size_t seg = table_m.size() - 2;
    for (std::size_t i = 0; i + 1 < table_m.size(); ++i) {
      if (zeta <= table_m[i + 1]) {
        seg = i;
        break;
      }
    }
    const double e0 = table_e[seg], e1 = table_e[seg + 1];
    const double m0 = table_m[seg], m1 = table_m[seg + 1];
    return e0 + (zeta - m0) * (e1 - e0) / (m1 - m0);
  }

  bool operator==(const MarginalCost& o) const {
    return kind == o.kind && coef == o.coef && exponent == o.exponent &&
           table_e == o.table_e && table_m == o.table_m;
  }

 private:
  std::size_t segment(double e) const {
    for (std::size_t i = 0; i + 2 < table_e.size(); ++i) {
      if (e < table_e[i + 1]) return i;
    }
    return table_e.size() - 2;
  }
};

struct CostSpec {
  double r = 0.0;         // discount rate
  double T = 1.0;         // horizon
  double jA_floor = 0.0;  // agent reservation value, <= 0
  Matrix R;               // LQ effort-cost matrix, f_{A,E}(E) = 1/2 E'RE
  double delta_A = 1.0;
  double delta_P = 2.0;
  double gamma = -1.0;    // h_A(M) = gamma * M
  EffortCostKind effort_cost_kind = EffortCostKind::LQ;
  MarginalCost marginal;  // used when effort_cost_kind != LQ
  double p_max = 10.0;
  Vector e_max;           // empty: derived from the suggested effort

  bool is_lq() const { return effort_cost_kind == EffortCostKind::LQ; }

  /// Agent effort cost f_{A,E}(E).
  double effort_cost(const Vector& e) const {
    if (is_lq()) return 0.5 * e.dot(R * e);
    double total = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) total += marginal.cost(e(i));
    return total;
  }

  bool operator==(const CostSpec& o) const {
    return r == o.r && T == o.T && jA_floor == o.jA_floor &&
           R.rows() == o.R.rows() && R.cols() == o.R.cols() && R == o.R &&
           delta_A == o.delta_A && delta_P == o.delta_P && gamma == o.gamma &&
           effort_cost_kind == o.effort_cost_kind &&
           (is_lq() || marginal == o.marginal) && p_max == o.p_max &&
           e_max.size() == o.e_max.size() && e_max == o.e_max;
  }
};

struct SimConfig {
  double dt = 1e-3;
  int n_paths = 10000;
  std::uint64_t seed = 42;
  double vol_cap = std::numeric_limits<double>::infinity();

  bool operator==(const SimConfig& o) const {
    return dt == o.dt && n_paths == o.n_paths && seed == o.seed &&
           vol_cap == o.vol_cap;
  }
};

struct Scenario {
  RiskNetwork network;
  CostSpec costs;
  SimConfig sim;

  int n() const { return network.n; }

  /// Number of uniform steps on [0, T]; the effective step is T / steps().
  int steps() const {
    return static_cast<int>(std::ceil(costs.T / sim.dt - 1e-9));
  }
  double step_size() const { return costs.T / steps(); }

  bool operator==(const Scenario& o) const {
    return network == o.network && costs == o.costs && sim == o.sim;
  }
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario text. `line` is 1-based, 0 when not tied to a line.
class ParseError : public ScenarioError {
 public:
  ParseError(int line, std::string key, const std::string& what)
      : ScenarioError(format(line, key, what)), line_(line), key_(std::move(key)) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(int line, const std::string& key, const std::string& what) {
    std::ostringstream os;
    os << "parse error";
    if (line > 0) os << " at line " << line;
    if (!key.empty()) os << " (key '" << key << "')";
    os << ": " << what;
    return os.str();
  }
  int line_;
  std::string key_;
};

class ValidationError : public ScenarioError {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : ScenarioError(format(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string format(const std::vector<std::string>& v) {
    std::string out = "invalid scenario:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

/// Integration or solve produced non-finite or otherwise unusable numbers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool is_square(const Matrix& m, int n) {
  return m.rows() == n && m.cols() == n;
}

}  // namespace detail

/// Checks every invariant of the data model. Empty result means valid.
inline std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> out;
  const auto& net = s.network;
  const auto& c = s.costs;
  const int n = net.n;

  if (n < 1) {
    out.emplace_back("n must be a positive integer");
    return out;
  }
  if (!detail::is_square(net.A, n)) {
    out.emplace_back("A must be " + std::to_string(n) + "x" + std::to_string(n));
  } else {
    if (!detail::all_finite(net.A)) out.emplace_back("A must be finite");
    bool neg = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && net.A(i, j) < 0.0) neg = true;
    if (neg) out.emplace_back("A off-diagonal entries must be non-negative");
  }
  if (net.rho.size() != n) {
    out.emplace_back("rho must have " + std::to_string(n) + " entries");
  } else if (!net.rho.allFinite() || (net.rho.array() < 0.0).any()) {
    out.emplace_back("rho must be finite and non-negative");
  }
  if (net.y0.size() != n) {
    out.emplace_back("y0 must have " + std::to_string(n) + " entries");
  } else if (!net.y0.allFinite() || (net.y0.array() <= 0.0).any()) {
    out.emplace_back("y0 must be strictly positive");
  }
  if (net.volatility.kind != VolatilityKind::Zero) {
    if (!detail::is_square(net.volatility.D, n)) {
      out.emplace_back("volatility D must be " + std::to_string(n) + "x" +
                       std::to_string(n));
    } else if (!detail::all_finite(net.volatility.D)) {
      out.emplace_back("volatility D must be finite");
    }
  }

  if (!(std::isfinite(c.r) && c.r >= 0.0)) out.emplace_back("discount_rate must be >= 0");
  if (!(std::isfinite(c.T) && c.T > 0.0)) out.emplace_back("horizon must be > 0");
  if (!(std::isfinite(c.jA_floor) && c.jA_floor <= 0.0))
    out.emplace_back("ja_floor must be <= 0");
  if (!(std::isfinite(c.delta_A) && c.delta_A > 0.0)) out.emplace_back("delta_a must be > 0");
  if (!(std::isfinite(c.delta_P) && c.delta_P > 0.0)) out.emplace_back("delta_p must be > 0");
  if (!(std::isfinite(c.gamma) && c.gamma < 0.0)) out.emplace_back("gamma must be < 0");
  if (!(std::isfinite(c.p_max) && c.p_max >= 0.0)) out.emplace_back("p_max must be >= 0");
  if (c.e_max.size() != 0) {
    if (c.e_max.size() != n) {
      out.emplace_back("e_max must have " + std::to_string(n) + " entries");
    } else if (!c.e_max.allFinite() || (c.e_max.array() <= 0.0).any()) {
      out.emplace_back("e_max must be finite and > 0");
    }
  }

  if (c.is_lq()) {
    if (!detail::is_square(c.R, n)) {
      out.emplace_back("R must be " + std::to_string(n) + "x" + std::to_string(n));
    } else if (!detail::all_finite(c.R)) {
      out.emplace_back("R must be finite");
    } else {
      if ((c.R - c.R.transpose()).cwiseAbs().maxCoeff() >
          1e-12 * std::max(1.0, c.R.cwiseAbs().maxCoeff())) {
        out.emplace_back("R not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c.R + c.R.transpose()));
      if (eig.eigenvalues().minCoeff() <= 0.0) out.emplace_back("R not positive definite");
    }
  } else if (c.effort_cost_kind == EffortCostKind::Power) {
    if (!(std::isfinite(c.marginal.coef) && c.marginal.coef > 0.0))
      out.emplace_back("power_coef must be > 0");
    if (!(std::isfinite(c.marginal.exponent) && c.marginal.exponent > 0.0))
      out.emplace_back("power_exponent must be > 0");
  } else {
    const auto& te = c.marginal.table_e;
    const auto& tm = c.marginal.table_m;
    if (te.size() < 2 || te.size() != tm.size()) {
      out.emplace_back("marginal_table needs at least two (effort, marginal) rows");
    } else {
      bool ok = te.front() == 0.0 && tm.front() >= 0.0;
      for (std::size_t i = 0; i + 1 < te.size(); ++i) {
        if (!(te[i + 1] > te[i]) || !(tm[i + 1] > tm[i])) ok = false;
      }
      for (std::size_t i = 0; i < te.size(); ++i)
        if (!std::isfinite(te[i]) || !std::isfinite(tm[i])) ok = false;
      if (!ok) {
        out.emplace_back(
            "marginal_table must start at effort 0 with a non-negative marginal "
            "and be strictly increasing in both columns");
      }
    }
  }

  if (!(std::isfinite(s.sim.dt) && s.sim.dt > 0.0)) out.emplace_back("dt must be > 0");
  else if (std::isfinite(c.T) && !(s.sim.dt < c.T)) out.emplace_back("dt must be < horizon");
  if (s.sim.n_paths < 1) out.emplace_back("n_paths must be >= 1");
  if (!(s.sim.vol_cap > 0.0)) out.emplace_back("vol_cap must be > 0");
  return out;
}

inline void require_valid(const Scenario& s) {
  auto v = validate_scenario(s);
  if (!v.empty()) throw ValidationError(std::move(v));
}

}  // namespace riskcontract

#endif  // RISKCONTRACT_MODEL_HPP
