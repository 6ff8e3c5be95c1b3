#ifndef RISKCONTRACT_LQ_HPP
#define RISKCONTRACT_LQ_HPP

// Optimal contract in the linear-quadratic setting.
//
// The principal's value is linear in the risk, V(t, Y) = K_t' Y + m_t, with
//
//   dK/dt + (A - rI)' K + rho = 0,            K_T = rho
//   dm/dt - r m - 1/2 K' R^{-1} K = 0,        m_T = 0
//
// The contract gain is zeta_t = K_t, the suggested effort E*_t = R^{-1} K_t,
// and the principal's optimal cost is K_0' y0 + m_0 - J_A_floor.

#include "riskcontract/format.hpp"
#include "riskcontract/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <optional>
#include <ostream>

namespace riskcontract::lq {

/// K sampled on a uniform grid; row k of K is K(t[k]).
struct KPath {
  std::vector<double> t;
  Matrix K;
};

struct LQSolution {
  std::vector<double> grid;
  Matrix K;       // (steps+1) x n
  Vector m;       // steps+1
  Matrix E_star;  // (steps+1) x n
  double J_P_star = 0.0;
};

enum class PaymentRegimeTag { NoIntermediatePayment, UnboundedImpractical, TimeDependentDegenerate };

struct PaymentRegime {
  PaymentRegimeTag tag = PaymentRegimeTag::NoIntermediatePayment;
  std::optional<double> switch_time;
};

/// One grid point of the optimal payment process
///   dc = (r c + drift) dt + gain' (dY - A Y dt)
struct ContractCoefficient {
  double t = 0.0;
  double drift = 0.0;  // -1/2 K' R^{-1} K
  Vector gain;         // -K
};

struct ContractCoefficients {
  double c0 = 0.0;
  double r = 0.0;
  std::vector<ContractCoefficient> points;
};

inline std::vector<double> uniform_grid(double T, int steps) {
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) t[k] = T * static_cast<double>(k) / steps;
  t.back() = T;
  return t;
}

namespace detail {

inline Matrix shifted_transpose(const Scenario& s) {
  const int n = s.n();
  return (s.network.A - s.costs.r * Matrix::Identity(n, n)).transpose();
}

inline void require_lq(const Scenario& s) {
  if (!s.costs.is_lq()) throw ScenarioError("LQ solver requires effort_cost = lq");
}

}  // namespace detail

/// Integrates the K-ODE backward from K_T = rho with fixed-step RK4.
inline KPath solve_K(const Scenario& s, int steps) {
  if (steps < 1) throw std::invalid_argument("solve_K: steps must be positive");
  const Matrix B = detail::shifted_transpose(s);
  const Vector& rho = s.network.rho;
  const double h = s.costs.T / steps;

  KPath out;
  out.t = uniform_grid(s.costs.T, steps);
  out.K.resize(steps + 1, s.n());
  out.K.row(steps) = rho.transpose();

  // In reversed time tau = T - t: dK/dtau = B K + rho.
  auto f = [&](const Vector& k) -> Vector { return B * k + rho; };
  Vector k = rho;
  for (int i = steps - 1; i >= 0; --i) {
    const Vector k1 = f(k);
    const Vector k2 = f(k + 0.5 * h * k1);
    const Vector k3 = f(k + 0.5 * h * k2);
    const Vector k4 = f(k + h * k3);
    k += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!k.allFinite()) {
      throw NumericalError("solve_K: non-finite K at t = " + format_number(out.t[i]));
    }
    out.K.row(i) = k.transpose();
  }
  return out;
}

/// Integrates the m-ODE backward from m_T = 0. The K stage values inside each
/// RK4 step are propagated from the K path's node value, so the scheme stays
/// fourth order without needing K at half steps.
inline Vector solve_m(const Scenario& s, const KPath& path) {
  detail::require_lq(s);
  const int steps = static_cast<int>(path.t.size()) - 1;
  if (steps < 1 || path.K.rows() != steps + 1 || path.K.cols() != s.n() ||
      std::abs(path.t.back() - s.costs.T) > 1e-12 * s.costs.T || path.t.front() != 0.0) {
    throw std::invalid_argument("solve_m: K path grid does not match the scenario");
  }
  const Matrix B = detail::shifted_transpose(s);
  const Vector& rho = s.network.rho;
  const double r = s.costs.r;
  const double h = s.costs.T / steps;
  const Eigen::LDLT<Matrix> ldlt(s.costs.R);

  auto fk = [&](const Vector& k) -> Vector { return B * k + rho; };
  auto fm = [&](const Vector& k, double m) { return -r * m - 0.5 * k.dot(ldlt.solve(k)); };

  Vector m(steps + 1);
  m(steps) = 0.0;
  double mv = 0.0;
  for (int i = steps - 1; i >= 0; --i) {
    const Vector k = path.K.row(i + 1).transpose();
    const Vector a1 = fk(k);
    const double b1 = fm(k, mv);
    const Vector ks2 = k + 0.5 * h * a1;
    const Vector a2 = fk(ks2);
    const double b2 = fm(ks2, mv + 0.5 * h * b1);
    const Vector ks3 = k + 0.5 * h * a2;
    const Vector a3 = fk(ks3);
    const double b3 = fm(ks3, mv + 0.5 * h * b2);
    const Vector ks4 = k + h * a3;
    const double b4 = fm(ks4, mv + h * b3);
    mv += (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    if (!std::isfinite(mv)) {
      throw NumericalError("solve_m: non-finite m at t = " + format_number(path.t[i]));
    }
    m(i) = mv;
  }
  return m;
}

/// Scalar closed form K_t = rho/(A-r) ((A-r+1) e^{(A-r)(T-t)} - 1), with the
/// limit rho (1 + T - t) when |A - r| < 1e-9.
inline double closed_form_K_scalar(double A, double rho, double r, double T, double t) {
  const double a = A - r;
  if (std::abs(a) < 1e-9) return rho * (1.0 + T - t);
  return rho / a * ((a + 1.0) * std::exp(a * (T - t)) - 1.0);
}

/// Network closed form K_t = B^{-1} ((B + I) e^{B (T-t)} - I) rho with
/// B = (A - rI)'. Throws NumericalError when B is singular.
inline Vector closed_form_K_matrix(const Scenario& s, double t) {
  const int n = s.n();
  const Matrix B = detail::shifted_transpose(s);
  const Eigen::FullPivLU<Matrix> lu(B);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) {
    throw NumericalError("closed_form_K_matrix: (A - rI) is singular; use solve_K");
  }
  const Matrix I = Matrix::Identity(n, n);
  const Matrix expo = (B * (s.costs.T - t)).exp();
  return lu.solve(((B + I) * expo - I) * s.network.rho);
}

/// Suggested effort E* = R^{-1} K on every grid row.
inline Matrix optimal_effort(const Matrix& K, const Matrix& R) {
  const Eigen::LDLT<Matrix> ldlt(R);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericalError("optimal_effort: R not positive definite");
  Matrix E = ldlt.solve(K.transpose()).transpose();
  if (!E.allFinite()) throw NumericalError("optimal_effort: non-finite effort");
  return E;
}

inline double principal_cost(const Vector& K0, double m0, const Vector& y0, double jA_floor) {
  return K0.dot(y0) + m0 - jA_floor;
}

/// Classifies the optimal intermediate payment by delta_P - delta_A:
///   >= 1     no intermediate payment
///   <= 0     positively unbounded payment
///   (0, 1)   zero before the switch time, unbounded after; the switch time
///            solves e^{-r(T-t)} = delta_P - delta_A, clamped to [0, T].
inline PaymentRegime payment_regime(double delta_P, double delta_A, double r, double T) {
  const double gap = delta_P - delta_A;
  if (gap >= 1.0) return {PaymentRegimeTag::NoIntermediatePayment, std::nullopt};
  if (gap <= 0.0) return {PaymentRegimeTag::UnboundedImpractical, std::nullopt};
  double ts = 0.0;
  if (r > 0.0) ts = std::clamp(T + std::log(gap) / r, 0.0, T);
  return {PaymentRegimeTag::TimeDependentDegenerate, ts};
}

inline std::string to_string(PaymentRegimeTag tag) {
  switch (tag) {
    case PaymentRegimeTag::NoIntermediatePayment: return "no_intermediate_payment";
    case PaymentRegimeTag::UnboundedImpractical: return "unbounded_impractical";
    case PaymentRegimeTag::TimeDependentDegenerate: return "time_dependent_degenerate";
  }
  return "unknown";
}

/// Max |dK/dt + (A - rI)'K + rho| over interior nodes, with dK/dt from the
/// five-point centered stencil (nodes 2 .. steps-2).
inline double K_residual(const Scenario& s, const KPath& path) {
  const int steps = static_cast<int>(path.t.size()) - 1;
  if (steps < 4) return 0.0;
  const double h = path.t[1] - path.t[0];
  const Matrix B = detail::shifted_transpose(s);
  double worst = 0.0;
  for (int k = 2; k <= steps - 2; ++k) {
    const Vector dk = (-path.K.row(k + 2) + 8.0 * path.K.row(k + 1) -
                       8.0 * path.K.row(k - 1) + path.K.row(k - 2)).transpose() / (12.0 * h);
    const Vector res = dk + B * path.K.row(k).transpose() + s.network.rho;
    worst = std::max(worst, res.cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Max |dm/dt - r m - 1/2 K'R^{-1}K| over interior nodes (five-point stencil).
inline double m_residual(const Scenario& s, const KPath& path, const Vector& m) {
  const int steps = static_cast<int>(path.t.size()) - 1;
  if (steps < 4) return 0.0;
  const double h = path.t[1] - path.t[0];
  const Eigen::LDLT<Matrix> ldlt(s.costs.R);
  double worst = 0.0;
  for (int k = 2; k <= steps - 2; ++k) {
    const double dm = (-m(k + 2) + 8.0 * m(k + 1) - 8.0 * m(k - 1) + m(k - 2)) / (12.0 * h);
    const Vector kk = path.K.row(k).transpose();
    const double res = dm - s.costs.r * m(k) - 0.5 * kk.dot(ldlt.solve(kk));
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

/// Full LQ solve on `steps` uniform intervals. Requires LQ costs and gamma = -1
/// (terminal cost h_A(M) = -M).
inline LQSolution solve_lq(const Scenario& s, int steps) {
  require_valid(s);
  detail::require_lq(s);
  if (s.costs.gamma != -1.0) {
    throw ScenarioError("LQ solver requires gamma = -1 (h_A(M) = -M)");
  }
  KPath path = solve_K(s, steps);
  LQSolution sol;
  sol.m = solve_m(s, path);
  sol.E_star = optimal_effort(path.K, s.costs.R);
  sol.J_P_star = principal_cost(path.K.row(0).transpose(), sol.m(0), s.network.y0,
                                s.costs.jA_floor);
  sol.grid = std::move(path.t);
  sol.K = std::move(path.K);
  return sol;
}

/// Solve on the scenario's simulation grid.
inline LQSolution solve_lq(const Scenario& s) { return solve_lq(s, s.steps()); }

inline ContractCoefficients contract_coefficients(const LQSolution& sol, const Scenario& s) {
  const Eigen::LDLT<Matrix> ldlt(s.costs.R);
  ContractCoefficients out;
  out.r = s.costs.r;
  out.c0 = -s.costs.jA_floor / std::abs(s.costs.gamma);
  out.points.reserve(sol.grid.size());
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    const Vector kk = sol.K.row(static_cast<Eigen::Index>(k)).transpose();
    out.points.push_back({sol.grid[k], -0.5 * kk.dot(ldlt.solve(kk)), -kk});
  }
  return out;
}

/// CSV: t, K_1..K_n, m, E_1..E_n.
inline void write_csv(std::ostream& os, const LQSolution& sol) {
  const auto n = sol.K.cols();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",K_" << i + 1;
  os << ",m";
  for (Eigen::Index i = 0; i < n; ++i) os << ",E_" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    os << format_number(sol.grid[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << "," << format_number(sol.K(row, i));
    os << "," << format_number(sol.m(row));
    for (Eigen::Index i = 0; i < n; ++i) os << "," << format_number(sol.E_star(row, i));
    os << "\n";
  }
}

}  // namespace riskcontract::lq

#endif  // RISKCONTRACT_LQ_HPP
