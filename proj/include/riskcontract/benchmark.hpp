#ifndef RISKCONTRACT_BENCHMARK_HPP
#define RISKCONTRACT_BENCHMARK_HPP

// Full-information baseline. When the principal observes effort, the team
// optimum prescribes E^b = R^{-1} K and pays
//
//   dc^b = (r c^b + 1/2 K' R^{-1} K) dt,     c^b_0 = -J_A_floor,
//
// implemented against a self-interested agent by a penalty gain Gamma = K on
// the observed effort gap. The information rent is J_P(hidden) - J_P(full).

#include "riskcontract/agent.hpp"
#include "riskcontract/format.hpp"
#include "riskcontract/hjb.hpp"
#include "riskcontract/lq.hpp"
#include "riskcontract/model.hpp"
#include "riskcontract/sim.hpp"

#include <ostream>

namespace riskcontract::benchmark {

struct FullInfoSolution {
  std::vector<double> grid;
  Matrix E_b;        // (steps+1) x n
  Vector c_b_drift;  // 1/2 K' R^{-1} K
  Matrix Gamma;      // penalty gain, empty for the team contract
  Vector p_b;        // zero
  Matrix K;
  double c0_b = 0.0;
  double J_P_full = 0.0;
};

namespace detail {

// Full-information principal cost by forward RK4 on the expected risk
//   y' = A y - E_b(t),   J = int e^{-rt}(rho'y + 1/2 E_b'R E_b) dt + e^{-rT} rho'y_T - J_A_floor.
// K is solved on a grid of twice the resolution so stage midpoints are nodes.
inline double full_info_cost(const Scenario& s, int steps) {
  const auto& net = s.network;
  const auto& c = s.costs;
  const lq::KPath half = lq::solve_K(s, 2 * steps);
  const Eigen::LDLT<Matrix> ldlt(c.R);
  const double h = c.T / steps;
  const int n = s.n();
  // State (y, running cost).
  auto rhs = [&](int node, const Vector& y, double t) {
    const Vector k = half.K.row(node).transpose();
    const Vector e = ldlt.solve(k);
    Vector d(n + 1);
    d.head(n) = net.A * y - e;
    d(n) = std::exp(-c.r * t) * (net.rho.dot(y) + 0.5 * e.dot(c.R * e));
    return d;
  };
  Vector x(n + 1);
  x.head(n) = net.y0;
  x(n) = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = half.t[2 * k];
    const Vector y = x.head(n);
    const Vector k1 = rhs(2 * k, y, t);
    const Vector k2 = rhs(2 * k + 1, y + 0.5 * h * k1.head(n), t + 0.5 * h);
    const Vector k3 = rhs(2 * k + 1, y + 0.5 * h * k2.head(n), t + 0.5 * h);
    const Vector k4 = rhs(2 * k + 2, y + h * k3.head(n), t + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x(n) + std::exp(-c.r * c.T) * net.rho.dot(x.head(n)) - c.jA_floor;
}

}  // namespace detail

/// Team-optimal contract from the LQ solution on the scenario grid.
inline FullInfoSolution team_optimal(const Scenario& s) {
  const auto sol = lq::solve_lq(s);
  const Eigen::LDLT<Matrix> ldlt(s.costs.R);
  FullInfoSolution f;
  f.grid = sol.grid;
  f.K = sol.K;
  f.E_b = sol.E_star;
  f.c_b_drift.resize(sol.K.rows());
  for (Eigen::Index k = 0; k < sol.K.rows(); ++k) {
    const Vector kk = sol.K.row(k).transpose();
    f.c_b_drift(k) = 0.5 * kk.dot(ldlt.solve(kk));
  }
  f.p_b = Vector::Zero(sol.K.rows());
  f.c0_b = -s.costs.jA_floor;
  f.J_P_full = detail::full_info_cost(s, s.steps());
  return f;
}

/// Team contract with the penalty gain Gamma = K.
inline FullInfoSolution implementable_contract(const Scenario& s) {
  FullInfoSolution f = team_optimal(s);
  f.Gamma = f.K;
  return f;
}

/// Realised team payment c^b on the grid (deterministic), integrated with
/// the same exponential step as the contract simulator.
inline Vector team_payment_path(const FullInfoSolution& f, double r) {
  const auto steps = static_cast<Eigen::Index>(f.grid.size()) - 1;
  Vector c(steps + 1);
  c(0) = f.c0_b;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double dt = f.grid[k + 1] - f.grid[k];
    c(k + 1) = std::exp(r * dt) * (c(k) + f.c_b_drift(k) * dt);
  }
  return c;
}

/// The implementable full-information contract as a simulator policy.
/// With `with_sensitivity` false the zeta term is dropped, leaving only the
/// penalty on observed effort.
inline sim::ContractPolicy full_info_contract(const FullInfoSolution& f, const Scenario& s,
                                              bool with_sensitivity = true) {
  sim::ContractPolicy c;
  c.zeta = with_sensitivity ? f.K : Matrix::Zero(f.K.rows(), f.K.cols());
  c.p = f.p_b;
  c.h_A = sim::TerminalCost::linear(s.costs.gamma);
  c.c0 = f.c0_b;
  c.observed_effort_gain = f.Gamma.size() ? f.Gamma : f.K;
  return c;
}

struct RentResult {
  double J_hidden = 0.0;
  double J_full = 0.0;
  double rent = 0.0;
};

/// LQ information rent. Both sides are integrated on `steps` intervals
/// (default: step 1e-4 or the scenario step, whichever is finer).
inline RentResult information_rent_lq(const Scenario& s, int steps = 0) {
  if (steps <= 0) steps = std::max(s.steps(), static_cast<int>(std::ceil(s.costs.T / 1e-4)));
  const auto sol = lq::solve_lq(s, steps);
  RentResult r;
  r.J_hidden = sol.J_P_star;
  r.J_full = detail::full_info_cost(s, steps);
  r.rent = r.J_hidden - r.J_full;
  return r;
}

/// Information rent of a single-node scenario through the HJB solver, valid
/// for non-LQ convex effort costs: V_hidden(0, y0) - V_full(0, y0).
inline RentResult information_rent_hjb(const Scenario& s, hjb::GridConfig cfg = {}) {
  cfg.mode = hjb::Mode::Hidden;
  const auto hidden = hjb::solve_sp1(s, cfg);
  cfg.mode = hjb::Mode::FullInformation;
  const auto full = hjb::solve_sp1(s, cfg);
  const double y0 = s.network.y0(0);
  RentResult r;
  r.J_hidden = hidden.value(0, y0) - s.costs.jA_floor;
  r.J_full = full.value(0, y0) - s.costs.jA_floor;
  r.rent = r.J_hidden - r.J_full;
  return r;
}

/// I_R = J_P(hidden) - J_P(full); LQ scenarios use the ODE solution, others
/// the HJB grid.
inline double information_rent(const Scenario& s) {
  if (s.costs.is_lq() && s.costs.gamma == -1.0) return information_rent_lq(s).rent;
  return information_rent_hjb(s).rent;
}

struct BenchmarkReport {
  RentResult rent;
  double tolerance = 1e-10;
  bool certainty_equivalence = false;
};

inline BenchmarkReport benchmark_report(const Scenario& s, double tolerance = 1e-10) {
  BenchmarkReport b;
  b.tolerance = tolerance;
  b.rent = (s.costs.is_lq() && s.costs.gamma == -1.0) ? information_rent_lq(s)
                                                      : information_rent_hjb(s);
  b.certainty_equivalence = std::abs(b.rent.rent) <= tolerance;
  return b;
}

inline void write_report(std::ostream& os, const BenchmarkReport& b) {
  os << "J_P(hidden) " << format_number(b.rent.J_hidden) << "\n";
  os << "J_P(full) " << format_number(b.rent.J_full) << "\n";
  os << "I_R " << format_number(b.rent.rent) << "\n";
  os << "certainty equivalence (|I_R| <= " << format_number(b.tolerance) << ") "
     << agent::verdict(b.certainty_equivalence) << "\n";
}

}  // namespace riskcontract::benchmark

#endif  // RISKCONTRACT_BENCHMARK_HPP
