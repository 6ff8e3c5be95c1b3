#ifndef RISKCONTRACT_TESTS_SUPPORT_HPP
#define RISKCONTRACT_TESTS_SUPPORT_HPP

#include "riskcontract/riskcontract.hpp"

#include <string>

namespace testsupport {

using namespace riskcontract;

inline Scenario scenario(const std::string& name) {
  return load_scenario_file(std::string(RISKCONTRACT_SCENARIO_DIR) + "/" + name + ".ini");
}

// The noiseless single-node scenario; its paths coincide, so a few suffice.
inline Scenario deterministic(int paths = 100) {
  Scenario s = scenario("single_node_deterministic");
  s.sim.n_paths = paths;
  return s;
}

// Single node with the case-study costs.
inline Scenario single_node(double A, VolatilityKind kind = VolatilityKind::StateScaled,
                            double d = 0.2) {
  Scenario s;
  s.network.n = 1;
  s.network.A = Matrix::Constant(1, 1, A);
  s.network.rho = Vector::Constant(1, 5.0);
  s.network.y0 = Vector::Constant(1, 5.0);
  s.network.volatility.kind = kind;
  if (kind != VolatilityKind::Zero) s.network.volatility.D = Matrix::Constant(1, 1, d);
  s.costs.r = 0.3;
  s.costs.T = 1.0;
  s.costs.jA_floor = -10.0;
  s.costs.R = Matrix::Constant(1, 1, 1.5);
  return s;
}

// Deterministic forward Euler flow of y' = A y - E(t) on the simulation grid.
inline Matrix euler_flow(const Scenario& s, const Matrix& effort) {
  const int steps = s.steps();
  const double dt = s.step_size();
  Matrix y(steps + 1, s.n());
  y.row(0) = s.network.y0.transpose();
  for (int k = 0; k < steps; ++k) {
    const Vector yk = y.row(k).transpose();
    y.row(k + 1) = (yk + (s.network.A * yk - effort.row(k).transpose()) * dt).transpose();
  }
  return y;
}

}  // namespace testsupport

#endif  // RISKCONTRACT_TESTS_SUPPORT_HPP
