#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace riskcontract;
using namespace riskcontract::sim;
using testsupport::euler_flow;
using testsupport::scenario;
using testsupport::single_node;

namespace {

EffortPolicy zero_effort(const Scenario& s) {
  return EffortPolicy::gridded(Matrix::Zero(s.steps() + 1, s.n()));
}

}  // namespace

TEST(SimulateRisk, DeterministicExponentialGrowth) {
  Scenario s = testsupport::deterministic();
  s.sim.n_paths = 3;
  const auto e = simulate_risk(s, zero_effort(s));
  // Exact Euler flow, and the ODE solution within the first-order step error.
  const double euler = 5.0 * std::pow(1.0 + 2.0 * s.sim.dt, s.steps());
  const double exact = 5.0 * std::exp(2.0);
  for (int p = 0; p < 3; ++p) {
    EXPECT_NEAR(e.Y_T(p, 0), euler, 1e-10);
    EXPECT_NEAR(e.Y_T(p, 0), exact, exact * 2.0 * s.sim.dt);
  }
  EXPECT_EQ(e.var_Y(s.steps(), 0), 0.0);
}

TEST(SimulateRisk, IdentityDynamicsKeepInitialRisk) {
  Scenario s = single_node(0.0, VolatilityKind::Zero);
  s.sim.n_paths = 2;
  SimOptions o;
  o.store_paths = true;
  const auto e = simulate_risk(s, zero_effort(s), o);
  for (int p = 0; p < 2; ++p)
    for (int k = 0; k <= s.steps(); ++k) EXPECT_EQ(e.Y_paths[p](k, 0), 5.0);
}

TEST(SimulateRisk, InitialStateOnEveryPath) {
  Scenario s = scenario("fig4_case1");
  s.sim.n_paths = 50;
  s.sim.dt = 0.01;
  SimOptions o;
  o.store_paths = true;
  const auto e = simulate_risk(s, zero_effort(s), o);
  for (const auto& path : e.Y_paths) EXPECT_EQ(path.row(0), s.network.y0.transpose());
}

TEST(SimulateRisk, MeanOfConstantVolatilityModel) {
  Scenario s = single_node(2.0, VolatilityKind::ConstantMatrix, 1.0);
  const auto e = simulate_risk(s, zero_effort(s));
  const int T = s.steps();
  const double se = std::sqrt(e.var_Y(T, 0) / e.n_paths);
  EXPECT_NEAR(e.mean_Y(T, 0), 5.0 * std::exp(2.0), 3.0 * se);
  EXPECT_NEAR(e.mean_Y(T, 0), 5.0 * std::pow(1.0 + 2.0 * s.sim.dt, T), 3.0 * se);
}

TEST(SimulateRisk, MeanFollowsDeterministicFlowUnderGriddedEffort) {
  const Scenario s = scenario("fig4_case2");
  const auto sol = lq::solve_lq(s);
  const auto e = simulate_risk(s, EffortPolicy::gridded(sol.E_star));
  const Matrix flow = euler_flow(s, sol.E_star);
  for (int k : {s.steps() / 2, s.steps()}) {
    for (int i = 0; i < s.n(); ++i) {
      const double se = std::sqrt(e.var_Y(k, i) / e.n_paths);
      EXPECT_NEAR(e.mean_Y(k, i), flow(k, i), 3.0 * se) << "step " << k << " node " << i;
    }
  }
}

TEST(SimulateRisk, MeanRiskDecreasesUnderOptimalEffort) {
  const Scenario s = scenario("fig3_a2");
  const auto sol = lq::solve_lq(s);
  const auto e = simulate_risk(s, EffortPolicy::gridded(sol.E_star));
  EXPECT_LT(e.mean_Y(s.steps(), 0), e.mean_Y(s.steps() / 2, 0));
  EXPECT_LT(e.mean_Y(s.steps() / 2, 0), e.mean_Y(0, 0));
}

TEST(SimulateRisk, BitIdenticalAcrossRunsAndThreadCounts) {
  Scenario s = scenario("fig4_case3");
  s.sim.n_paths = 700;
  const auto sol = lq::solve_lq(s);
  const auto policy = EffortPolicy::gridded(sol.E_star);
  const auto contract = ContractPolicy::from_lq(sol, s);
  const auto a = simulate(s, policy, contract, sol.E_star);
  const auto b = simulate(s, policy, contract, sol.E_star);
  SimOptions o;
  o.threads = 3;
  const auto c = simulate(s, policy, contract, sol.E_star, o);
  for (const auto* x : {&b, &c}) {
    EXPECT_EQ(a.Y_T, x->Y_T);
    EXPECT_EQ(a.c_T, x->c_T);
    EXPECT_EQ(a.mean_Y, x->mean_Y);
    EXPECT_EQ(a.var_Y, x->var_Y);
    EXPECT_EQ(a.mean_c, x->mean_c);
    EXPECT_EQ(a.var_c, x->var_c);
    EXPECT_EQ(a.agent_cost, x->agent_cost);
  }
  s.sim.seed += 1;
  EXPECT_NE(simulate(s, policy, contract, sol.E_star).Y_T, a.Y_T);
}

TEST(SimulateRisk, StrongConvergenceOrderOneHalf) {
  // Euler on the state-scaled model against a dt = 1e-5 reference driven by
  // the same Brownian path (coarse increments are sums of fine ones).
  const Scenario s = single_node(2.0, VolatilityKind::StateScaled, 1.0);
  const int fine = 100000;
  const double dtf = s.costs.T / fine;
  const NormalStream stream(11);
  const std::vector<int> factors = {1000, 100, 10};  // dt = 1e-2, 1e-3, 1e-4
  std::vector<double> err2(factors.size(), 0.0);
  const int paths = 200;
  Vector z(1), zero = Vector::Zero(1);
  for (int p = 0; p < paths; ++p) {
    double ref = 5.0;
    std::vector<double> coarse(factors.size(), 5.0), acc(factors.size(), 0.0);
    for (int k = 0; k < fine; ++k) {
      stream.fill(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k), z);
      const double db = std::sqrt(dtf) * z(0);
      ref = euler_step(s.network, Vector::Constant(1, ref), zero, dtf, Vector::Constant(1, db))(0);
      for (std::size_t j = 0; j < factors.size(); ++j) {
        acc[j] += db;
        if ((k + 1) % factors[j] == 0) {
          coarse[j] = euler_step(s.network, Vector::Constant(1, coarse[j]), zero,
                                 dtf * factors[j], Vector::Constant(1, acc[j]))(0);
          acc[j] = 0.0;
        }
      }
    }
    for (std::size_t j = 0; j < factors.size(); ++j) err2[j] += std::pow(coarse[j] - ref, 2);
  }
  const double e2 = std::sqrt(err2[0] / paths), e3 = std::sqrt(err2[1] / paths),
               e4 = std::sqrt(err2[2] / paths);
  // sqrt(10) ~ 3.16 per decade of refinement.
  EXPECT_GT(e2 / e3, 2.2);
  EXPECT_LT(e2 / e3, 4.5);
  EXPECT_GT(e3 / e4, 2.2);
  EXPECT_LT(e3 / e4, 4.5);
}

TEST(EffortPolicy, PerturbedReusesBaseIncrements) {
  // Under additive noise the effect of an effort change is deterministic, so
  // pairing shows up as an identical shift on every path.
  Scenario s = single_node(2.0, VolatilityKind::ConstantMatrix, 1.0);
  s.sim.n_paths = 500;
  const Matrix base_path = Matrix::Constant(s.steps() + 1, 1, 2.0);
  const auto base = EffortPolicy::gridded(base_path, Vector::Constant(1, 10.0));
  const auto same = EffortPolicy::perturbed(base, Matrix::Zero(s.steps() + 1, 1));
  const auto more = EffortPolicy::perturbed(base, Matrix::Constant(s.steps() + 1, 1, 1.0));
  const auto a = simulate_risk(s, base);
  EXPECT_EQ(simulate_risk(s, same).Y_T, a.Y_T);
  const Matrix shift = simulate_risk(s, more).Y_T - a.Y_T;
  const double expected = euler_flow(s, Matrix::Constant(s.steps() + 1, 1, 3.0))(s.steps(), 0) -
                          euler_flow(s, base_path)(s.steps(), 0);
  for (int p = 0; p < s.sim.n_paths; ++p) EXPECT_NEAR(shift(p, 0), expected, 1e-9);
}

TEST(EffortPolicy, PerturbedClampsToBox) {
  const auto base = EffortPolicy::gridded(Matrix::Constant(3, 2, 1.0), Vector::Constant(2, 1.5));
  Matrix dev(3, 2);
  dev << -3, 0.2, 0, 4, 0.1, -0.5;
  const auto p = EffortPolicy::perturbed(base, dev);
  const Vector y = Vector::Ones(2);
  EXPECT_EQ(p.effort(0, 0.0, y), Vector(Eigen::Vector2d(0.0, 1.2)));
  EXPECT_EQ(p.effort(1, 0.0, y), Vector(Eigen::Vector2d(1.0, 1.5)));
  EXPECT_EQ(p.effort(2, 0.0, y), Vector(Eigen::Vector2d(1.1, 0.5)));
}

TEST(SimulateContract, ZeroSensitivityAccruesInterest) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 20;
  const auto ens = simulate_risk(s, zero_effort(s));
  const auto contract = ContractPolicy::flat(s.steps(), 1, 7.0);
  const auto e = simulate_contract(s, contract, Matrix::Zero(s.steps() + 1, 1), ens);
  for (int p = 0; p < s.sim.n_paths; ++p) EXPECT_NEAR(e.c_T(p), 7.0 * std::exp(0.3), 1e-12);
  EXPECT_EQ(e.Y_T, ens.Y_T);
}

TEST(SimulateContract, ZeroSensitivityAgentCostIsMinusInitialPayment) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 20;
  const auto contract = ContractPolicy::flat(s.steps(), 1, 7.0);
  const Matrix zero = Matrix::Zero(s.steps() + 1, 1);
  const auto e = simulate(s, EffortPolicy::gridded(zero), contract, zero);
  for (int p = 0; p < s.sim.n_paths; ++p) EXPECT_NEAR(e.agent_cost(p), -7.0, 1e-12);
}

TEST(SimulateContract, RejectsForeignEnsemble) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 4;
  const auto ens = simulate_risk(s, zero_effort(s));
  Scenario other = s;
  other.sim.seed = 3;
  const auto contract = ContractPolicy::flat(s.steps(), 1, 1.0);
  EXPECT_THROW(simulate_contract(other, contract, Matrix::Zero(s.steps() + 1, 1), ens),
               std::invalid_argument);
}

TEST(SimulateContract, RejectsMisalignedGrids) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 4;
  const auto contract = ContractPolicy::flat(s.steps() - 5, 1, 1.0);
  const Matrix zero = Matrix::Zero(s.steps() + 1, 1);
  EXPECT_THROW(simulate(s, EffortPolicy::gridded(zero), contract, zero), std::invalid_argument);
}

TEST(SimulateContract, RejectsPaymentOutsideRange) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 4;
  auto contract = ContractPolicy::flat(s.steps(), 1, 1.0);
  contract.p(3) = s.costs.p_max + 1.0;
  const Matrix zero = Matrix::Zero(s.steps() + 1, 1);
  EXPECT_THROW(simulate(s, EffortPolicy::gridded(zero), contract, zero), std::invalid_argument);
}

TEST(SimulateContract, ZeroDerivativeOfTerminalCostIsAnError) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 4;
  auto contract = ContractPolicy::flat(s.steps(), 1, 1.0);
  contract.h_A.is_linear = false;
  contract.h_A.d1 = [](double) { return 0.0; };
  const Matrix zero = Matrix::Zero(s.steps() + 1, 1);
  EXPECT_THROW(simulate(s, EffortPolicy::gridded(zero), contract, zero), NumericalError);
}

TEST(SimulateContract, NoiselessHiddenPaymentEqualsTeamPayment) {
  const Scenario s = testsupport::deterministic();
  const auto sol = lq::solve_lq(s);
  const auto hidden = simulate(s, EffortPolicy::gridded(sol.E_star),
                               ContractPolicy::from_lq(sol, s), sol.E_star);
  const auto team = benchmark::implementable_contract(s);
  const auto full = simulate(s, EffortPolicy::gridded(team.E_b),
                             benchmark::full_info_contract(team, s), team.E_b);
  // Oracle: c_T = e^{rT} c0 + int e^{r(T-t)} K^2/(2R) dt with the closed-form K,
  // by composite Simpson on a fine grid. The simulator's left-point rule adds
  // dt/2 (g(0) - g(T)) to leading order, g the integrand.
  auto g = [](double t) {
    const double k = lq::closed_form_K_scalar(2.0, 5.0, 0.3, 1.0, t);
    return std::exp(0.3 * (1.0 - t)) * k * k / 3.0;
  };
  const int m = 20000;
  double integral = 0.0;
  for (int j = 0; j <= m; ++j) {
    const double w = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    integral += w * g(static_cast<double>(j) / m);
  }
  integral /= 3.0 * m;
  const double oracle = 10.0 * std::exp(0.3) + integral + 0.5 * s.sim.dt * (g(0.0) - g(1.0));
  for (int p = 0; p < s.sim.n_paths; p += 997) {
    EXPECT_NEAR(hidden.c_T(p), full.c_T(p), 1e-6);
    EXPECT_NEAR(hidden.c_T(p), oracle, 1e-3);
  }
  EXPECT_NEAR(hidden.c_T(0), benchmark::team_payment_path(team, s.costs.r)(s.steps()), 1e-6);
}

TEST(SimulateContract, CycleVolatilityRaisesPaymentVariance) {
  const Scenario id = scenario("fig7_identity");
  const Scenario cyc = scenario("fig7_cycle");
  const auto sol = lq::solve_lq(id);
  const auto policy = EffortPolicy::gridded(sol.E_star);
  const auto contract = ContractPolicy::from_lq(sol, id);
  const auto a = simulate(id, policy, contract, sol.E_star);
  const auto b = simulate(cyc, policy, contract, sol.E_star);
  const auto v = paired_variance_difference(b.c_T, a.c_T);
  EXPECT_GT(v.diff, 3.0 * v.std_error);
  EXPECT_NEAR(v.var_x, b.var_c(id.steps()), 1e-9 * v.var_x);
}

TEST(EnsembleStats, SinglePathHasZeroVariance) {
  Scenario s = scenario("fig4_case1");
  s.sim.n_paths = 1;
  s.sim.dt = 0.01;
  SimOptions o;
  o.store_paths = true;
  const auto e = simulate_risk(s, zero_effort(s), o);
  const auto st = ensemble_stats(e);
  EXPECT_TRUE((st.var_Y.array() == 0.0).all());
  EXPECT_EQ(st.terminal_Y[0].q05, e.Y_T(0, 0));
  EXPECT_EQ(st.terminal_Y[1].q95, e.Y_T(0, 1));
}

TEST(EnsembleStats, NoiselessEnsembleHasZeroVariance) {
  Scenario s = testsupport::deterministic();
  s.sim.n_paths = 300;
  const auto sol = lq::solve_lq(s);
  const auto e = simulate(s, EffortPolicy::gridded(sol.E_star), ContractPolicy::from_lq(sol, s),
                          sol.E_star);
  const auto st = ensemble_stats(e);
  EXPECT_TRUE((st.var_Y.array() == 0.0).all());
  EXPECT_TRUE((st.var_c.array() == 0.0).all());
}

TEST(EnsembleStats, UnbiasedVarianceAndQuantiles) {
  Scenario s = single_node(1.0, VolatilityKind::ConstantMatrix, 1.0);
  s.sim.n_paths = 300;
  s.sim.dt = 0.01;
  SimOptions o;
  o.store_paths = true;
  const auto e = simulate_risk(s, zero_effort(s), o);
  const auto st = ensemble_stats(e);
  const Vector y = e.Y_T.col(0);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / (y.size() - 1);
  EXPECT_NEAR(st.mean_Y(s.steps(), 0), mean, 1e-12);
  EXPECT_NEAR(st.var_Y(s.steps(), 0), var, 1e-10);
  const auto q = quantiles({3.0, 1.0, 2.0, 5.0, 4.0});
  EXPECT_DOUBLE_EQ(q.q50, 3.0);
  EXPECT_DOUBLE_EQ(q.q05, 1.2);
  EXPECT_DOUBLE_EQ(q.q95, 4.8);
  EXPECT_EQ(st.Y_quantiles.size(), static_cast<std::size_t>(s.steps() + 1));
  EXPECT_EQ(st.Y_quantiles.back()[0].q50, st.terminal_Y[0].q50);
}

TEST(EnsembleStats, EmptyEnsembleIsRejected) {
  EXPECT_THROW(ensemble_stats(PathEnsemble{}), std::invalid_argument);
}

TEST(PairedVarianceDifference, MatchesDirectComputation) {
  Vector x(4), y(4);
  x << 1, 2, 3, 6;
  y << 1, 1, 2, 2;
  const auto v = paired_variance_difference(x, y);
  EXPECT_DOUBLE_EQ(v.var_x, 14.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.var_y, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.diff, 13.0 / 3.0);
  EXPECT_GT(v.std_error, 0.0);
}

TEST(WriteSummaryCsv, Layout) {
  Scenario s = scenario("fig4_case1");
  s.sim.n_paths = 1;
  s.sim.dt = 0.5;
  const auto e = simulate_risk(s, zero_effort(s));
  std::ostringstream os;
  write_summary_csv(os, e);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  EXPECT_EQ(header, "t,mean_Y_1,mean_Y_2,var_Y_1,var_Y_2,mean_c,var_c");
  std::getline(is, row);
  EXPECT_EQ(row, "0,5,5,0,0,nan,nan");
  int rows = 1;
  while (std::getline(is, row)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(WritePathsCsv, RequiresStoredPaths) {
  Scenario s = single_node(2.0);
  s.sim.n_paths = 2;
  s.sim.dt = 0.5;
  std::ostringstream os;
  EXPECT_THROW(write_paths_csv(os, simulate_risk(s, zero_effort(s))), std::invalid_argument);
  SimOptions o;
  o.store_paths = true;
  write_paths_csv(os, simulate_risk(s, zero_effort(s), o));
  const std::string out = os.str();
  EXPECT_EQ(out.substr(0, out.find('\n')), "path,t,Y_1,c,M");
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 1 + 2 * 3);
}
