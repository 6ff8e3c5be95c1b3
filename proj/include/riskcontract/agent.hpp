#ifndef RISKCONTRACT_AGENT_HPP
#define RISKCONTRACT_AGENT_HPP

// Agent side of the contract: static best response, Monte-Carlo agent cost
//
//   J_A = E[ int_0^T e^{-rt} f_A(t, p_t, E_t) dt + e^{-rT} h_A(M_T) ],
//   f_A(t, p, E) = f_{A,E}(E) - delta_A p,
//
// and statistical checks of incentive compatibility, individual rationality,
// and the martingale property of the agent's running expected cost U_t.

#include "riskcontract/format.hpp"
#include "riskcontract/model.hpp"
#include "riskcontract/sim.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace riskcontract::agent {

struct AgentCostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
};

/// Mean and standard error of a sample. Identical samples give exactly zero
/// error.
inline AgentCostEstimate estimate(const Vector& x) {
  AgentCostEstimate e;
  e.n_paths = static_cast<int>(x.size());
  double mean = 0.0, m2 = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x(i) - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (x(i) - mean);
  }
  e.mean = mean;
  if (x.size() > 1) e.std_error = std::sqrt(m2 / static_cast<double>(x.size() - 1) /
                                            static_cast<double>(x.size()));
  return e;
}

/// argmin_E f_{A,E}(E) - zeta' E over the box [0, upper] (upper empty: no
/// bound). The payment p does not enter: f_A is separable in (p, E).
inline Vector best_response_static(const Vector& zeta, double p, const CostSpec& costs,
                                   const Vector& upper = {}) {
  (void)p;
  if (!zeta.allFinite()) throw std::invalid_argument("best_response_static: non-finite zeta");
  Vector e(zeta.size());
  if (costs.is_lq()) {
    e = costs.R.ldlt().solve(zeta);
  } else {
    const auto& mc = costs.marginal;
    for (Eigen::Index i = 0; i < zeta.size(); ++i) {
      const double z = zeta(i);
      if (z <= mc.marginal(0.0)) {
        e(i) = 0.0;
        continue;
      }
      const double cap = upper.size() == zeta.size() ? upper(i)
                                                     : std::numeric_limits<double>::infinity();
      double lo = 0.0, hi = 1.0;
      while (mc.marginal(hi) < z && hi < cap) hi *= 2.0;
      if (hi >= cap && mc.marginal(cap) <= z) {
        e(i) = cap;
        continue;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (mc.marginal(mid) < z ? lo : hi) = mid;
      }
      e(i) = 0.5 * (lo + hi);
    }
  }
  Vector out = e.cwiseMax(0.0);
  if (upper.size() == out.size()) out = out.cwiseMin(upper);
  return out;
}

/// Monte-Carlo agent cost of playing `policy` against `contract`, which
/// anticipates effort `suggested`.
inline AgentCostEstimate agent_cost(const Scenario& s, const sim::ContractPolicy& contract,
                                    const Matrix& suggested, const sim::EffortPolicy& policy,
                                    const sim::SimOptions& opts = {}) {
  const auto ens = sim::simulate(s, policy, contract, suggested, opts);
  return estimate(ens.agent_cost);
}

struct Deviation {
  std::string description;
  sim::EffortPolicy policy;
};

/// Default deviation family around the suggested path: scalings by 0.5, 0.8,
/// 0.9, 1.1, 1.2, 1.5; time reversal; shifts by T/10 in both directions;
/// zeroing each node. All deviations share the box of the base policy.
inline std::vector<Deviation> default_deviations(const Scenario& s, const Matrix& suggested,
                                                 const Vector& upper) {
  const auto base = sim::EffortPolicy::gridded(suggested, upper);
  const Eigen::Index rows = suggested.rows();
  const int steps = static_cast<int>(rows) - 1;
  const int shift = std::max(1, static_cast<int>(std::lround(steps / 10.0)));
  std::vector<Deviation> out;
  auto label = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  auto add = [&](std::string name, const Matrix& target) {
    out.push_back({std::move(name), sim::EffortPolicy::perturbed(base, target - suggested)});
  };
  for (double a : {0.5, 0.8, 0.9, 1.1, 1.2, 1.5}) {
    add("scale " + label(a), suggested * a);
  }
  add("time reversed", suggested.colwise().reverse());
  Matrix later(rows, suggested.cols()), earlier(rows, suggested.cols());
  for (Eigen::Index k = 0; k < rows; ++k) {
    later.row(k) = suggested.row(std::max<Eigen::Index>(0, k - shift));
    earlier.row(k) = suggested.row(std::min<Eigen::Index>(steps, k + shift));
  }
  add("delayed by " + label(s.costs.T * shift / steps), later);
  add("advanced by " + label(s.costs.T * shift / steps), earlier);
  for (int i = 0; i < s.n(); ++i) {
    Matrix z = suggested;
    z.col(i).setZero();
    add("node " + std::to_string(i + 1) + " zeroed", z);
  }
  return out;
}

struct DeviationResult {
  std::string description;
  AgentCostEstimate cost;
  double diff_mean = 0.0;       // J_A(deviation) - J_A(E*)
  double diff_std_error = 0.0;  // paired
  bool pass = true;
};

struct ICReport {
  AgentCostEstimate base_cost;
  std::vector<DeviationResult> deviations;
  double se_multiplier = 3.0;
  double tolerance_floor = 0.0;
  bool pass = true;
};

/// Paired comparison of each deviation against compliance on common random
/// numbers. A deviation passes iff its mean cost difference is at least
/// -max(k * SE, floor).
inline ICReport verify_ic(const Scenario& s, const sim::ContractPolicy& contract,
                          const Matrix& suggested, const std::vector<Deviation>& deviations,
                          const sim::SimOptions& opts = {}, double se_multiplier = 3.0,
                          double tolerance_floor = 1e-9) {
  if (deviations.empty()) throw std::invalid_argument("verify_ic: no deviations");
  const Vector upper = sim::effort_bound(s, suggested);
  const auto base = sim::simulate(s, sim::EffortPolicy::gridded(suggested, upper), contract,
                                  suggested, opts);
  ICReport rep;
  rep.base_cost = estimate(base.agent_cost);
  rep.se_multiplier = se_multiplier;
  rep.tolerance_floor = tolerance_floor;
  for (const auto& d : deviations) {
    const auto ens = sim::simulate(s, d.policy, contract, suggested, opts);
    const auto diff = estimate(ens.agent_cost - base.agent_cost);
    DeviationResult r;
    r.description = d.description;
    r.cost = estimate(ens.agent_cost);
    r.diff_mean = diff.mean;
    r.diff_std_error = diff.std_error;
    r.pass = diff.mean >= -std::max(se_multiplier * diff.std_error, tolerance_floor);
    rep.pass = rep.pass && r.pass;
    rep.deviations.push_back(std::move(r));
  }
  return rep;
}

inline ICReport verify_ic(const Scenario& s, const sim::ContractPolicy& contract,
                          const Matrix& suggested, const sim::SimOptions& opts = {}) {
  return verify_ic(s, contract, suggested,
                   default_deviations(s, suggested, sim::effort_bound(s, suggested)), opts);
}

struct IRReport {
  AgentCostEstimate estimate;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Passes iff |J_A(E*) - J_A_floor| <= max(k * SE, floor).
inline IRReport verify_ir(const Scenario& s, const sim::ContractPolicy& contract,
                          const Matrix& suggested, const sim::SimOptions& opts = {},
                          double se_multiplier = 3.0, double tolerance_floor = 1e-6) {
  const auto policy = sim::EffortPolicy::gridded(suggested, sim::effort_bound(s, suggested));
  IRReport rep;
  rep.estimate = agent_cost(s, contract, suggested, policy, opts);
  rep.target = s.costs.jA_floor;
  rep.tolerance = std::max(se_multiplier * rep.estimate.std_error, tolerance_floor);
  rep.pass = std::abs(rep.estimate.mean - rep.target) <= rep.tolerance;
  return rep;
}

struct MartingaleRow {
  double t = 0.0;
  int step = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double deviation = 0.0;
  bool pass = false;
};

struct MartingaleReport {
  std::vector<MartingaleRow> rows;
  double target = 0.0;
  double max_deviation = 0.0;
  bool pass = true;
};

/// Ensemble mean of U_t = int_0^t e^{-rs} f_A ds + e^{-rt} h_A(M_t) at each
/// checkpoint (snapped to the nearest grid time) against J_A_floor.
inline MartingaleReport martingale_check(const Scenario& s, const sim::ContractPolicy& contract,
                                         const Matrix& suggested,
                                         const std::vector<double>& checkpoints,
                                         const sim::SimOptions& opts = {},
                                         double se_multiplier = 3.0,
                                         double tolerance_floor = 1e-6) {
  const auto policy = sim::EffortPolicy::gridded(suggested, sim::effort_bound(s, suggested));
  const auto ens = sim::simulate(s, policy, contract, suggested, opts);
  MartingaleReport rep;
  rep.target = s.costs.jA_floor;
  const double dt = ens.dt;
  for (double t : checkpoints) {
    if (t < 0.0 || t > s.costs.T) throw std::invalid_argument("checkpoint outside [0, T]");
    MartingaleRow row;
    row.step = std::min(ens.steps(), static_cast<int>(std::lround(t / dt)));
    row.t = ens.times[row.step];
    row.mean = ens.mean_U(row.step);
    row.std_error = std::sqrt(ens.var_U(row.step) / ens.n_paths);
    row.deviation = row.mean - rep.target;
    row.pass = std::abs(row.deviation) <= std::max(se_multiplier * row.std_error, tolerance_floor);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(row.deviation));
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

inline const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

inline void write_report(std::ostream& os, const ICReport& r) {
  os << "IC check (" << verdict(r.pass) << "), tolerance " << format_number(r.se_multiplier)
     << " SE\n";
  os << "  base cost " << format_number(r.base_cost.mean) << " +/- "
     << format_number(r.base_cost.std_error) << "\n";
  os << "  deviation | mean diff | std error | verdict\n";
  for (const auto& d : r.deviations) {
    os << "  " << d.description << " | " << format_number(d.diff_mean) << " | "
       << format_number(d.diff_std_error) << " | " << verdict(d.pass) << "\n";
  }
}

inline void write_report(std::ostream& os, const IRReport& r) {
  os << "IR check (" << verdict(r.pass) << "): estimate " << format_number(r.estimate.mean)
     << " +/- " << format_number(r.estimate.std_error) << ", target "
     << format_number(r.target) << ", tolerance " << format_number(r.tolerance) << "\n";
}

inline void write_report(std::ostream& os, const MartingaleReport& r) {
  os << "Martingale check (" << verdict(r.pass) << "), target " << format_number(r.target)
     << "\n";
  os << "  t | mean U | std error | deviation | verdict\n";
  for (const auto& row : r.rows) {
    os << "  " << format_number(row.t) << " | " << format_number(row.mean) << " | "
       << format_number(row.std_error) << " | " << format_number(row.deviation) << " | "
       << verdict(row.pass) << "\n";
  }
}

}  // namespace riskcontract::agent

#endif  // RISKCONTRACT_AGENT_HPP
