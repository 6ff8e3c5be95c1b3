// riskcontract: solve, simulate, and verify dynamic risk-management contracts.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure (including a
// failed reproduction assertion), 4 failed verification.

#include "riskcontract/riskcontract.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef RISKCONTRACT_SCENARIO_DIR
#define RISKCONTRACT_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace riskcontract;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;
constexpr int kVerification = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Manifest {
  std::string scenario;
  std::string out = "riskcontract_out";
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<double> dt;
  std::string grid;
  bool json = false;
  int threads = 1;
};

// Any finite double prints as a JSON number; the rest as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Scenario load(const Manifest& m) {
  if (m.scenario.empty()) throw UsageError("--scenario is required");
  Scenario s = load_scenario_file(m.scenario);
  if (m.seed) s.sim.seed = *m.seed;
  if (m.paths) s.sim.n_paths = *m.paths;
  if (m.dt) s.sim.dt = *m.dt;
  require_valid(s);
  return s;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw UsageError("cannot create output directory '" + dir + "'");
  const fs::path probe = p / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw UsageError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw UsageError("cannot write '" + p.string() + "'");
  f.precision(17);
  return f;
}

std::pair<int, int> parse_grid(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("--grid expects NY,NT");
  try {
    std::size_t a = 0, b = 0;
    const int ny = std::stoi(text.substr(0, comma), &a);
    const int nt = std::stoi(text.substr(comma + 1), &b);
    if (a != comma || b != text.size() - comma - 1 || ny < 5 || nt < 1) throw 0;
    return {ny, nt};
  } catch (...) {
    throw UsageError("--grid expects NY,NT with NY >= 5 and NT >= 1");
  }
}

void emit(const Manifest& m, const json& summary, const std::string& text) {
  if (m.json) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << text;
  }
}

// solve ---------------------------------------------------------------------

int cmd_solve(const Manifest& m) {
  const Scenario s = load(m);
  const auto sol = lq::solve_lq(s);
  const auto dir = prepare_out(m.out);
  {
    auto f = open_out(dir / "lq_solution.csv");
    lq::write_csv(f, sol);
  }
  const auto regime = lq::payment_regime(s.costs.delta_P, s.costs.delta_A, s.costs.r, s.costs.T);
  const Vector k0 = sol.K.row(0).transpose();
  json j{{"command", "solve"},
         {"J_P_star", num(sol.J_P_star)},
         {"K0", to_json(k0)},
         {"m0", num(sol.m(0))},
         {"E_star_0", to_json(sol.E_star.row(0).transpose())},
         {"E_star_T", to_json(sol.E_star.bottomRows(1).transpose())},
         {"payment_regime", lq::to_string(regime.tag)},
         {"csv", (dir / "lq_solution.csv").string()}};
  if (regime.switch_time) j["switch_time"] = num(*regime.switch_time);
  std::ostringstream os;
  os.precision(17);
  os << "J_P* = " << format_number(sol.J_P_star) << "\n";
  os << "K(0) =";
  for (Eigen::Index i = 0; i < k0.size(); ++i) os << " " << format_number(k0(i));
  os << "\nm(0) = " << format_number(sol.m(0)) << "\n";
  os << "payment regime: " << lq::to_string(regime.tag);
  if (regime.switch_time) os << " (switch at t = " << format_number(*regime.switch_time) << ")";
  os << "\nwrote " << (dir / "lq_solution.csv").string() << "\n";
  {
    auto f = open_out(dir / "summary.json");
    f << j.dump(2) << "\n";
  }
  emit(m, j, os.str());
  return kOk;
}

// Suggested effort and contract for any scenario: the LQ solution when
// available, otherwise the single-node HJB policy along the mean path.
struct Plan {
  Matrix suggested;
  sim::ContractPolicy contract;
};

Plan plan_for(const Scenario& s, const hjb::GridConfig& grid) {
  Plan p;
  if (s.costs.is_lq() && s.costs.gamma == -1.0) {
    const auto sol = lq::solve_lq(s);
    p.suggested = sol.E_star;
    p.contract = sim::ContractPolicy::from_lq(sol, s);
    return p;
  }
  if (s.n() != 1) {
    throw ScenarioError("non-LQ scenarios are supported for a single node only");
  }
  const auto v = hjb::solve_sp1(s, grid);
  const auto pol = hjb::extract_policy(v, s);
  const int steps = s.steps();
  p.suggested = Matrix(pol.effort_path);
  p.contract = sim::ContractPolicy::flat(steps, 1, 0.0, s.costs.gamma);
  p.contract.zeta = Matrix(pol.zeta_path);
  p.contract.c0 = p.contract.h_A.inverse(s.costs.jA_floor);
  const auto sp2 = hjb::solve_sp2(s);
  p.contract.p = sp2.p_star;
  return p;
}

hjb::GridConfig grid_config(const Manifest& m) {
  hjb::GridConfig g;
  if (!m.grid.empty()) std::tie(g.ny, g.nt) = parse_grid(m.grid);
  return g;
}

// simulate ------------------------------------------------------------------

int cmd_simulate(const Manifest& m, bool per_path) {
  const Scenario s = load(m);
  const auto plan = plan_for(s, grid_config(m));
  const auto dir = prepare_out(m.out);
  sim::SimOptions opts;
  opts.store_paths = per_path;
  opts.threads = m.threads;
  const auto policy =
      sim::EffortPolicy::gridded(plan.suggested, sim::effort_bound(s, plan.suggested));
  const auto ens = sim::simulate(s, policy, plan.contract, plan.suggested, opts);
  {
    auto f = open_out(dir / "ensemble_summary.csv");
    sim::write_summary_csv(f, ens);
  }
  if (per_path) {
    auto f = open_out(dir / "paths.csv");
    sim::write_paths_csv(f, ens);
  }
  const auto st = sim::ensemble_stats(ens);
  const int last = ens.steps();
  const Vector mean_yt = ens.mean_Y.row(last).transpose();
  const auto cost = agent::estimate(ens.agent_cost);
  json j{{"command", "simulate"},
         {"n_paths", ens.n_paths},
         {"seed", ens.seed},
         {"dt", num(ens.dt)},
         {"mean_Y_T", to_json(mean_yt)},
         {"mean_c_T", num(ens.mean_c(last))},
         {"var_c_T", num(ens.var_c(last))},
         {"c_T_q05", num(st.terminal_c.q05)},
         {"c_T_q50", num(st.terminal_c.q50)},
         {"c_T_q95", num(st.terminal_c.q95)},
         {"agent_cost", num(cost.mean)},
         {"agent_cost_se", num(cost.std_error)},
         {"max_vol_integral", num(ens.max_vol_integral)},
         {"vol_bounded", ens.vol_bounded},
         {"max_effort_integral", num(ens.max_effort_integral)}};
  std::ostringstream os;
  os << "paths " << ens.n_paths << ", dt " << format_number(ens.dt) << ", seed " << ens.seed
     << "\n";
  os << "mean Y(T) =";
  for (Eigen::Index i = 0; i < mean_yt.size(); ++i) os << " " << format_number(mean_yt(i));
  os << "\nmean c_T = " << format_number(ens.mean_c(last)) << ", var c_T = "
     << format_number(ens.var_c(last)) << "\n";
  os << "agent cost = " << format_number(cost.mean) << " +/- " << format_number(cost.std_error)
     << "\n";
  if (!ens.vol_bounded) os << "warning: volatility integral exceeded vol_cap\n";
  os << "wrote " << (dir / "ensemble_summary.csv").string() << "\n";
  emit(m, j, os.str());
  return kOk;
}

// verify --------------------------------------------------------------------

int cmd_verify(const Manifest& m, const std::string& variant) {
  const Scenario s = load(m);
  const auto sol = lq::solve_lq(s);
  auto contract = sim::ContractPolicy::from_lq(sol, s);
  if (variant == "c0-half") {
    contract.c0 *= 0.5;
  } else if (variant == "zeta-zero") {
    contract.zeta.setZero();
  } else if (variant != "optimal") {
    throw UsageError("--contract must be optimal, c0-half or zeta-zero");
  }
  sim::SimOptions opts;
  opts.threads = m.threads;
  const auto ic = agent::verify_ic(s, contract, sol.E_star, opts);
  const auto ir = agent::verify_ir(s, contract, sol.E_star, opts);
  const double T = s.costs.T;
  const auto mg =
      agent::martingale_check(s, contract, sol.E_star, {0, T / 4, T / 2, 3 * T / 4, T}, opts);
  const auto bench = benchmark::benchmark_report(s);
  const bool pass = ic.pass && ir.pass && mg.pass && bench.certainty_equivalence;

  std::ostringstream os;
  agent::write_report(os, ic);
  agent::write_report(os, ir);
  agent::write_report(os, mg);
  benchmark::write_report(os, bench);
  os << "overall " << agent::verdict(pass) << "\n";

  json devs = json::array();
  for (const auto& d : ic.deviations) {
    devs.push_back({{"description", d.description},
                    {"mean_diff", num(d.diff_mean)},
                    {"std_error", num(d.diff_std_error)},
                    {"pass", d.pass}});
  }
  json rows = json::array();
  for (const auto& r : mg.rows) {
    rows.push_back({{"t", num(r.t)},
                    {"mean", num(r.mean)},
                    {"std_error", num(r.std_error)},
                    {"pass", r.pass}});
  }
  json j{{"command", "verify"},
         {"contract", variant},
         {"ic", {{"pass", ic.pass}, {"base_cost", num(ic.base_cost.mean)}, {"deviations", devs}}},
         {"ir",
          {{"pass", ir.pass},
           {"estimate", num(ir.estimate.mean)},
           {"std_error", num(ir.estimate.std_error)},
           {"target", num(ir.target)}}},
         {"martingale", {{"pass", mg.pass}, {"rows", rows}}},
         {"benchmark",
          {{"J_P_hidden", num(bench.rent.J_hidden)},
           {"J_P_full", num(bench.rent.J_full)},
           {"information_rent", num(bench.rent.rent)},
           {"pass", bench.certainty_equivalence}}},
         {"pass", pass}};
  if (!m.out.empty() && m.out != "-") {
    const auto dir = prepare_out(m.out);
    auto f = open_out(dir / "verify_report.txt");
    f << os.str();
  }
  emit(m, j, os.str());
  return pass ? kOk : kVerification;
}

// hjb -----------------------------------------------------------------------

int cmd_hjb(const Manifest& m, bool full_info) {
  const Scenario s = load(m);
  auto g = grid_config(m);
  if (full_info) g.mode = hjb::Mode::FullInformation;
  const auto v = hjb::solve_sp1(s, g);
  const auto pol = hjb::extract_policy(v, s);
  const auto sp2 = hjb::solve_sp2(s, v.t_axis);
  const auto dir = prepare_out(m.out);
  {
    auto f = open_out(dir / "value_grid.csv");
    hjb::write_csv(f, v);
  }
  {
    auto f = open_out(dir / "payment_schedule.csv");
    f << "t,p_star\n";
    for (std::size_t k = 0; k < sp2.t_axis.size(); ++k) {
      f << format_number(sp2.t_axis[k]) << ","
        << format_number(sp2.p_star(static_cast<Eigen::Index>(k))) << "\n";
    }
  }
  {
    auto f = open_out(dir / "policy_path.csv");
    f << "t,y_mean,zeta_star,effort_star\n";
    for (std::size_t k = 0; k < pol.t.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      f << format_number(pol.t[k]) << "," << format_number(pol.y_mean(r)) << ","
        << format_number(pol.zeta_path(r)) << "," << format_number(pol.effort_path(r)) << "\n";
    }
  }
  const double y0 = s.network.y0(0);
  const double v0 = v.value(0, y0);
  json j{{"command", "hjb"},
         {"mode", full_info ? "full_information" : "hidden"},
         {"ny", v.y_axis.size()},
         {"nt", v.t_axis.size() - 1},
         {"substeps", v.substeps},
         {"V0", num(v0)},
         {"J_P", num(v0 - s.costs.jA_floor)}};
  std::ostringstream os;
  os << "V(0, " << format_number(y0) << ") = " << format_number(v0) << "\n";
  if (s.costs.is_lq() && s.costs.gamma == -1.0) {
    const auto sol = lq::solve_lq(s);
    const double ref = sol.K(0, 0) * y0 + sol.m(0);
    j["lq_reference"] = num(ref);
    j["relative_error"] = num(std::abs(v0 - ref) / std::abs(ref));
    os << "LQ reference K(0) y0 + m(0) = " << format_number(ref) << ", relative error "
       << format_number(std::abs(v0 - ref) / std::abs(ref)) << "\n";
  }
  os << "wrote " << (dir / "value_grid.csv").string() << "\n";
  emit(m, j, os.str());
  return kOk;
}

// benchmark -----------------------------------------------------------------

int cmd_benchmark(const Manifest& m) {
  const Scenario s = load(m);
  benchmark::BenchmarkReport b;
  if (s.costs.is_lq() && s.costs.gamma == -1.0) {
    b = benchmark::benchmark_report(s);
  } else {
    b.rent = benchmark::information_rent_hjb(s, grid_config(m));
    b.tolerance = 1e-6 * std::max(1.0, std::abs(b.rent.J_hidden));
    b.certainty_equivalence = std::abs(b.rent.rent) <= b.tolerance;
  }
  std::ostringstream os;
  benchmark::write_report(os, b);
  json j{{"command", "benchmark"},
         {"J_P_hidden", num(b.rent.J_hidden)},
         {"J_P_full", num(b.rent.J_full)},
         {"information_rent", num(b.rent.rent)},
         {"tolerance", num(b.tolerance)},
         {"certainty_equivalence", b.certainty_equivalence}};
  if (!m.out.empty()) {
    const auto dir = prepare_out(m.out);
    auto f = open_out(dir / "benchmark_report.txt");
    f << os.str();
  }
  emit(m, j, os.str());
  return b.certainty_equivalence ? kOk : kVerification;
}

// reproduce -----------------------------------------------------------------

struct Assertions {
  json items = json::array();
  bool all = true;
  void check(const std::string& name, bool ok, const std::string& detail) {
    items.push_back({{"name", name}, {"pass", ok}, {"detail", detail}});
    all = all && ok;
  }
};

struct CaseRun {
  std::string label;
  Scenario s;
  lq::LQSolution sol;
  sim::PathEnsemble ens;
};

CaseRun run_case(const std::string& label, const fs::path& file, const Manifest& m) {
  Manifest mm = m;
  mm.scenario = file.string();
  CaseRun c{label, load(mm), {}, {}};
  c.sol = lq::solve_lq(c.s);
  const auto contract = sim::ContractPolicy::from_lq(c.sol, c.s);
  sim::SimOptions opts;
  opts.threads = m.threads;
  c.ens = sim::simulate(c.s,
                        sim::EffortPolicy::gridded(c.sol.E_star,
                                                   sim::effort_bound(c.s, c.sol.E_star)),
                        contract, c.sol.E_star, opts);
  return c;
}

void write_curves(const fs::path& p, const std::vector<CaseRun>& cases,
                  const std::function<double(const CaseRun&, Eigen::Index, int)>& value,
                  const std::string& prefix) {
  auto f = open_out(p);
  f << "t";
  for (const auto& c : cases) {
    const int n = c.s.n();
    for (int i = 0; i < n; ++i) {
      f << "," << prefix << (n > 1 ? std::to_string(i + 1) + "_" : "") << c.label;
    }
  }
  f << "\n";
  const auto& grid = cases.front().sol.grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    f << format_number(grid[k]);
    for (const auto& c : cases) {
      for (int i = 0; i < c.s.n(); ++i) {
        f << "," << format_number(value(c, static_cast<Eigen::Index>(k), i));
      }
    }
    f << "\n";
  }
}

void write_standard_curves(const fs::path& dir, const std::string& fig,
                           const std::vector<CaseRun>& cases) {
  write_curves(dir / (fig + "_effort.csv"), cases,
               [](const CaseRun& c, Eigen::Index k, int i) { return c.sol.E_star(k, i); }, "E");
  write_curves(dir / (fig + "_risk.csv"), cases,
               [](const CaseRun& c, Eigen::Index k, int i) { return c.ens.mean_Y(k, i); },
               "mean_Y");
  auto f = open_out(dir / (fig + "_payment.csv"));
  f << "t";
  for (const auto& c : cases) f << ",mean_c_" << c.label;
  f << "\n";
  const auto& grid = cases.front().sol.grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    f << format_number(grid[k]);
    for (const auto& c : cases) f << "," << format_number(c.ens.mean_c(static_cast<Eigen::Index>(k)));
    f << "\n";
  }
}

// max over t < T of (lhs - rhs) must be < 0 (strict ordering away from the
// horizon), and |lhs - rhs| at T within tol.
std::string ordering_detail(const Vector& lhs, const Vector& rhs, bool& ok) {
  const auto last = lhs.size() - 1;
  const double gap = (rhs.head(last) - lhs.head(last)).minCoeff();
  const double at_T = std::abs(lhs(last) - rhs(last));
  ok = gap > 0.0 && at_T <= 1e-9;
  return "min gap over t<T " + format_number(gap) + ", gap at T " + format_number(at_T);
}

bool strictly_decreasing(const Vector& v, double& worst) {
  worst = (v.tail(v.size() - 1) - v.head(v.size() - 1)).maxCoeff();
  return worst < 0.0;
}

int cmd_reproduce(const Manifest& m, const std::string& fig, const std::string& scenario_dir) {
  const fs::path sdir(scenario_dir);
  const auto dir = prepare_out(m.out);
  Assertions as;
  std::vector<CaseRun> cases;
  if (fig == "fig3") {
    for (int a : {1, 2, 3}) {
      cases.push_back(run_case("A" + std::to_string(a),
                               sdir / ("fig3_a" + std::to_string(a) + ".ini"), m));
    }
    write_standard_curves(dir, fig, cases);
    for (const auto& c : cases) {
      double worst;
      const bool dec = strictly_decreasing(c.sol.E_star.col(0), worst);
      as.check("effort strictly decreasing, " + c.label, dec,
               "largest step change " + format_number(worst));
      const double target = c.s.network.rho(0) / c.s.costs.R(0, 0);
      const double err = std::abs(c.sol.E_star(c.sol.E_star.rows() - 1, 0) - target);
      as.check("terminal effort rho/R, " + c.label, err <= 1e-9, "error " + format_number(err));
    }
    for (std::size_t i = 0; i + 1 < cases.size(); ++i) {
      bool ok;
      const auto d = ordering_detail(cases[i].sol.E_star.col(0), cases[i + 1].sol.E_star.col(0), ok);
      as.check("effort " + cases[i].label + " < " + cases[i + 1].label, ok, d);
    }
  } else if (fig == "fig4") {
    for (int k : {1, 2, 3}) {
      cases.push_back(run_case("case" + std::to_string(k),
                               sdir / ("fig4_case" + std::to_string(k) + ".ini"), m));
    }
    write_standard_curves(dir, fig, cases);
    for (std::size_t i = 0; i + 1 < cases.size(); ++i) {
      bool ok;
      const auto d = ordering_detail(cases[i].sol.E_star.col(1), cases[i + 1].sol.E_star.col(1), ok);
      as.check("node 2 effort " + cases[i].label + " < " + cases[i + 1].label, ok, d);
    }
    for (const auto& c : cases) {
      double worst;
      for (int i = 0; i < 2; ++i) {
        const bool dec = strictly_decreasing(c.sol.E_star.col(i), worst);
        as.check("node " + std::to_string(i + 1) + " effort decreasing, " + c.label, dec,
                 "largest step change " + format_number(worst));
      }
    }
  } else if (fig == "fig6") {
    for (int k : {1, 2, 3}) {
      cases.push_back(run_case("case" + std::to_string(k),
                               sdir / ("fig6_case" + std::to_string(k) + ".ini"), m));
    }
    write_standard_curves(dir, fig, cases);
    const double incoming =
        (cases[1].sol.E_star.col(1) - cases[2].sol.E_star.col(1)).cwiseAbs().maxCoeff();
    const double outgoing =
        (cases[0].sol.E_star.col(0) - cases[1].sol.E_star.col(0)).cwiseAbs().maxCoeff();
    as.check("self-accountability: incoming edge moves node 2 less than outgoing edge moves node 1",
             incoming < outgoing,
             "node 2 change " + format_number(incoming) + ", node 1 change " +
                 format_number(outgoing));
    for (int k : {1, 2}) {
      bool ok;
      const auto d = ordering_detail(cases[0].sol.E_star.col(0), cases[k].sol.E_star.col(0), ok);
      as.check("node 1 effort case1 < " + cases[k].label, ok, d);
    }
  } else if (fig == "fig7") {
    cases.push_back(run_case("identity", sdir / "fig7_identity.ini", m));
    cases.push_back(run_case("cycle", sdir / "fig7_cycle.ini", m));
    if (cases[0].s.sim.seed != cases[1].s.sim.seed) {
      throw ScenarioError("fig7 scenarios must share a seed");
    }
    write_standard_curves(dir, fig, cases);
    {
      auto f = open_out(dir / "fig7_terminal_payment.csv");
      f << "path,c_T_identity,c_T_cycle\n";
      for (int p = 0; p < cases[0].ens.n_paths; ++p) {
        f << p << "," << format_number(cases[0].ens.c_T(p)) << ","
          << format_number(cases[1].ens.c_T(p)) << "\n";
      }
    }
    const auto vd = sim::paired_variance_difference(cases[1].ens.c_T, cases[0].ens.c_T);
    as.check("var c_T cycle > identity (3 SE)", vd.diff > 3.0 * vd.std_error,
             "var cycle " + format_number(vd.var_x) + ", var identity " +
                 format_number(vd.var_y) + ", SE of difference " + format_number(vd.std_error));
    const auto mean_diff = agent::estimate(cases[1].ens.c_T - cases[0].ens.c_T);
    as.check("mean c_T unaffected by volatility structure (3 SE)",
             std::abs(mean_diff.mean) <= 3.0 * mean_diff.std_error + 1e-9,
             "paired mean difference " + format_number(mean_diff.mean) + " +/- " +
                 format_number(mean_diff.std_error));
  } else {
    throw UsageError("unknown figure '" + fig + "' (expected fig3, fig4, fig6, fig7)");
  }

  json j{{"command", "reproduce"}, {"figure", fig}, {"assertions", as.items}, {"pass", as.all}};
  {
    auto f = open_out(dir / (fig + "_assertions.json"));
    f << j.dump(2) << "\n";
  }
  std::ostringstream os;
  for (const auto& a : as.items) {
    os << (a["pass"].get<bool>() ? "PASS " : "FAIL ") << a["name"].get<std::string>() << " ("
       << a["detail"].get<std::string>() << ")\n";
  }
  os << "wrote " << dir.string() << "\n";
  emit(m, j, os.str());
  return as.all ? kOk : kNumerical;
}

void add_common(CLI::App* sub, Manifest& m, bool needs_scenario = true) {
  auto* opt = sub->add_option("--scenario", m.scenario, "Scenario file");
  if (needs_scenario) opt->required();
  sub->add_option("--out", m.out, "Output directory");
  sub->add_option("--seed", m.seed, "Override the random seed");
  sub->add_option("--paths", m.paths, "Override the number of Monte-Carlo paths");
  sub->add_option("--dt", m.dt, "Override the simulation step");
  sub->add_option("--grid", m.grid, "HJB grid as NY,NT");
  sub->add_option("--threads", m.threads, "Simulation threads (0: all cores)");
  sub->add_flag("--json", m.json, "Print the summary as JSON");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic contracts for networked cyber risk"};
  app.require_subcommand(1);
  Manifest m;
  bool per_path = false, full_info = false;
  std::string variant = "optimal", figure, scenario_dir = RISKCONTRACT_SCENARIO_DIR;

  auto* solve = app.add_subcommand("solve", "Solve the LQ contract");
  add_common(solve, m);
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo ensemble under the optimal contract");
  add_common(simulate, m);
  simulate->add_flag("--per-path", per_path, "Also dump every path");
  auto* verify = app.add_subcommand("verify", "IC, IR, martingale and benchmark checks");
  add_common(verify, m);
  verify->add_option("--contract", variant, "optimal | c0-half | zeta-zero");
  auto* hjb_cmd = app.add_subcommand("hjb", "Finite-difference solve of the single-node problem");
  add_common(hjb_cmd, m);
  hjb_cmd->add_flag("--full-information", full_info, "Optimise effort directly");
  auto* bench = app.add_subcommand("benchmark", "Information rent against full information");
  add_common(bench, m);
  auto* repro = app.add_subcommand("reproduce", "Reproduce a case-study dataset");
  add_common(repro, m, false);
  repro->add_option("figure", figure, "fig3 | fig4 | fig6 | fig7")->required();
  repro->add_option("--scenario-dir", scenario_dir, "Directory with the case-study scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (m.paths && *m.paths < 1) throw UsageError("--paths must be >= 1");
    if (m.dt && !(*m.dt > 0.0)) throw UsageError("--dt must be > 0");
    if (!m.grid.empty()) parse_grid(m.grid);
    if (*solve) return cmd_solve(m);
    if (*simulate) return cmd_simulate(m, per_path);
    if (*verify) return cmd_verify(m, variant);
    if (*hjb_cmd) return cmd_hjb(m, full_info);
    if (*bench) return cmd_benchmark(m);
    if (*repro) return cmd_reproduce(m, figure, scenario_dir);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid scenario\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return kValidation;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  }
  return kValidation;
}
