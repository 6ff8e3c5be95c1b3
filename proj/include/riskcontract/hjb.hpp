#ifndef RISKCONTRACT_HJB_HPP
#define RISKCONTRACT_HJB_HPP

// Separated principal problem for a single node with linear agent terminal
// cost h_A(M) = gamma M.
//
// SP1 (estimation variable zeta, effort e(zeta) = f'^{-1}(zeta)):
//
//   -V_t + r V = min_zeta [ rho y - f(e(zeta))/gamma + V_y (A y - e(zeta)) ]
//                + 1/2 sigma(y)^2 V_yy,                    V(T, y) = rho y
//
// solved backward by an explicit monotone finite-difference scheme. In
// full-information mode the minimisation runs over the effort directly.
//
// SP2 (payment p) is pointwise in time:
//
//   min_p  f_{P,p}(p) - e^{-r(T-t)} p + f_{A,p}(p)/gamma,   p in [0, p_max]

#include "riskcontract/format.hpp"
#include "riskcontract/model.hpp"
#include "riskcontract/sim.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace riskcontract::hjb {

/// Explicit time step above the stability bound.
class StabilityError : public NumericalError {
 public:
  StabilityError(double requested, double max_dt)
      : NumericalError("time step " + format_number(requested) +
                       " violates the explicit stability bound; maximal admissible dt is " +
                       format_number(max_dt)),
        max_dt_(max_dt) {}
  double max_dt() const { return max_dt_; }

 private:
  double max_dt_;
};

/// Minimiser of a unimodal function on [a, b].
template <typename F>
double golden_section_min(F&& f, double a, double b, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > tol * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  // The endpoints of the original bracket are checked by callers that need them.
  return x;
}

enum class Mode { Hidden, FullInformation };
enum class ZetaSearch { FirstOrder, GoldenSection };

struct GridConfig {
  int ny = 400;
  int nt = 400;                    // output time slices
  std::optional<double> y_min;     // default -y_hi
  std::optional<double> y_max;     // default y_hi = 4 y0 e^{max(A,0) T}
  std::optional<double> zeta_max;  // default 10 rho e^{|A| T}
  double dt = 0.0;                 // internal step; 0 picks the stability bound
  Mode mode = Mode::Hidden;
  ZetaSearch search = ZetaSearch::FirstOrder;
};

struct ValueGrid {
  std::vector<double> y_axis;
  std::vector<double> t_axis;
  Matrix V;            // (nt+1) x ny, row j = time t_axis[j]
  Matrix zeta_star;
  Matrix effort_star;
  double zeta_max = 0.0;
  double effort_max = 0.0;
  double internal_dt = 0.0;
  int substeps = 0;
  Mode mode = Mode::Hidden;

  /// V at (t_axis[j], y) by linear interpolation in y.
  double value(int j, double y) const;
};

namespace detail {

inline std::size_t bracket(const std::vector<double>& axis, double x) {
  if (x < axis.front() || x > axis.back()) {
    throw std::out_of_range("query " + format_number(x) + " outside grid [" +
                            format_number(axis.front()) + ", " + format_number(axis.back()) +
                            "]; extrapolation refused");
  }
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - axis.begin());
  return std::min(i == 0 ? 0 : i - 1, axis.size() - 2);
}

inline double effort_of_zeta(const CostSpec& c, double zeta) {
  if (c.is_lq()) return std::max(zeta, 0.0) / c.R(0, 0);
  return c.marginal.inverse_marginal(zeta);
}

inline double scalar_cost(const CostSpec& c, double e) {
  if (c.is_lq()) return 0.5 * c.R(0, 0) * e * e;
  return c.marginal.cost(e);
}

inline double marginal_of_effort(const CostSpec& c, double e) {
  if (c.is_lq()) return c.R(0, 0) * e;
  return c.marginal.marginal(e);
}

}  // namespace detail

inline double ValueGrid::value(int j, double y) const {
  const std::size_t i = detail::bracket(y_axis, y);
  const double w = (y - y_axis[i]) / (y_axis[i + 1] - y_axis[i]);
  return (1.0 - w) * V(j, static_cast<Eigen::Index>(i)) + w * V(j, static_cast<Eigen::Index>(i + 1));
}

/// Bilinear interpolation of a per-cell field of `v`.
inline double interpolate(const ValueGrid& v, const Matrix& field, double t, double y) {
  const std::size_t j = detail::bracket(v.t_axis, t);
  const std::size_t i = detail::bracket(v.y_axis, y);
  const double wt = (t - v.t_axis[j]) / (v.t_axis[j + 1] - v.t_axis[j]);
  const double wy = (y - v.y_axis[i]) / (v.y_axis[i + 1] - v.y_axis[i]);
  const auto J = static_cast<Eigen::Index>(j), I = static_cast<Eigen::Index>(i);
  return (1 - wt) * ((1 - wy) * field(J, I) + wy * field(J, I + 1)) +
         wt * ((1 - wy) * field(J + 1, I) + wy * field(J + 1, I + 1));
}

/// Backward solve of SP1 on a single node.
inline ValueGrid solve_sp1(const Scenario& s, const GridConfig& cfg = {}) {
  require_valid(s);
  if (s.n() != 1) throw std::invalid_argument("solve_sp1 supports a single node only");
  if (cfg.ny < 5 || cfg.nt < 1) throw std::invalid_argument("grid needs ny >= 5 and nt >= 1");
  const auto& c = s.costs;
  const double A = s.network.A(0, 0);
  const double rho = s.network.rho(0);
  const double y0 = s.network.y0(0);
  const double T = c.T, r = c.r, gamma = c.gamma;
  const double inv_gamma = 1.0 / gamma;
  if (c.is_lq() && !(c.R(0, 0) > 0.0)) throw ScenarioError("R must be positive");

  const double y_hi = 4.0 * y0 * std::exp(std::max(A, 0.0) * T);
  const double lo = cfg.y_min.value_or(-y_hi);
  const double hi = cfg.y_max.value_or(y_hi);
  if (!(hi > lo)) throw std::invalid_argument("empty y domain");
  const double zmax = cfg.zeta_max.value_or(10.0 * std::max(rho, 0.0) * std::exp(std::abs(A) * T));

  ValueGrid v;
  v.mode = cfg.mode;
  v.zeta_max = zmax;
  v.effort_max = detail::effort_of_zeta(c, zmax);
  const int ny = cfg.ny;
  const double dy = (hi - lo) / (ny - 1);
  v.y_axis.resize(ny);
  for (int i = 0; i < ny; ++i) v.y_axis[i] = lo + dy * i;
  v.y_axis.back() = hi;
  v.t_axis = lq::uniform_grid(T, cfg.nt);

  std::vector<double> sig2(ny);
  double sig2_max = 0.0;
  for (int i = 0; i < ny; ++i) {
    Vector y(1);
    y << v.y_axis[i];
    const double sg = s.network.volatility.sigma(y)(0, 0);
    sig2[i] = sg * sg;
    sig2_max = std::max(sig2_max, sig2[i]);
  }
  const double b_max = std::abs(A) * std::max(std::abs(lo), std::abs(hi)) + v.effort_max;
  const double dt_stable = 1.0 / (r + b_max / dy + sig2_max / (dy * dy));
  const double dt_out = T / cfg.nt;
  if (cfg.dt > 0.0 && cfg.dt > dt_stable) throw StabilityError(cfg.dt, dt_stable);
  const double dt_target = cfg.dt > 0.0 ? cfg.dt : dt_stable;
  v.substeps = std::max(1, static_cast<int>(std::ceil(dt_out / dt_target - 1e-12)));
  v.internal_dt = dt_out / v.substeps;
  const double dt = v.internal_dt;

  // Minimiser of  -f(e)/gamma - p e  for the local gradient p = V_y.
  auto control = [&](double p, double& zeta, double& e) {
    if (cfg.mode == Mode::Hidden) {
      if (cfg.search == ZetaSearch::FirstOrder || c.is_lq()) {
        zeta = std::clamp(-gamma * p, 0.0, zmax);
      } else {
        auto g = [&](double z) {
          const double ez = detail::effort_of_zeta(c, z);
          return -inv_gamma * detail::scalar_cost(c, ez) - p * ez;
        };
        zeta = golden_section_min(g, 0.0, zmax);
        if (g(0.0) <= g(zeta)) zeta = 0.0;
        if (g(zmax) < g(zeta)) zeta = zmax;
      }
      e = detail::effort_of_zeta(c, zeta);
    } else {
      if (c.is_lq()) {
        e = std::clamp(-gamma * p / c.R(0, 0), 0.0, v.effort_max);
      } else {
        auto g = [&](double x) { return -inv_gamma * detail::scalar_cost(c, x) - p * x; };
        e = golden_section_min(g, 0.0, v.effort_max);
        if (g(0.0) <= g(e)) e = 0.0;
        if (g(v.effort_max) < g(e)) e = v.effort_max;
      }
      zeta = detail::marginal_of_effort(c, e);
    }
  };

  const int nt = cfg.nt;
  v.V.resize(nt + 1, ny);
  v.zeta_star.resize(nt + 1, ny);
  v.effort_star.resize(nt + 1, ny);

  Eigen::VectorXd cur(ny), next(ny);
  for (int i = 0; i < ny; ++i) cur(i) = rho * v.y_axis[i];

  auto record = [&](int j) {
    v.V.row(j) = cur.transpose();
    for (int i = 0; i < ny; ++i) {
      double p;
      if (i == 0) p = (cur(1) - cur(0)) / dy;
      else if (i == ny - 1) p = (cur(ny - 1) - cur(ny - 2)) / dy;
      else p = (cur(i + 1) - cur(i - 1)) / (2 * dy);
      double z, e;
      control(p, z, e);
      v.zeta_star(j, i) = z;
      v.effort_star(j, i) = e;
    }
  };
  record(nt);

  for (int j = nt - 1; j >= 0; --j) {
    for (int sub = 0; sub < v.substeps; ++sub) {
      for (int i = 1; i < ny - 1; ++i) {
        const double y = v.y_axis[i];
        const double pc = (cur(i + 1) - cur(i - 1)) / (2 * dy);
        double z, e;
        control(pc, z, e);
        const double b = A * y - e;
        const double p_up = b > 0.0 ? (cur(i + 1) - cur(i)) / dy : (cur(i) - cur(i - 1)) / dy;
        const double vyy = (cur(i + 1) - 2 * cur(i) + cur(i - 1)) / (dy * dy);
        const double run = rho * y - inv_gamma * detail::scalar_cost(c, e);
        next(i) = cur(i) + dt * (run + b * p_up + 0.5 * sig2[i] * vyy - r * cur(i));
      }
      next(0) = 2 * next(1) - next(2);
      next(ny - 1) = 2 * next(ny - 2) - next(ny - 3);
      cur.swap(next);
    }
    if (!cur.allFinite()) {
      throw NumericalError("solve_sp1: non-finite value at t = " + format_number(v.t_axis[j]));
    }
    record(j);
  }
  return v;
}

struct ExtractedPolicy {
  sim::EffortPolicy feedback;
  std::vector<double> t;
  Vector y_mean;       // mean-dynamics trajectory
  Vector zeta_path;    // zeta* along it
  Vector effort_path;  // effort along it
};

/// Feedback effort from the solved grid and the gridded zeta/effort path
/// along the deterministic mean dynamics on the scenario grid.
inline ExtractedPolicy extract_policy(const ValueGrid& v, const Scenario& s) {
  if (s.n() != 1) throw std::invalid_argument("extract_policy supports a single node only");
  auto grid = std::make_shared<const ValueGrid>(v);
  ExtractedPolicy out;
  out.feedback = sim::EffortPolicy::feedback(
      [grid](double t, const Vector& y) {
        Vector e(1);
        e << interpolate(*grid, grid->effort_star, t, y(0));
        return e;
      },
      s.costs.e_max);
  const int steps = s.steps();
  const double dt = s.step_size();
  const double A = s.network.A(0, 0);
  out.t = lq::uniform_grid(s.costs.T, steps);
  out.y_mean.resize(steps + 1);
  out.zeta_path.resize(steps + 1);
  out.effort_path.resize(steps + 1);
  double y = s.network.y0(0);
  for (int k = 0; k <= steps; ++k) {
    out.y_mean(k) = y;
    out.zeta_path(k) = interpolate(v, v.zeta_star, out.t[k], y);
    out.effort_path(k) = interpolate(v, v.effort_star, out.t[k], y);
    y += (A * y - out.effort_path(k)) * dt;
  }
  return out;
}

/// CSV: t, y, V, zeta_star, effort_star.
inline void write_csv(std::ostream& os, const ValueGrid& v) {
  os << "t,y,V,zeta_star,effort_star\n";
  for (std::size_t j = 0; j < v.t_axis.size(); ++j) {
    for (std::size_t i = 0; i < v.y_axis.size(); ++i) {
      const auto J = static_cast<Eigen::Index>(j), I = static_cast<Eigen::Index>(i);
      os << format_number(v.t_axis[j]) << "," << format_number(v.y_axis[i]) << ","
         << format_number(v.V(J, I)) << "," << format_number(v.zeta_star(J, I)) << ","
         << format_number(v.effort_star(J, I)) << "\n";
    }
  }
}

struct PaymentSchedule {
  std::vector<double> t_axis;
  Vector p_star;
};

using PaymentCost = std::function<double(double)>;

/// SP2 for arbitrary payment costs f_{P,p}, f_{A,p}: Brent minimisation on
/// [0, p_max] at each time, with the endpoints checked explicitly.
inline PaymentSchedule solve_sp2(const std::vector<double>& t_axis, double r, double T,
                                 double gamma, double p_max, const PaymentCost& f_Pp,
                                 const PaymentCost& f_Ap) {
  PaymentSchedule out;
  out.t_axis = t_axis;
  out.p_star.resize(static_cast<Eigen::Index>(t_axis.size()));
  for (std::size_t k = 0; k < t_axis.size(); ++k) {
    const double disc = std::exp(-r * (T - t_axis[k]));
    auto phi = [&](double p) { return f_Pp(p) - disc * p + f_Ap(p) / gamma; };
    double p = boost::math::tools::brent_find_minima(
                   phi, 0.0, p_max, std::numeric_limits<double>::digits / 2)
                   .first;
    if (phi(0.0) <= phi(p)) p = 0.0;
    if (phi(p_max) < phi(p)) p = p_max;
    out.p_star(static_cast<Eigen::Index>(k)) = p;
  }
  return out;
}

/// SP2 for the scenario's linear payment costs delta_P p and delta_A p:
/// bang-bang on the sign of delta_P + delta_A/gamma - e^{-r(T-t)}, with p = 0
/// where the coefficient vanishes.
inline PaymentSchedule solve_sp2(const Scenario& s, const std::vector<double>& t_axis) {
  const auto& c = s.costs;
  PaymentSchedule out;
  out.t_axis = t_axis;
  out.p_star.resize(static_cast<Eigen::Index>(t_axis.size()));
  for (std::size_t k = 0; k < t_axis.size(); ++k) {
    const double coef = c.delta_P + c.delta_A / c.gamma - std::exp(-c.r * (c.T - t_axis[k]));
    out.p_star(static_cast<Eigen::Index>(k)) = coef < 0.0 ? c.p_max : 0.0;
  }
  return out;
}

inline PaymentSchedule solve_sp2(const Scenario& s) {
  return solve_sp2(s, lq::uniform_grid(s.costs.T, s.steps()));
}

}  // namespace riskcontract::hjb

#endif  // RISKCONTRACT_HJB_HPP
