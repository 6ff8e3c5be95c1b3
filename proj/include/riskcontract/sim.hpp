#ifndef RISKCONTRACT_SIM_HPP
#define RISKCONTRACT_SIM_HPP

// Monte-Carlo simulation of the risk SDE
//
//   dY = (A Y - E) dt + Sigma(Y) dB,   Y_0 = y0
//
// by Euler-Maruyama, together with the agent's income M_t and cumulative
// payment c_t under a contract of the form
//
//   dM = [r h(M)/h'(M) - f*/h'(M) - 1/2 h''(M)/h'(M)^3 |Sigma' zeta|^2] dt
//        + (1/h'(M)) zeta' (dY - A Y dt + E* dt),       dc = dM - p dt
//
// where f* is the agent's running cost at the suggested effort E*. For a
// linear terminal cost h(M) = gamma M the update is integrated exactly in the
// interest term, which makes the discounted agent-cost process an exact
// discrete martingale under compliance.
//
// Y is not clamped: negative excursions are admissible model behaviour.

#include "riskcontract/format.hpp"
#include "riskcontract/lq.hpp"
#include "riskcontract/model.hpp"
#include "riskcontract/rng.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <ostream>
#include <thread>
#include <exception>

namespace riskcontract::sim {

/// Effort process E_t, always projected onto the box [0, upper].
/// An empty `upper` means no upper bound.
class EffortPolicy {
 public:
  using FeedbackFn = std::function<Vector(double t, const Vector& y)>;

  static EffortPolicy gridded(Matrix path, Vector upper = {}) {
    EffortPolicy p;
    p.kind_ = Kind::Gridded;
    p.grid_ = std::move(path);
    p.upper_ = std::move(upper);
    return p;
  }

  static EffortPolicy feedback(FeedbackFn fn, Vector upper = {}) {
    EffortPolicy p;
    p.kind_ = Kind::Feedback;
    p.fn_ = std::move(fn);
    p.upper_ = std::move(upper);
    return p;
  }

  /// base + deviation (row k applies on step k), projected onto base's box.
  static EffortPolicy perturbed(const EffortPolicy& base, Matrix deviation) {
    EffortPolicy p;
    p.kind_ = Kind::Perturbed;
    p.base_ = std::make_shared<const EffortPolicy>(base);
    p.grid_ = std::move(deviation);
    p.upper_ = base.upper_;
    return p;
  }

  Vector effort(int step, double t, const Vector& y) const {
    Vector e(y.size());
    effort_into(step, t, y, e);
    return e;
  }

  /// As effort(), writing into a preallocated vector.
  void effort_into(int step, double t, const Vector& y, Vector& out) const {
    switch (kind_) {
      case Kind::Gridded:
        out = grid_.row(step).transpose();
        break;
      case Kind::Feedback:
        out = fn_(t, y);
        break;
      case Kind::Perturbed:
        base_->effort_into(step, t, y, out);
        out += grid_.row(step).transpose();
        break;
    }
    clamp(out);
  }

  Vector project(const Vector& e) const {
    Vector out = e;
    clamp(out);
    return out;
  }

  /// Largest step index this policy can serve, or -1 when unbounded.
  int max_step() const {
    switch (kind_) {
      case Kind::Gridded:
        return static_cast<int>(grid_.rows()) - 1;
      case Kind::Feedback:
        return -1;
      case Kind::Perturbed: {
        const int b = base_->max_step();
        const int d = static_cast<int>(grid_.rows()) - 1;
        return b < 0 ? d : std::min(b, d);
      }
    }
    return -1;
  }

  const Vector& upper() const { return upper_; }

 private:
  void clamp(Vector& e) const {
    e = e.cwiseMax(0.0);
    if (upper_.size() == e.size()) e = e.cwiseMin(upper_);
  }

  enum class Kind { Gridded, Feedback, Perturbed };
  Kind kind_ = Kind::Gridded;
  Matrix grid_;
  FeedbackFn fn_;
  std::shared_ptr<const EffortPolicy> base_;
  Vector upper_;
};

/// Agent terminal cost h_A with its first two derivatives and inverse.
struct TerminalCost {
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
  std::function<double(double)> inverse;
  bool is_linear = true;
  double gamma = -1.0;

  static TerminalCost linear(double gamma) {
    TerminalCost h;
    h.value = [gamma](double m) { return gamma * m; };
    h.d1 = [gamma](double) { return gamma; };
    h.d2 = [](double) { return 0.0; };
    h.inverse = [gamma](double v) { return v / gamma; };
    h.is_linear = true;
    h.gamma = gamma;
    return h;
  }

  /// h(M) = (e^{-aM} - 1)/a: the negated exponential utility of a risk-averse
  /// agent with absolute risk aversion a > 0. Decreasing, convex, bounded below
  /// by -1/a.
  static TerminalCost exponential_utility(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("risk aversion must be > 0");
    TerminalCost h;
    h.value = [a](double m) { return std::expm1(-a * m) / a; };
    h.d1 = [a](double m) { return -std::exp(-a * m); };
    h.d2 = [a](double m) { return a * std::exp(-a * m); };
    h.inverse = [a](double v) {
      if (!(v > -1.0 / a)) throw std::domain_error("value outside the range of h_A");
      return -std::log1p(a * v) / a;
    };
    h.is_linear = false;
    h.gamma = 0.0;
    return h;
  }
};

/// A contract of the incentive-compatible family: sensitivity zeta_t,
/// intermediate payment p_t, and virtual initial payment c0. The terminal
/// payment is c_T = c0 + integral of dc_t.
///
/// `observed_effort_gain` (optional, full-information only) adds a term that
/// pays Gamma_t' (E_t - E*_t) dt against the effort itself.
struct ContractPolicy {
  Matrix zeta;  // (steps+1) x n
  Vector p;     // steps+1
  double c0 = 0.0;
  TerminalCost h_A = TerminalCost::linear(-1.0);
  Matrix observed_effort_gain;
  bool risk_compensation = true;

  /// The optimal LQ contract: zeta = K, p = 0, c0 = -J_A_floor.
  static ContractPolicy from_lq(const lq::LQSolution& sol, const Scenario& s) {
    ContractPolicy c;
    c.zeta = sol.K;
    c.p = Vector::Zero(sol.K.rows());
    c.h_A = TerminalCost::linear(s.costs.gamma);
    c.c0 = c.h_A.inverse(s.costs.jA_floor);
    return c;
  }

  /// Zero-sensitivity contract with the given initial payment.
  static ContractPolicy flat(int steps, int n, double c0, double gamma = -1.0) {
    ContractPolicy c;
    c.zeta = Matrix::Zero(steps + 1, n);
    c.p = Vector::Zero(steps + 1);
    c.h_A = TerminalCost::linear(gamma);
    c.c0 = c0;
    return c;
  }
};

struct SimOptions {
  bool store_paths = false;
  int threads = 1;  // 0: hardware concurrency
};

/// Monte-Carlo trajectories and their per-time ensemble moments.
struct PathEnsemble {
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<double> times;
  int n_paths = 0;
  int n = 0;
  EffortPolicy policy;

  // Per-time ensemble mean and unbiased variance, row k = time k.
  Matrix mean_Y, var_Y;
  Vector mean_c, var_c, mean_M, var_M, mean_U, var_U;

  // Per-path terminal values.
  Matrix Y_T;           // n_paths x n
  Vector c_T, M_T;      // n_paths
  Vector fA_running;    // discounted running agent cost per path
  Vector agent_cost;    // fA_running + e^{-rT} h_A(M_T)

  bool has_contract = false;

  // Full trajectories, only with SimOptions::store_paths.
  std::vector<Matrix> Y_paths;  // [path] (steps+1) x n
  Matrix c_paths, M_paths;      // n_paths x (steps+1)

  // Monitors of the a.s. bounds on the volatility and effort integrals.
  double max_vol_integral = 0.0;
  bool vol_bounded = true;
  double max_effort_integral = 0.0;

  int steps() const { return static_cast<int>(times.size()) - 1; }

  /// Standard normal draws behind step `step` of path `path`; the Brownian
  /// increment is sqrt(dt) times this vector.
  Vector normal_draw(int path, int step) const {
    return NormalStream(seed).draw(static_cast<std::uint64_t>(path),
                                   static_cast<std::uint64_t>(step), n);
  }
};

/// One Euler-Maruyama step of the risk SDE.
inline Vector euler_step(const RiskNetwork& net, const Vector& y, const Vector& effort,
                         double dt, const Vector& dB) {
  return y + (net.A * y - effort) * dt + net.volatility.apply(y, dB);
}

/// Effort box used when the scenario does not fix e_max: ten times the
/// largest suggested effort per node (falling back to the overall maximum,
/// then to 1).
inline Vector effort_bound(const Scenario& s, const Matrix& suggested) {
  if (s.costs.e_max.size() == s.n()) return s.costs.e_max;
  Vector ub = suggested.colwise().maxCoeff().transpose() * 10.0;
  const double overall = ub.size() ? ub.maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < ub.size(); ++i) {
    if (!(ub(i) > 0.0)) ub(i) = overall > 0.0 ? overall : 1.0;
  }
  return ub;
}

namespace detail {

// Chan/Welford moment accumulator over a fixed number of columns per row.
struct Moments {
  double count = 0.0;
  Matrix mean;
  Matrix m2;

  Moments(Eigen::Index rows, Eigen::Index cols)
      : mean(Matrix::Zero(rows, cols)), m2(Matrix::Zero(rows, cols)) {}

  template <typename Row>
  void add(Eigen::Index r, const Row& x, double w_count) {
    const auto delta = (x - mean.row(r)).eval();
    mean.row(r) += delta / w_count;
    m2.row(r) += delta.cwiseProduct(x - mean.row(r));
  }

  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double total = count + o.count;
    const Matrix delta = o.mean - mean;
    mean += delta * (o.count / total);
    m2 += o.m2 + delta.cwiseProduct(delta) * (count * o.count / total);
    count = total;
  }

  Matrix variance() const {
    if (count < 2.0) return Matrix::Zero(mean.rows(), mean.cols());
    return m2 / (count - 1.0);
  }
};

struct Block {
  int first = 0;
  int last = 0;  // exclusive
  Moments y, cm;  // cm columns: c, M, U
  Block(int f, int l, Eigen::Index rows, Eigen::Index n)
      : first(f), last(l), y(rows, n), cm(rows, 3) {}
};

struct Context {
  const Scenario& s;
  const EffortPolicy& policy;
  const ContractPolicy* contract;
  const Matrix* suggested;
  int steps;
  double dt;
  std::vector<double> times;
  std::vector<double> discount;
  std::vector<double> fstar;  // agent running cost at the suggested effort
};

struct Monitors {
  double vol = 0.0;
  double effort = 0.0;
};

// Terminal arrays in `out` are written by path index only, so blocks may run
// concurrently against the same ensemble.
inline void run_block(const Context& ctx, Block& blk, PathEnsemble& out, Monitors& mon,
                      bool store) {
  const auto& net = ctx.s.network;
  const auto& costs = ctx.s.costs;
  const int n = net.n;
  const int steps = ctx.steps;
  const double dt = ctx.dt;
  const double sqdt = std::sqrt(dt);
  const double growth = std::exp(costs.r * dt);
  const NormalStream stream(ctx.s.sim.seed);
  const ContractPolicy* con = ctx.contract;
  const bool has_gain = con && con->observed_effort_gain.size() != 0;

  const auto vkind = net.volatility.kind;
  const Matrix& D = net.volatility.D;
  // |Sigma(y) 1|^2 is constant for a constant Sigma.
  const double const_vol = vkind == VolatilityKind::ConstantMatrix
                               ? (D * Vector::Ones(n)).squaredNorm()
                               : 0.0;
  Vector y(n), z(n), dy(n), e(n), ay(n), noise(n), estar(n), zeta(n), tmp(n);
  Eigen::RowVector3d cmu;
  for (int path = blk.first; path < blk.last; ++path) {
    y = net.y0;
    double M = con ? con->c0 : 0.0;
    double c = M;
    double acc = 0.0;
    double vol_int = 0.0, effort_int = 0.0;
    const double count = static_cast<double>(path - blk.first + 1);
    Matrix* ypath = store ? &out.Y_paths[path] : nullptr;

    for (int k = 0;; ++k) {
      blk.y.add(k, y.transpose(), count);
      if (con) {
        cmu << c, M, acc + ctx.discount[k] * con->h_A.value(M);
        blk.cm.add(k, cmu, count);
      }
      if (ypath) ypath->row(k) = y.transpose();
      if (store && con) {
        out.c_paths(path, k) = c;
        out.M_paths(path, k) = M;
      }
      if (k == steps) break;

      ctx.policy.effort_into(k, ctx.times[k], y, e);
      ay.noalias() = net.A * y;
      switch (vkind) {
        case VolatilityKind::Zero:
          noise.setZero();
          break;
        case VolatilityKind::ConstantMatrix:
          stream.fill(static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(k), z);
          noise.noalias() = D * z;
          noise *= sqdt;
          vol_int += const_vol * dt;
          break;
        case VolatilityKind::StateScaled:
          stream.fill(static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(k), z);
          tmp = y.cwiseProduct(z);
          noise.noalias() = D * tmp;
          noise *= sqdt;
          vol_int += (D * y).squaredNorm() * dt;
          break;
      }
      dy = (ay - e) * dt + noise;
      effort_int += e.cwiseAbs().sum() * dt;

      if (con) {
        estar = ctx.suggested->row(k).transpose();
        zeta = con->zeta.row(k).transpose();
        const double pay = con->p(k);
        const double fstar = ctx.fstar[k];
        tmp = dy - ay * dt + estar * dt;
        const double innovation = zeta.dot(tmp);
        double observed = 0.0;
        if (has_gain) {
          tmp = estar - e;
          observed = con->observed_effort_gain.row(k).dot(tmp.transpose()) * dt;
        }
        double M_next;
        if (con->h_A.is_linear) {
          const double g = con->h_A.gamma;
          M_next = growth * (M + (-fstar * dt + innovation + observed) / g);
        } else {
          const double h0 = con->h_A.value(M);
          const double h1 = con->h_A.d1(M);
          if (h1 == 0.0 || !std::isfinite(h1)) {
            throw NumericalError("simulate_contract: h_A'(M) = 0 on path " +
                                 std::to_string(path) + ", step " + std::to_string(k));
          }
          double drift = costs.r * h0 / h1 - fstar / h1;
          if (con->risk_compensation && vkind != VolatilityKind::Zero) {
            const double h2 = con->h_A.d2(M);
            tmp.noalias() = D.transpose() * zeta;
            if (vkind == VolatilityKind::StateScaled) tmp = tmp.cwiseProduct(y);
            drift -= 0.5 * h2 / h1 * tmp.squaredNorm() / (h1 * h1);
          }
          M_next = M + drift * dt + (innovation + observed) / h1;
        }
        acc += ctx.discount[k] * (costs.effort_cost(e) - costs.delta_A * pay) * dt;
        c += (M_next - M) - pay * dt;
        M = M_next;
      }
      y += dy;
      if (!y.allFinite() || !std::isfinite(M)) {
        throw NumericalError("simulation produced a non-finite state on path " +
                             std::to_string(path) + " at step " + std::to_string(k + 1));
      }
    }

    out.Y_T.row(path) = y.transpose();
    mon.effort = std::max(mon.effort, effort_int);
    mon.vol = std::max(mon.vol, vol_int);
    if (con) {
      out.c_T(path) = c;
      out.M_T(path) = M;
      out.fA_running(path) = acc;
      out.agent_cost(path) = acc + ctx.discount[steps] * con->h_A.value(M);
    }
  }
  blk.y.count = blk.cm.count = static_cast<double>(blk.last - blk.first);
}

// Paths are grouped in fixed blocks whose moments are merged in block order,
// so results do not depend on the number of threads.
constexpr int kBlockSize = 256;

inline PathEnsemble run(const Scenario& s, const EffortPolicy& policy,
                        const ContractPolicy* contract, const Matrix* suggested,
                        const SimOptions& opts) {
  require_valid(s);
  const int steps = s.steps();
  const int n = s.n();
  const int paths = s.sim.n_paths;
  if (policy.max_step() >= 0 && policy.max_step() < steps - 1) {
    throw std::invalid_argument("effort policy grid is shorter than the simulation grid");
  }
  if (contract) {
    if (contract->zeta.rows() != steps + 1 || contract->zeta.cols() != n ||
        contract->p.size() != steps + 1 || !suggested || suggested->rows() != steps + 1 ||
        suggested->cols() != n ||
        (contract->observed_effort_gain.size() != 0 &&
         (contract->observed_effort_gain.rows() != steps + 1 ||
          contract->observed_effort_gain.cols() != n))) {
      throw std::invalid_argument("contract grid does not match the simulation grid");
    }
    if ((contract->p.array() < 0.0).any() || (contract->p.array() > s.costs.p_max).any()) {
      throw std::invalid_argument("contract payment outside [0, p_max]");
    }
  }

  Context ctx{s, policy, contract, suggested, steps, s.step_size(),
              lq::uniform_grid(s.costs.T, steps), {}};
  ctx.discount.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) ctx.discount[k] = std::exp(-s.costs.r * ctx.times[k]);
  if (contract) {
    ctx.fstar.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) {
      ctx.fstar[k] = s.costs.effort_cost(suggested->row(k).transpose()) -
                     s.costs.delta_A * contract->p(k);
    }
  }

  PathEnsemble out;
  out.seed = s.sim.seed;
  out.dt = ctx.dt;
  out.times = ctx.times;
  out.n_paths = paths;
  out.n = n;
  out.policy = policy;
  out.has_contract = contract != nullptr;
  out.Y_T.resize(paths, n);
  if (contract) {
    out.c_T.resize(paths);
    out.M_T.resize(paths);
    out.fA_running.resize(paths);
    out.agent_cost.resize(paths);
  }
  if (opts.store_paths) {
    out.Y_paths.assign(paths, Matrix(steps + 1, n));
    if (contract) {
      out.c_paths.resize(paths, steps + 1);
      out.M_paths.resize(paths, steps + 1);
    }
  }

  std::vector<Block> blocks;
  for (int first = 0; first < paths; first += kBlockSize) {
    blocks.emplace_back(first, std::min(paths, first + kBlockSize), steps + 1, n);
  }

  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::max(1, std::min<int>(threads, static_cast<int>(blocks.size())));
  std::vector<Monitors> monitors(threads);
  if (threads == 1) {
    for (auto& b : blocks) run_block(ctx, b, out, monitors[0], opts.store_paths);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = w; b < blocks.size(); b += threads) {
            run_block(ctx, blocks[b], out, monitors[w], opts.store_paths);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  for (const auto& m : monitors) {
    out.max_effort_integral = std::max(out.max_effort_integral, m.effort);
    out.max_vol_integral = std::max(out.max_vol_integral, m.vol);
  }

  Moments ym(steps + 1, n), cmm(steps + 1, 3);
  for (const auto& b : blocks) {
    ym.merge(b.y);
    cmm.merge(b.cm);
  }
  out.mean_Y = ym.mean;
  out.var_Y = ym.variance();
  if (contract) {
    const Matrix v = cmm.variance();
    out.mean_c = cmm.mean.col(0);
    out.mean_M = cmm.mean.col(1);
    out.mean_U = cmm.mean.col(2);
    out.var_c = v.col(0);
    out.var_M = v.col(1);
    out.var_U = v.col(2);
  }
  out.vol_bounded = out.max_vol_integral <= s.sim.vol_cap;
  return out;
}

}  // namespace detail

/// Simulates the risk SDE under `policy` with the scenario's seed, step, and
/// ensemble size.
inline PathEnsemble simulate_risk(const Scenario& s, const EffortPolicy& policy,
                                  const SimOptions& opts = {}) {
  return detail::run(s, policy, nullptr, nullptr, opts);
}

/// Adds payment, income, and agent-cost processes to an ensemble by replaying
/// its risk paths (bit-identical, same draws) under `contract`. `suggested` is
/// the effort the contract anticipates, (steps+1) x n.
inline PathEnsemble simulate_contract(const Scenario& s, const ContractPolicy& contract,
                                      const Matrix& suggested, const PathEnsemble& ensemble,
                                      const SimOptions& opts = {}) {
  if (ensemble.seed != s.sim.seed || ensemble.n_paths != s.sim.n_paths ||
      ensemble.steps() != s.steps() || ensemble.n != s.n()) {
    throw std::invalid_argument("ensemble was not produced from this scenario");
  }
  PathEnsemble out = detail::run(s, ensemble.policy, &contract, &suggested, opts);
  if (out.Y_T != ensemble.Y_T) {
    throw NumericalError("replayed risk paths differ from the ensemble");
  }
  return out;
}

/// Risk and contract in one pass.
inline PathEnsemble simulate(const Scenario& s, const EffortPolicy& policy,
                             const ContractPolicy& contract, const Matrix& suggested,
                             const SimOptions& opts = {}) {
  return detail::run(s, policy, &contract, &suggested, opts);
}

struct Quantiles {
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
};

struct EnsembleStats {
  std::vector<double> times;
  Matrix mean_Y, var_Y;
  Vector mean_c, var_c, mean_M, var_M;
  std::vector<Quantiles> terminal_Y;  // per node
  Quantiles terminal_c, terminal_M;
  // Per-time quantiles, filled only when the ensemble stored its paths.
  std::vector<std::vector<Quantiles>> Y_quantiles;  // [time][node]
  std::vector<Quantiles> c_quantiles;
};

inline Quantiles quantiles(std::vector<double> v) {
  Quantiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.q05 = at(0.05);
  q.q50 = at(0.5);
  q.q95 = at(0.95);
  return q;
}

struct VarianceDifference {
  double var_x = 0.0;
  double var_y = 0.0;
  double diff = 0.0;       // var_x - var_y
  double std_error = 0.0;  // of diff, from the paired squared deviations
};

/// Difference of sample variances of two paired samples (same draws).
inline VarianceDifference paired_variance_difference(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("paired_variance_difference: need two equal samples of size >= 2");
  }
  const double nn = static_cast<double>(x.size());
  const Vector dx = (x.array() - x.mean()).square().matrix();
  const Vector dy = (y.array() - y.mean()).square().matrix();
  const Vector w = dx - dy;
  VarianceDifference v;
  v.var_x = dx.sum() / (nn - 1.0);
  v.var_y = dy.sum() / (nn - 1.0);
  v.diff = v.var_x - v.var_y;
  const double wm = w.mean();
  v.std_error = std::sqrt((w.array() - wm).square().sum() / (nn - 1.0) / nn);
  return v;
}

inline EnsembleStats ensemble_stats(const PathEnsemble& e) {
  if (e.n_paths < 1) throw std::invalid_argument("ensemble_stats: empty ensemble");
  EnsembleStats st;
  st.times = e.times;
  st.mean_Y = e.mean_Y;
  st.var_Y = e.var_Y;
  st.mean_c = e.mean_c;
  st.var_c = e.var_c;
  st.mean_M = e.mean_M;
  st.var_M = e.var_M;
  for (int i = 0; i < e.n; ++i) {
    std::vector<double> col(e.Y_T.col(i).data(), e.Y_T.col(i).data() + e.n_paths);
    st.terminal_Y.push_back(quantiles(std::move(col)));
  }
  if (e.has_contract) {
    st.terminal_c = quantiles(std::vector<double>(e.c_T.data(), e.c_T.data() + e.n_paths));
    st.terminal_M = quantiles(std::vector<double>(e.M_T.data(), e.M_T.data() + e.n_paths));
  }
  if (!e.Y_paths.empty()) {
    const int steps = e.steps();
    st.Y_quantiles.resize(steps + 1);
    std::vector<double> buf(e.n_paths);
    for (int k = 0; k <= steps; ++k) {
      for (int i = 0; i < e.n; ++i) {
        for (int p = 0; p < e.n_paths; ++p) buf[p] = e.Y_paths[p](k, i);
        st.Y_quantiles[k].push_back(quantiles(buf));
      }
      if (e.has_contract) {
        for (int p = 0; p < e.n_paths; ++p) buf[p] = e.c_paths(p, k);
        st.c_quantiles.push_back(quantiles(buf));
      }
    }
  }
  return st;
}

/// Summary CSV: t, mean_Y_1..n, var_Y_1..n, mean_c, var_c.
inline void write_summary_csv(std::ostream& os, const PathEnsemble& e) {
  os << "t";
  for (int i = 0; i < e.n; ++i) os << ",mean_Y_" << i + 1;
  for (int i = 0; i < e.n; ++i) os << ",var_Y_" << i + 1;
  os << ",mean_c,var_c\n";
  for (std::size_t k = 0; k < e.times.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    os << format_number(e.times[k]);
    for (int i = 0; i < e.n; ++i) os << "," << format_number(e.mean_Y(r, i));
    for (int i = 0; i < e.n; ++i) os << "," << format_number(e.var_Y(r, i));
    if (e.has_contract) {
      os << "," << format_number(e.mean_c(r)) << "," << format_number(e.var_c(r));
    } else {
      os << ",nan,nan";
    }
    os << "\n";
  }
}

/// Per-path dump (requires stored paths): path, t, Y_1..n, c, M.
inline void write_paths_csv(std::ostream& os, const PathEnsemble& e) {
  if (e.Y_paths.empty()) throw std::invalid_argument("ensemble has no stored paths");
  os << "path,t";
  for (int i = 0; i < e.n; ++i) os << ",Y_" << i + 1;
  os << ",c,M\n";
  for (int p = 0; p < e.n_paths; ++p) {
    for (std::size_t k = 0; k < e.times.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      os << p << "," << format_number(e.times[k]);
      for (int i = 0; i < e.n; ++i) os << "," << format_number(e.Y_paths[p](r, i));
      if (e.has_contract) {
        os << "," << format_number(e.c_paths(p, r)) << "," << format_number(e.M_paths(p, r));
      } else {
        os << ",nan,nan";
      }
      os << "\n";
    }
  }
}

}  // namespace riskcontract::sim

#endif  // RISKCONTRACT_SIM_HPP
