#pragma once

/**
 * @file
 * @brief Multiple-shooting SQP (Gauss-Newton, condensed dense QP) shared by
 * the dual-quaternion controller and the decoupled baseline.
 *
 * A Model provides: nx, nu, nr, nr_terminal, State, Input, Ref, dt(),
 * horizon(), norm_tol(), u_min(), u_max(), step(), stage_residual(),
 * terminal_residual(), normalize(), norm_residual(), reference_state(),
 * reference_input(). See DqModel for the reference implementation.
 *
 * Node numbering: states x_1..x_N and inputs u_1..u_{N-1} are stored 0-based.
 * The condensed QP variable is z = [dx_1; du_1; ...; du_{N-1}], with dx_1
 * pinned to the measured state by equality rows. Inequality rows are the
 * input boxes (one unit row per input component) followed by one linearized
 * norm-band row per node 2..N. A norm row is linearized at the shooting image
 * F(x_{k-1}, u_{k-1}); when the model's step normalizes, these rows vanish.
 */

#include "dqnmpc/qp.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqnmpc {

enum class SqpMode { full_sqp, rti };
enum class StepRule { full_step, backtracking };
enum class SolveStatus { converged, max_iter, qp_failed, stalled };
enum class InitStrategy { reference, rollout };

std::string to_string(SqpMode m);
std::string to_string(StepRule r);
std::string to_string(SolveStatus s);

struct SolverConfig {
  SqpMode mode{SqpMode::full_sqp};
  int max_sqp_iter{50};
  double tol_kkt{1e-6};
  StepRule step_rule{StepRule::backtracking};
  double alpha0{1.0};
  double beta{0.5};
  double armijo_c{1e-4};
  double levenberg{1e-8};
  double merit_penalty{1e4};
  double min_step{1e-10};
  /// Retry a rejected full step with the states re-simulated through the shooting map.
  bool second_order_correction{true};
  int qp_max_iter{1000};
  InitStrategy init{InitStrategy::reference};

  void validate() const;
};

struct SolveStats {
  int sqp_iters{0};
  KktResiduals kkt{};
  int qp_iters_total{0};
  double solve_time{0.0};
  SolveStatus status{SolveStatus::max_iter};
  /// True if at least one QP had to drop the norm-band rows to become feasible.
  bool relaxed{false};
  /// Full steps accepted only after the shooting-map correction.
  int corrections{0};
  double cost{0.0};
  /// Merit at every iterate visited by full SQP (the initial guess included).
  std::vector<double> merit_history;
};

template <class Model>
struct Trajectory {
  std::vector<typename Model::State> x;  ///< N states
  std::vector<typename Model::Input> u;  ///< N - 1 inputs
};

/// Gauss-Newton data of the condensed subproblem at one iterate.
struct Subproblem {
  DenseQp qp;
  std::vector<Eigen::MatrixXd> E;  ///< dx_k = E_k z + e_k
  std::vector<Eigen::VectorXd> e;
  std::vector<Eigen::VectorXd> r;  ///< residuals, N - 1 stages then the terminal one
  std::vector<Eigen::MatrixXd> Jx;
  std::vector<Eigen::MatrixXd> Ju;
  std::vector<double> norm_value;  ///< |P_k| - 1 per node
  double cost{0.0};                ///< sum of squared residuals
  double defect_l1{0.0};           ///< including the initial-state mismatch
  double eq_feas{0.0};
  double ineq_feas{0.0};
  int n_bound_rows{0};
};

template <class Model>
Trajectory<Model> shift_warm_start(const Model& model, const Trajectory<Model>& traj, double nodes = 1.0);

template <class Model>
class SqpSolver {
 public:
  using State = typename Model::State;
  using Input = typename Model::Input;
  using Ref = typename Model::Ref;
  using Traj = Trajectory<Model>;

  struct Result {
    Traj traj;
    SolveStats stats;
  };

  struct RtiResult {
    Input u;
    Traj traj;  ///< shifted warm start for the next call
    SolveStats stats;
  };

  SqpSolver(Model model, SolverConfig cfg) : model_(std::move(model)), cfg_(cfg) { cfg_.validate(); }

  const Model& model() const { return model_; }
  const SolverConfig& config() const { return cfg_; }
  void reset() { last_qp_.reset(); }

  /// Trajectory used when no warm start is given.
  Traj initial_guess(const State& x0, const std::vector<Ref>& refs) const;

  Subproblem build_subproblem(const State& x0, const Traj& traj, const std::vector<Ref>& refs,
                              bool relax_norm = false) const;

  /// Iterates until all four KKT residuals are below tol_kkt or max_sqp_iter is reached.
  Result solve(const State& x0, const std::vector<Ref>& refs, const Traj* warm = nullptr);

  /// One linearize-condense-solve-step cycle; the returned trajectory is shifted by `shift` nodes.
  RtiResult rti_step(const State& x0, const std::vector<Ref>& refs, const Traj& warm, double shift = 1.0);

  /// NLP KKT residuals at the iterate of `sp` with multipliers from `sol`.
  KktResiduals kkt_at(const Subproblem& sp, const QpSolution& sol) const;

 private:
  void check_sizes(const std::vector<Ref>& refs, const Traj* traj) const;
  Traj apply_step(const Traj& traj, const Subproblem& sp, const Eigen::VectorXd& dz, double alpha) const;
  double merit(const Subproblem& sp) const { return 0.5 * sp.cost + cfg_.merit_penalty * sp.defect_l1; }
  /// Merit without building the subproblem (no condensing).
  double merit_at(const State& x0, const Traj& traj, const std::vector<Ref>& refs) const;
  double merit_slope(const Subproblem& sp, const Eigen::VectorXd& dz) const;
  QpSolution solve_subproblem(Subproblem& sp, const State& x0, const Traj& traj, const std::vector<Ref>& refs,
                              SolveStats& stats);

  Model model_;
  SolverConfig cfg_;
  std::optional<QpSolution> last_qp_;
};

// ---------------------------------------------------------------------------

template <class Model>
Trajectory<Model> shift_warm_start(const Model& model, const Trajectory<Model>& traj, double nodes) {
  const int N = static_cast<int>(traj.x.size());
  const int M = static_cast<int>(traj.u.size());
  Trajectory<Model> out = traj;
  const auto interp = [](const auto& seq, int n, double pos) {
    const double c = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    const int i = std::min(static_cast<int>(std::floor(c)), n - 1);
    const double f = c - i;
    if (i + 1 >= n || f == 0.0) return seq[i];
    return typename std::decay_t<decltype(seq)>::value_type((1.0 - f) * seq[i] + f * seq[i + 1]);
  };
  for (int k = 0; k < N; ++k) out.x[k] = model.normalize(interp(traj.x, N, k + nodes));
  for (int k = 0; k < M; ++k) out.u[k] = interp(traj.u, M, k + nodes);
  return out;
}

template <class Model>
void SqpSolver<Model>::check_sizes(const std::vector<Ref>& refs, const Traj* traj) const {
  const int N = model_.horizon();
  if (static_cast<int>(refs.size()) != N) {
    throw DimensionMismatch("expected " + std::to_string(N) + " reference points, got " + std::to_string(refs.size()));
  }
  if (traj != nullptr && (static_cast<int>(traj->x.size()) != N || static_cast<int>(traj->u.size()) != N - 1)) {
    throw DimensionMismatch("trajectory length does not match the horizon");
  }
}

template <class Model>
typename SqpSolver<Model>::Traj SqpSolver<Model>::initial_guess(const State& x0, const std::vector<Ref>& refs) const {
  check_sizes(refs, nullptr);
  const int N = model_.horizon();
  Traj t;
  t.x.resize(N);
  t.u.resize(N - 1);
  t.x[0] = model_.normalize(x0);
  for (int k = 0; k + 1 < N; ++k) {
    t.u[k] = model_.reference_input(refs[k]).cwiseMax(model_.u_min()).cwiseMin(model_.u_max());
  }
  for (int k = 1; k < N; ++k) {
    t.x[k] = cfg_.init == InitStrategy::rollout ? model_.step(t.x[k - 1], t.u[k - 1]).y
                                                : model_.normalize(model_.reference_state(refs[k]));
  }
  return t;
}

template <class Model>
Subproblem SqpSolver<Model>::build_subproblem(const State& x0, const Traj& traj, const std::vector<Ref>& refs,
                                              bool relax_norm) const {
  check_sizes(refs, &traj);
  constexpr int nx = Model::nx;
  constexpr int nu = Model::nu;
  const int N = model_.horizon();
  const int n = nx + (N - 1) * nu;
  const double inf = std::numeric_limits<double>::infinity();

  Subproblem sp;
  sp.E.assign(N, Eigen::MatrixXd::Zero(nx, n));
  sp.e.assign(N, Eigen::VectorXd::Zero(nx));
  sp.r.resize(N);
  sp.Jx.resize(N);
  sp.Ju.resize(N - 1);
  sp.norm_value.resize(N);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);

  sp.E[0].leftCols(nx).setIdentity();
  const State mismatch = x0 - traj.x[0];
  sp.defect_l1 = mismatch.template lpNorm<1>();
  sp.eq_feas = mismatch.template lpNorm<Eigen::Infinity>();

  Eigen::Matrix<double, Model::nr, 1> r;
  Eigen::Matrix<double, Model::nr, nx> Jx;
  Eigen::Matrix<double, Model::nr, nu> Ju;
  std::vector<State> image(N);  // F(x_{k-1}, u_{k-1}) for k >= 1
  for (int k = 0; k < N; ++k) {
    const int cols = nx + k * nu;  // columns of z that dx_k depends on
    if (k + 1 < N) {
      const auto lin = model_.step(traj.x[k], traj.u[k]);
      image[k + 1] = lin.y;
      const State defect = traj.x[k + 1] - lin.y;
      sp.defect_l1 += defect.template lpNorm<1>();
      sp.eq_feas = std::max(sp.eq_feas, defect.template lpNorm<Eigen::Infinity>());
      sp.E[k + 1].leftCols(cols) = lin.A * sp.E[k].leftCols(cols);
      sp.E[k + 1].middleCols(cols, nu) = lin.B;
      sp.e[k + 1] = lin.A * sp.e[k] - defect;

      model_.stage_residual(traj.x[k], traj.u[k], refs[k], r, &Jx, &Ju);
      Eigen::MatrixXd Mk(Model::nr, cols + nu);
      Mk.leftCols(cols) = Jx * sp.E[k].leftCols(cols);
      Mk.rightCols(nu) = Ju;
      const Eigen::VectorXd m = r + Jx * sp.e[k];
      H.topLeftCorner(cols + nu, cols + nu).template selfadjointView<Eigen::Lower>().rankUpdate(Mk.transpose());
      g.head(cols + nu).noalias() += Mk.transpose() * m;
      sp.cost += r.squaredNorm();
      sp.r[k] = r;
      sp.Jx[k] = Jx;
      sp.Ju[k] = Ju;
    } else {
      Eigen::Matrix<double, Model::nr_terminal, 1> rt;
      Eigen::Matrix<double, Model::nr_terminal, nx> Jt;
      model_.terminal_residual(traj.x[k], refs[k], rt, &Jt);
      const Eigen::MatrixXd Mk = Jt * sp.E[k];
      const Eigen::VectorXd m = rt + Jt * sp.e[k];
      H.template selfadjointView<Eigen::Lower>().rankUpdate(Mk.transpose());
      g.noalias() += Mk.transpose() * m;
      sp.cost += rt.squaredNorm();
      sp.r[k] = rt;
      sp.Jx[k] = Jt;
    }
  }
  H = H.template selfadjointView<Eigen::Lower>();
  H.diagonal().array() += cfg_.levenberg;

  DenseQp& qp = sp.qp;
  qp.H = std::move(H);
  qp.g = std::move(g);
  qp.Aeq = Eigen::MatrixXd::Zero(nx, n);
  qp.Aeq.leftCols(nx).setIdentity();
  qp.beq = mismatch;

  const int nb = (N - 1) * nu;
  const int m_rows = nb + (N - 1);
  sp.n_bound_rows = nb;
  qp.Aineq = Eigen::MatrixXd::Zero(m_rows, n);
  qp.lb.resize(m_rows);
  qp.ub.resize(m_rows);
  for (int k = 0; k + 1 < N; ++k) {
    for (int j = 0; j < nu; ++j) {
      const int row = k * nu + j;
      qp.Aineq(row, nx + row) = 1.0;
      qp.lb[row] = model_.u_min()[j] - traj.u[k][j];
      qp.ub[row] = model_.u_max()[j] - traj.u[k][j];
      sp.ineq_feas = std::max({sp.ineq_feas, -qp.ub[row], qp.lb[row]});
    }
  }
  Eigen::Matrix<double, 1, nx> grad;
  const double tol = model_.norm_tol();
  for (int k = 0; k < N; ++k) {
    sp.norm_value[k] = model_.norm_residual(traj.x[k], &grad);
    if (k == 0) continue;
    const int row = nb + k - 1;
    sp.ineq_feas = std::max(sp.ineq_feas, std::abs(sp.norm_value[k]) - tol);
    if (relax_norm) {
      qp.lb[row] = -inf;
      qp.ub[row] = inf;
      continue;
    }
    // Linearized about the shooting image F rather than the node iterate: both describe the same
    // post-step point x_k + dx_k, but only F lies on the image of the (normalizing) step.
    const double nF = model_.norm_residual(image[k], &grad);
    qp.Aineq.row(row) = grad * sp.E[k];
    const double shift = nF + grad.dot(sp.e[k] + (traj.x[k] - image[k]));
    qp.lb[row] = -tol - shift;
    qp.ub[row] = tol - shift;
  }
  return sp;
}

template <class Model>
KktResiduals SqpSolver<Model>::kkt_at(const Subproblem& sp, const QpSolution& sol) const {
  const DenseQp& qp = sp.qp;
  KktResiduals k;
  Eigen::VectorXd grad = qp.g + qp.Aeq.transpose() * sol.lam_eq + qp.Aineq.transpose() * (sol.mu_upper - sol.mu_lower);
  k.stationarity = grad.template lpNorm<Eigen::Infinity>();
  k.eq_feas = sp.eq_feas;
  k.ineq_feas = sp.ineq_feas;
  const double tol = model_.norm_tol();
  for (int i = 0; i < qp.Aineq.rows(); ++i) {
    double slack_hi;
    double slack_lo;
    if (i < sp.n_bound_rows) {
      // Rows are evaluated at dz = 0, i.e. at the iterate itself.
      slack_hi = qp.ub[i];
      slack_lo = -qp.lb[i];
    } else {
      const double v = sp.norm_value[i - sp.n_bound_rows + 1];
      slack_hi = tol - v;
      slack_lo = tol + v;
    }
    k.comp = std::max({k.comp, std::abs(sol.mu_upper[i] * slack_hi), std::abs(sol.mu_lower[i] * slack_lo)});
  }
  return k;
}

template <class Model>
typename SqpSolver<Model>::Traj SqpSolver<Model>::apply_step(const Traj& traj, const Subproblem& sp,
                                                             const Eigen::VectorXd& dz, double alpha) const {
  constexpr int nx = Model::nx;
  constexpr int nu = Model::nu;
  Traj out = traj;
  for (size_t k = 0; k < traj.x.size(); ++k) {
    const Eigen::VectorXd dx = sp.E[k] * dz + sp.e[k];
    out.x[k] = model_.normalize(traj.x[k] + alpha * State(dx));
  }
  for (size_t k = 0; k < traj.u.size(); ++k) {
    out.u[k] = traj.u[k] + alpha * Input(dz.segment(nx + static_cast<int>(k) * nu, nu));
  }
  return out;
}

template <class Model>
double SqpSolver<Model>::merit_at(const State& x0, const Traj& traj, const std::vector<Ref>& refs) const {
  const int N = model_.horizon();
  double cost = 0.0;
  double l1 = (x0 - traj.x[0]).template lpNorm<1>();
  Eigen::Matrix<double, Model::nr, 1> r;
  for (int k = 0; k + 1 < N; ++k) {
    l1 += (traj.x[k + 1] - model_.step(traj.x[k], traj.u[k]).y).template lpNorm<1>();
    model_.stage_residual(traj.x[k], traj.u[k], refs[k], r, nullptr, nullptr);
    cost += r.squaredNorm();
  }
  Eigen::Matrix<double, Model::nr_terminal, 1> rt;
  model_.terminal_residual(traj.x[N - 1], refs[N - 1], rt, nullptr);
  cost += rt.squaredNorm();
  return 0.5 * cost + cfg_.merit_penalty * l1;
}

template <class Model>
double SqpSolver<Model>::merit_slope(const Subproblem& sp, const Eigen::VectorXd& dz) const {
  constexpr int nx = Model::nx;
  constexpr int nu = Model::nu;
  double slope = 0.0;
  for (size_t k = 0; k < sp.r.size(); ++k) {
    Eigen::VectorXd lin = sp.Jx[k] * (sp.E[k] * dz + sp.e[k]);
    if (k < sp.Ju.size()) lin += sp.Ju[k] * dz.segment(nx + static_cast<int>(k) * nu, nu);
    slope += sp.r[k].dot(lin);
  }
  return slope - cfg_.merit_penalty * sp.defect_l1;
}

template <class Model>
QpSolution SqpSolver<Model>::solve_subproblem(Subproblem& sp, const State& x0, const Traj& traj,
                                              const std::vector<Ref>& refs, SolveStats& stats) {
  QpOptions opt;
  opt.max_iter = cfg_.qp_max_iter;
  QpSolution sol = solve_qp(sp.qp, last_qp_, opt);
  stats.qp_iters_total += sol.iterations;
  if (sol.status == QpStatus::infeasible) {
    sp = build_subproblem(x0, traj, refs, true);
    sol = solve_qp(sp.qp, std::nullopt, opt);
    stats.qp_iters_total += sol.iterations;
    stats.relaxed = true;
  }
  return sol;
}

template <class Model>
typename SqpSolver<Model>::Result SqpSolver<Model>::solve(const State& x0, const std::vector<Ref>& refs,
                                                          const Traj* warm) {
  const auto t_start = std::chrono::steady_clock::now();
  check_sizes(refs, warm);
  Result res;
  res.traj = warm ? *warm : initial_guess(x0, refs);
  for (auto& x : res.traj.x) x = model_.normalize(x);
  SolveStats& st = res.stats;
  std::optional<QpSolution> prev;
  const State x0n = model_.normalize(x0);
  for (;;) {
    Subproblem sp = build_subproblem(x0n, res.traj, refs);
    st.cost = sp.cost;
    st.merit_history.push_back(merit(sp));
    if (prev) {
      st.kkt = kkt_at(sp, *prev);
      if (st.kkt.max() < cfg_.tol_kkt) {
        st.status = SolveStatus::converged;
        break;
      }
    }
    if (st.sqp_iters >= cfg_.max_sqp_iter) {
      st.status = SolveStatus::max_iter;
      break;
    }
    QpSolution sol = solve_subproblem(sp, x0n, res.traj, refs, st);
    ++st.sqp_iters;
    if (sol.status != QpStatus::optimal) {
      st.status = SolveStatus::qp_failed;
      last_qp_.reset();
      break;
    }
    last_qp_ = sol;
    double alpha = cfg_.alpha0;
    Traj trial = apply_step(res.traj, sp, sol.x, alpha);
    if (cfg_.step_rule == StepRule::backtracking) {
      const double phi0 = merit(sp);
      const double slope = std::min(0.0, merit_slope(sp, sol.x));
      // Slack for rounding in the merit itself, so steps near a fixed point are not rejected.
      const double slack = 1e-12 * std::max(1.0, std::abs(phi0));
      const auto armijo = [&](const Traj& t, double a) {
        return merit_at(x0n, t, refs) <= phi0 + cfg_.armijo_c * a * slope + slack;
      };
      bool accepted = false;
      while (alpha >= cfg_.min_step) {
        if (armijo(trial, alpha)) {
          accepted = true;
          break;
        }
        if (alpha == cfg_.alpha0 && cfg_.second_order_correction) {
          // Full step rejected: retry it with the states re-simulated from the new inputs, which
          // removes the second-order defects a full step creates (Maratos effect).
          Traj corrected = trial;
          for (size_t k = 0; k + 1 < corrected.x.size(); ++k) {
            corrected.x[k + 1] = model_.step(corrected.x[k], corrected.u[k]).y;
          }
          if (armijo(corrected, alpha)) {
            trial = std::move(corrected);
            ++st.corrections;
            accepted = true;
            break;
          }
        }
        alpha *= cfg_.beta;
        trial = apply_step(res.traj, sp, sol.x, alpha);
      }
      if (!accepted) {
        st.kkt = kkt_at(sp, sol);
        st.status = SolveStatus::stalled;
        break;
      }
    }
    res.traj = std::move(trial);
    prev = std::move(sol);
  }
  st.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

template <class Model>
typename SqpSolver<Model>::RtiResult SqpSolver<Model>::rti_step(const State& x0, const std::vector<Ref>& refs,
                                                                const Traj& warm, double shift) {
  const auto t_start = std::chrono::steady_clock::now();
  check_sizes(refs, &warm);
  RtiResult out;
  SolveStats& st = out.stats;
  const State x0n = model_.normalize(x0);
  Subproblem sp = build_subproblem(x0n, warm, refs);
  st.cost = sp.cost;
  QpSolution sol = solve_subproblem(sp, x0n, warm, refs, st);
  st.sqp_iters = 1;
  if (sol.status != QpStatus::optimal) {
    st.status = SolveStatus::qp_failed;
    last_qp_.reset();
    out.u = warm.u.front();
    out.traj = shift_warm_start(model_, warm, shift);
  } else {
    st.kkt = kkt_at(sp, sol);
    st.status = st.kkt.max() < cfg_.tol_kkt ? SolveStatus::converged : SolveStatus::max_iter;
    const Traj next = apply_step(warm, sp, sol.x, 1.0);
    out.u = next.u.front();
    out.traj = shift_warm_start(model_, next, shift);
    last_qp_ = std::move(sol);
  }
  st.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace dqnmpc
