#include "dqnmpc/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dqnmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroRow = 1e-12;

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Constraint row scaled to unit norm. A row with a single nonzero is a bound
// on that variable and is handled by fixing the variable when active.
struct Row {
  VectorXd a;
  double lo{-kInf};
  double hi{kInf};
  double scale{1.0};  // original row = scale * a
  int var{-1};
  double coef{0.0};
  bool equality{false};
  int source{-1};
};

struct Active {
  int row;
  int side;  // -1 lower, +1 upper, 0 equality
};

struct Problem {
  MatrixXd H;
  VectorXd g;
  std::vector<Row> rows;
  int n() const { return static_cast<int>(g.size()); }
};

double target(const Row& r, int side) { return side > 0 ? r.hi : r.lo; }

void classify(Row& r) {
  int nnz = 0;
  int idx = -1;
  for (int j = 0; j < r.a.size(); ++j) {
    if (r.a[j] != 0.0) {
      ++nnz;
      idx = j;
    }
  }
  if (nnz == 1) {
    r.var = idx;
    r.coef = r.a[idx];
  } else {
    r.var = -1;
    r.coef = 0.0;
  }
}

// Returns false if the row is (numerically) zero.
bool make_row(const VectorXd& a, double lo, double hi, bool equality, int source, Row& out) {
  const double s = a.norm();
  if (!(s > kZeroRow)) return false;
  out.a = a / s;
  out.lo = lo / s;
  out.hi = hi / s;
  out.scale = s;
  out.equality = equality;
  out.source = source;
  classify(out);
  return true;
}

struct Eqp {
  VectorXd x;
  VectorXd nu;  // one multiplier per working-set entry (scaled rows)
};

// Minimizer of the objective restricted to the working set; false if the
// reduced Hessian or the constraint Schur complement cannot be factorized.
bool solve_eqp(const Problem& P, const std::vector<Active>& W, const QpOptions& opt, double& reg, Eqp& out) {
  const int n = P.n();
  std::vector<int> fixed_row(n, -1);
  VectorXd x = VectorXd::Zero(n);
  std::vector<int> general;
  for (int k = 0; k < static_cast<int>(W.size()); ++k) {
    const Row& r = P.rows[W[k].row];
    if (r.var >= 0) {
      fixed_row[r.var] = k;
      x[r.var] = target(r, W[k].side) / r.coef;
    } else {
      general.push_back(k);
    }
  }
  std::vector<int> F;
  std::vector<int> B;
  for (int j = 0; j < n; ++j) (fixed_row[j] < 0 ? F : B).push_back(j);
  const int nf = static_cast<int>(F.size());
  const int mg = static_cast<int>(general.size());

  out.nu = VectorXd::Zero(static_cast<int>(W.size()));
  if (nf > 0) {
    MatrixXd Hff(nf, nf);
    VectorXd q(nf);
    for (int i = 0; i < nf; ++i) {
      for (int j = 0; j < nf; ++j) Hff(i, j) = P.H(F[i], F[j]);
      double s = P.g[F[i]];
      for (int b : B) s += P.H(F[i], b) * x[b];
      q[i] = s;
    }
    Eigen::LLT<MatrixXd> llt;
    double shift = reg;
    for (;;) {
      if (shift > 0.0) {
        llt.compute(Hff + shift * MatrixXd::Identity(nf, nf));
      } else {
        llt.compute(Hff);
      }
      if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 1e-12) break;
      shift = shift == 0.0 ? opt.base_regularization : 10.0 * shift;
      if (shift > opt.max_regularization * (1.0 + 1e-12)) return false;
    }
    reg = shift;
    VectorXd xf = llt.solve(-q);
    if (mg > 0) {
      MatrixXd G(mg, nf);
      VectorXd rhs(mg);
      for (int i = 0; i < mg; ++i) {
        const Active& act = W[general[i]];
        const Row& r = P.rows[act.row];
        double s = target(r, act.side);
        for (int b : B) s -= r.a[b] * x[b];
        rhs[i] = s;
        for (int j = 0; j < nf; ++j) G(i, j) = r.a[F[j]];
      }
      const MatrixXd Y = llt.solve(G.transpose());
      const MatrixXd S = G * Y;
      Eigen::LDLT<MatrixXd> ldlt(S);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() < 1e-14 * (1.0 + S.norm())) {
        return false;
      }
      const VectorXd lam = ldlt.solve(G * xf - rhs);
      xf -= Y * lam;
      for (int i = 0; i < mg; ++i) out.nu[general[i]] = lam[i];
    }
    for (int i = 0; i < nf; ++i) x[F[i]] = xf[i];
  } else if (mg > 0) {
    // Every variable is fixed by a bound; remaining general rows must be redundant.
    return false;
  }

  if (!B.empty()) {
    VectorXd r = P.H * x + P.g;
    if (reg > 0.0) r += reg * x;
    for (int k : general) r += out.nu[k] * P.rows[W[k].row].a;
    for (int b : B) {
      const int k = fixed_row[b];
      out.nu[k] = -r[b] / P.rows[W[k].row].coef;
    }
  }
  out.x = std::move(x);
  return true;
}

double violation(const Row& r, double v) { return std::max({0.0, r.lo - v, v - r.hi}); }

struct CoreResult {
  VectorXd x;
  std::vector<Active> W;
  VectorXd nu;
  QpStatus status{QpStatus::max_iter};
  double reg{0.0};
};

// Primal active-set iterations from a feasible x satisfying the working set W.
CoreResult active_set(const Problem& P, VectorXd x, std::vector<Active> W, const QpOptions& opt, int& iters,
                      std::vector<double>* history) {
  const int m = static_cast<int>(P.rows.size());
  std::vector<char> in_w(m, 0);
  for (const auto& a : W) in_w[a.row] = 1;
  const double dual_tol = 1e-10 * (1.0 + P.g.lpNorm<Eigen::Infinity>());
  CoreResult res;
  Eqp eqp;
  while (iters < opt.max_iter) {
    ++iters;
    double reg = 0.0;
    if (!solve_eqp(P, W, opt, reg, eqp)) {
      res.status = QpStatus::infeasible;
      break;
    }
    res.reg = std::max(res.reg, reg);
    const VectorXd p = eqp.x - x;
    const double pn = p.lpNorm<Eigen::Infinity>();
    if (pn <= 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      x = eqp.x;
      int worst = -1;
      double worst_mu = -dual_tol;
      for (int k = 0; k < static_cast<int>(W.size()); ++k) {
        if (W[k].side == 0) continue;
        const double mu = W[k].side * eqp.nu[k];
        if (mu < worst_mu || (mu == worst_mu && worst >= 0 && W[k].row < W[worst].row)) {
          worst_mu = mu;
          worst = k;
        }
      }
      if (worst < 0) {
        res.status = QpStatus::optimal;
        res.nu = eqp.nu;
        break;
      }
      in_w[W[worst].row] = 0;
      W.erase(W.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    int block = -1;
    int block_side = 0;
    const double eps = 1e-13 * (1.0 + pn);
    for (int i = 0; i < m; ++i) {
      if (in_w[i]) continue;
      const Row& r = P.rows[i];
      const double ap = r.var >= 0 ? r.coef * p[r.var] : r.a.dot(p);
      if (ap > eps && r.hi < kInf) {
        const double ax = r.var >= 0 ? r.coef * x[r.var] : r.a.dot(x);
        const double step = std::max(0.0, (r.hi - ax) / ap);
        if (step < alpha) {
          alpha = step;
          block = i;
          block_side = 1;
        }
      } else if (ap < -eps && r.lo > -kInf) {
        const double ax = r.var >= 0 ? r.coef * x[r.var] : r.a.dot(x);
        const double step = std::max(0.0, (r.lo - ax) / ap);
        if (step < alpha) {
          alpha = step;
          block = i;
          block_side = -1;
        }
      }
    }
    x += alpha * p;
    if (block >= 0) {
      const Row& r = P.rows[block];
      if (r.var >= 0) x[r.var] = target(r, block_side) / r.coef;
      W.push_back({block, block_side});
      in_w[block] = 1;
    }
    if (history) history->push_back(0.5 * x.dot(P.H * x) + P.g.dot(x));
  }
  res.x = std::move(x);
  res.W = std::move(W);
  if (res.nu.size() != static_cast<int>(res.W.size())) res.nu = VectorXd::Zero(static_cast<int>(res.W.size()));
  return res;
}

double row_value(const Row& r, const VectorXd& x) { return r.var >= 0 ? r.coef * x[r.var] : r.a.dot(x); }

// Moves x onto the equality bounds and into the box of every bound row.
// Returns false if two bound rows on one variable conflict.
bool project_bounds(const Problem& P, VectorXd& x, double tol) {
  for (const Row& r : P.rows) {
    if (r.var < 0 || !r.equality) continue;
    x[r.var] = r.lo / r.coef;
  }
  for (const Row& r : P.rows) {
    if (r.var < 0 || r.equality) continue;
    const double lo = r.coef > 0 ? r.lo / r.coef : r.hi / r.coef;
    const double hi = r.coef > 0 ? r.hi / r.coef : r.lo / r.coef;
    x[r.var] = std::clamp(x[r.var], lo, std::max(lo, hi));
  }
  for (const Row& r : P.rows) {
    if (r.var >= 0 && violation(r, row_value(r, x)) > tol) return false;
  }
  return true;
}

std::vector<Active> equality_set(const Problem& P) {
  std::vector<Active> W;
  std::vector<char> fixed(P.n(), 0);
  for (int i = 0; i < static_cast<int>(P.rows.size()); ++i) {
    const Row& r = P.rows[i];
    if (!r.equality) continue;
    if (r.var >= 0) {
      if (fixed[r.var]) continue;
      fixed[r.var] = 1;
    }
    W.push_back({i, 0});
  }
  return W;
}

// Finds a feasible point by minimizing an elastic variable t added to the violated rows.
bool phase_one(const Problem& P, const VectorXd& x0, const QpOptions& opt, int& iters, VectorXd& x_out) {
  const int n = P.n();
  constexpr double delta = 1e-8;
  Problem Q;
  Q.H = delta * MatrixXd::Identity(n + 1, n + 1);
  Q.g.resize(n + 1);
  Q.g.head(n) = -delta * x0;
  Q.g[n] = 1.0;
  for (const Row& r : P.rows) {
    const double v = row_value(r, x0);
    double tcoef = 0.0;
    if (r.equality) {
      tcoef = r.lo - v;
    } else if (v < r.lo - opt.feas_tol) {
      tcoef = r.lo - v;
    } else if (v > r.hi + opt.feas_tol) {
      tcoef = r.hi - v;
    }
    VectorXd a(n + 1);
    a.head(n) = r.a;
    a[n] = std::abs(tcoef) > opt.feas_tol ? tcoef : 0.0;
    Row q;
    if (make_row(a, r.lo, r.hi, r.equality, r.source, q)) Q.rows.push_back(std::move(q));
  }
  Row tb;
  VectorXd et = VectorXd::Zero(n + 1);
  et[n] = 1.0;
  make_row(et, 0.0, kInf, false, -1, tb);
  Q.rows.push_back(tb);

  VectorXd z(n + 1);
  z.head(n) = x0;
  z[n] = 1.0;
  const CoreResult r = active_set(Q, z, equality_set(Q), opt, iters, nullptr);
  if (r.status != QpStatus::optimal || r.x[n] > opt.feas_tol) return false;
  x_out = r.x.head(n);
  for (const Row& row : P.rows) {
    if (violation(row, row_value(row, x_out)) > 10.0 * opt.feas_tol) return false;
  }
  return true;
}

// Starting point from a previous working set: minimizer on that set, projected onto the bounds.
bool warm_point(const Problem& P, const std::vector<int>& map_ineq,
                const std::vector<ActiveRow>& warm, const QpOptions& opt, VectorXd& x, std::vector<Active>& W) {
  std::vector<Active> Wt = equality_set(P);
  std::vector<char> fixed(P.n(), 0);
  std::vector<char> used(P.rows.size(), 0);
  for (const auto& a : Wt) {
    used[a.row] = 1;
    if (P.rows[a.row].var >= 0) fixed[P.rows[a.row].var] = 1;
  }
  for (const ActiveRow& a : warm) {
    if (a.kind == ActiveRow::Kind::equality) continue;
    if (a.row < 0 || a.row >= static_cast<int>(map_ineq.size())) continue;
    const int i = map_ineq[a.row];
    if (i < 0 || used[i]) continue;
    const Row& r = P.rows[i];
    const int side = a.kind == ActiveRow::Kind::upper ? 1 : -1;
    if (!std::isfinite(target(r, side))) continue;
    if (r.var >= 0) {
      if (fixed[r.var]) continue;
      fixed[r.var] = 1;
    }
    used[i] = 1;
    Wt.push_back({i, side});
  }
  double reg = 0.0;
  Eqp eqp;
  if (!solve_eqp(P, Wt, opt, reg, eqp)) return false;
  x = eqp.x;
  if (!project_bounds(P, x, opt.feas_tol)) return false;
  W.clear();
  std::fill(fixed.begin(), fixed.end(), 0);
  for (int i = 0; i < static_cast<int>(P.rows.size()); ++i) {
    const Row& r = P.rows[i];
    const double v = row_value(r, x);
    if (violation(r, v) > opt.feas_tol) return false;
    int side = 0;
    if (r.equality) {
      side = 0;
    } else if (used[i] && std::abs(v - r.hi) <= opt.feas_tol) {
      side = 1;
    } else if (used[i] && std::abs(v - r.lo) <= opt.feas_tol) {
      side = -1;
    } else if (r.var >= 0 && std::abs(v - r.hi) <= 0.0) {
      side = 1;
    } else if (r.var >= 0 && std::abs(v - r.lo) <= 0.0) {
      side = -1;
    } else {
      continue;
    }
    if (r.var >= 0) {
      if (fixed[r.var]) continue;
      fixed[r.var] = 1;
      x[r.var] = target(r, side) / r.coef;
    }
    W.push_back({i, side});
  }
  return true;
}

}  // namespace

DenseQp DenseQp::unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  DenseQp qp;
  const auto n = g.size();
  qp.H = H;
  qp.g = g;
  qp.Aeq.resize(0, n);
  qp.beq.resize(0);
  qp.Aineq.resize(0, n);
  qp.lb.resize(0);
  qp.ub.resize(0);
  return qp;
}

void DenseQp::check() const {
  const auto n = g.size();
  if (H.rows() != n || H.cols() != n) throw DimensionMismatch("H must be n x n with n = size(g)");
  if (Aeq.cols() != n || Aeq.rows() != beq.size()) throw DimensionMismatch("Aeq/beq dimensions");
  if (Aineq.cols() != n || Aineq.rows() != lb.size() || Aineq.rows() != ub.size()) {
    throw DimensionMismatch("Aineq/lb/ub dimensions");
  }
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "infeasible";
}

double KktResiduals::max() const { return std::max({stationarity, eq_feas, ineq_feas, comp}); }

QpSolution solve_qp(const DenseQp& qp, const std::optional<QpSolution>& warm, const QpOptions& opt) {
  qp.check();
  const int n = qp.n();
  const int meq = static_cast<int>(qp.Aeq.rows());
  const int mineq = static_cast<int>(qp.Aineq.rows());

  QpSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.lam_eq = VectorXd::Zero(meq);
  sol.mu_lower = VectorXd::Zero(mineq);
  sol.mu_upper = VectorXd::Zero(mineq);

  Problem P;
  P.H = 0.5 * (qp.H + qp.H.transpose());
  P.g = qp.g;
  std::vector<int> map_ineq(mineq, -1);
  for (int i = 0; i < meq; ++i) {
    Row r;
    if (make_row(qp.Aeq.row(i).transpose(), qp.beq[i], qp.beq[i], true, i, r)) {
      P.rows.push_back(std::move(r));
    } else if (std::abs(qp.beq[i]) > opt.feas_tol) {
      return sol;
    }
  }
  for (int i = 0; i < mineq; ++i) {
    if (qp.lb[i] > qp.ub[i]) return sol;
    Row r;
    if (make_row(qp.Aineq.row(i).transpose(), qp.lb[i], qp.ub[i], false, i, r)) {
      map_ineq[i] = static_cast<int>(P.rows.size());
      P.rows.push_back(std::move(r));
    } else if (qp.lb[i] > opt.feas_tol || qp.ub[i] < -opt.feas_tol) {
      return sol;
    }
  }

  int iters = 0;
  VectorXd x0;
  std::vector<Active> W0;
  bool started = false;
  if (warm && !warm->working_set.empty()) {
    started = warm_point(P, map_ineq, warm->working_set, opt, x0, W0);
  }
  if (!started) {
    x0 = VectorXd::Zero(n);
    if (!project_bounds(P, x0, opt.feas_tol)) {
      sol.iterations = iters;
      return sol;
    }
    bool feasible = true;
    for (const Row& r : P.rows) {
      if (violation(r, row_value(r, x0)) > opt.feas_tol) {
        feasible = false;
        break;
      }
    }
    if (!feasible) {
      VectorXd x1;
      if (!phase_one(P, x0, opt, iters, x1)) {
        sol.iterations = iters;
        sol.status = iters >= opt.max_iter ? QpStatus::max_iter : QpStatus::infeasible;
        return sol;
      }
      x0 = x1;
    }
    W0 = equality_set(P);
  }

  CoreResult res = active_set(P, x0, W0, opt, iters, opt.record_history ? &sol.objective_history : nullptr);
  sol.x = res.x;
  sol.status = res.status;
  sol.iterations = iters;
  sol.regularization = res.reg;
  for (int k = 0; k < static_cast<int>(res.W.size()); ++k) {
    const Row& r = P.rows[res.W[k].row];
    const double nu = res.nu[k] / r.scale;
    if (res.W[k].side == 0) {
      sol.lam_eq[r.source] = nu;
      sol.working_set.push_back({ActiveRow::Kind::equality, r.source});
    } else if (res.W[k].side > 0) {
      sol.mu_upper[r.source] = nu;
      sol.working_set.push_back({ActiveRow::Kind::upper, r.source});
    } else {
      sol.mu_lower[r.source] = -nu;
      sol.working_set.push_back({ActiveRow::Kind::lower, r.source});
    }
  }
  return sol;
}

KktResiduals kkt_residuals(const DenseQp& qp, const QpSolution& sol) {
  KktResiduals k;
  const VectorXd& x = sol.x;
  VectorXd grad = qp.H * x + qp.g;
  if (qp.Aeq.rows() > 0) grad += qp.Aeq.transpose() * sol.lam_eq;
  if (qp.Aineq.rows() > 0) grad += qp.Aineq.transpose() * (sol.mu_upper - sol.mu_lower);
  k.stationarity = grad.size() > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  if (qp.Aeq.rows() > 0) k.eq_feas = (qp.Aeq * x - qp.beq).lpNorm<Eigen::Infinity>();
  for (int i = 0; i < qp.Aineq.rows(); ++i) {
    const double v = qp.Aineq.row(i).dot(x);
    k.ineq_feas = std::max({k.ineq_feas, v - qp.ub[i], qp.lb[i] - v});
    if (std::isfinite(qp.ub[i])) k.comp = std::max(k.comp, std::abs(sol.mu_upper[i] * (qp.ub[i] - v)));
    if (std::isfinite(qp.lb[i])) k.comp = std::max(k.comp, std::abs(sol.mu_lower[i] * (v - qp.lb[i])));
  }
  return k;
}

}  // namespace dqnmpc
