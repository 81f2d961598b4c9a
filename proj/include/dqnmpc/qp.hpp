#pragma once

/**
 * @file
 * @brief Dense convex QP solver (primal active-set) and KKT residuals.
 *
 *   minimize   1/2 x'Hx + g'x
 *   subject to Aeq x = beq,  lb <= Aineq x <= ub
 *
 * Lagrangian sign convention:
 *   L = 1/2 x'Hx + g'x + lam'(Aeq x - beq) + mu_u'(Aineq x - ub) + mu_l'(lb - Aineq x)
 * with mu_l, mu_u >= 0. Infinite bounds are allowed.
 */

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace dqnmpc {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Aineq;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  /// Unconstrained problem of dimension n (all constraint blocks empty).
  static DenseQp unconstrained(const Eigen::MatrixXd& H, const Eigen::VectorXd& g);
  int n() const { return static_cast<int>(g.size()); }
  /// Throws DimensionMismatch on inconsistent block sizes.
  void check() const;
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class QpStatus { optimal, max_iter, infeasible };

const char* to_string(QpStatus s);

/// Row in the working set: index into Aeq (kind equality) or Aineq (lower/upper side).
struct ActiveRow {
  enum class Kind { equality, lower, upper } kind;
  int row;
  friend bool operator==(const ActiveRow&, const ActiveRow&) = default;
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd lam_eq;
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd mu_upper;
  QpStatus status{QpStatus::infeasible};
  int iterations{0};
  /// Extra Hessian regularization that was needed to factorize (0 if none).
  double regularization{0.0};
  std::vector<ActiveRow> working_set;
  /// Objective after every primal step (only filled when QpOptions::record_history is set).
  std::vector<double> objective_history;

  /// Signed inequality multipliers mu_upper - mu_lower.
  Eigen::VectorXd mu_ineq() const { return mu_upper - mu_lower; }
};

struct QpOptions {
  int max_iter{200};
  double feas_tol{1e-9};
  double base_regularization{1e-8};
  double max_regularization{1e-2};
  bool record_history{false};
};

struct KktResiduals {
  double stationarity{0.0};
  double eq_feas{0.0};
  double ineq_feas{0.0};
  double comp{0.0};

  double max() const;
};

QpSolution solve_qp(const DenseQp& qp, const std::optional<QpSolution>& warm = std::nullopt,
                    const QpOptions& opt = {});

/// Residuals recomputed from the problem data alone.
KktResiduals kkt_residuals(const DenseQp& qp, const QpSolution& sol);

}  // namespace dqnmpc
