#include "dqnmpc/qp.hpp"
#include "qp_oracle.hpp"

#include <doctest.h>

#include <limits>

using namespace dqnmpc;
using namespace dqnmpc::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DenseQp box_qp(int n, double ub) {
  DenseQp qp = DenseQp::unconstrained(MatrixXd::Identity(n, n), -VectorXd::Ones(n));
  qp.Aineq = MatrixXd::Identity(n, n);
  qp.lb = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  qp.ub = VectorXd::Constant(n, ub);
  return qp;
}

}  // namespace

TEST_CASE("unconstrained identity QP") {
  const auto qp = DenseQp::unconstrained(MatrixXd::Identity(4, 4), -VectorXd::Ones(4));
  const auto sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK((sol.x - VectorXd::Ones(4)).norm() < 1e-14);
  CHECK(kkt_residuals(qp, sol).max() < 1e-12);
  QpSolution bad = sol;
  bad.x.array() += 0.1;
  CHECK(kkt_residuals(qp, bad).stationarity >= 0.09);
}

TEST_CASE("clipped identity QP") {
  const auto qp = box_qp(3, 0.5);
  const auto sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK((sol.x - VectorXd::Constant(3, 0.5)).norm() < 1e-14);
  CHECK((sol.mu_upper - VectorXd::Constant(3, 0.5)).norm() < 1e-12);
  CHECK(sol.mu_lower.norm() == 0.0);
  CHECK(kkt_residuals(qp, sol).max() < 1e-12);
}

TEST_CASE("general rows and equalities") {
  // min 1/2|x|^2 s.t. x0 + x1 = 1, x0 - x1 >= 0.5
  DenseQp qp = DenseQp::unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  qp.Aeq = (MatrixXd(1, 2) << 1, 1).finished();
  qp.beq = VectorXd::Constant(1, 1.0);
  qp.Aineq = (MatrixXd(1, 2) << 1, -1).finished();
  qp.lb = VectorXd::Constant(1, 0.5);
  qp.ub = VectorXd::Constant(1, std::numeric_limits<double>::infinity());
  const auto sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK((sol.x - VectorXd((VectorXd(2) << 0.75, 0.25).finished())).norm() < 1e-12);
  CHECK(sol.mu_lower[0] > 0.0);
  CHECK(kkt_residuals(qp, sol).max() < 1e-12);
}

TEST_CASE("infeasible QP is reported") {
  DenseQp qp = DenseQp::unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  qp.Aineq = (MatrixXd(2, 2) << 1, 1, 1, 1).finished();
  qp.lb = (VectorXd(2) << 1.0, -5.0).finished();
  qp.ub = (VectorXd(2) << 2.0, 0.0).finished();
  CHECK(solve_qp(qp).status == QpStatus::infeasible);
}

TEST_CASE("dimension mismatch") {
  DenseQp qp = DenseQp::unconstrained(MatrixXd::Identity(2, 2), VectorXd::Zero(3));
  CHECK_THROWS_AS(solve_qp(qp), DimensionMismatch);
}

TEST_CASE("random QPs against exhaustive enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dn(1, 6);
  std::uniform_int_distribution<int> dm(0, 4);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dn(rng);
    const int meq = std::min(n - 1, trial % 3 == 0 ? 1 : 0);
    const DenseQp qp = random_qp(rng, n, dm(rng), meq);
    QpOptions opt;
    opt.record_history = true;
    const auto sol = solve_qp(qp, std::nullopt, opt);
    const auto ref = enumerate_active_sets(qp);
    REQUIRE(ref.has_value());
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK((sol.x - ref->x).cwiseAbs().maxCoeff() < 1e-8);
    const auto k = kkt_residuals(qp, sol);
    CHECK(k.max() < 1e-8);
    for (int i = 0; i < sol.mu_lower.size(); ++i) {
      CHECK(sol.mu_lower[i] >= -1e-12);
      CHECK(sol.mu_upper[i] >= -1e-12);
    }
    for (size_t i = 1; i < sol.objective_history.size(); ++i) {
      CHECK(sol.objective_history[i] <= sol.objective_history[i - 1] + 1e-12);
    }
    // Warm start from the optimal working set returns the same point.
    const auto warm = solve_qp(qp, sol);
    REQUIRE(warm.status == QpStatus::optimal);
    CHECK((warm.x - sol.x).cwiseAbs().maxCoeff() < 1e-10);
    ++compared;
  }
  CHECK(compared == 300);
}

TEST_CASE("kkt residuals match direct expansion") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseQp qp = random_qp(rng, 5, 4, 1);
    auto sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    for (int i = 0; i < sol.x.size(); ++i) sol.x[i] += 1e-3 * (i + 1);
    // Element-wise expansion of the residual definitions.
    double stat = 0.0;
    for (int j = 0; j < qp.n(); ++j) {
      double s = qp.g[j];
      for (int i = 0; i < qp.n(); ++i) s += qp.H(j, i) * sol.x[i];
      for (int i = 0; i < qp.Aeq.rows(); ++i) s += qp.Aeq(i, j) * sol.lam_eq[i];
      for (int i = 0; i < qp.Aineq.rows(); ++i) s += qp.Aineq(i, j) * (sol.mu_upper[i] - sol.mu_lower[i]);
      stat = std::max(stat, std::abs(s));
    }
    double eq = 0.0;
    for (int i = 0; i < qp.Aeq.rows(); ++i) {
      double v = -qp.beq[i];
      for (int j = 0; j < qp.n(); ++j) v += qp.Aeq(i, j) * sol.x[j];
      eq = std::max(eq, std::abs(v));
    }
    double ineq = 0.0;
    double comp = 0.0;
    for (int i = 0; i < qp.Aineq.rows(); ++i) {
      double v = 0.0;
      for (int j = 0; j < qp.n(); ++j) v += qp.Aineq(i, j) * sol.x[j];
      ineq = std::max({ineq, v - qp.ub[i], qp.lb[i] - v});
      if (std::isfinite(qp.ub[i])) comp = std::max(comp, std::abs(sol.mu_upper[i] * (qp.ub[i] - v)));
      if (std::isfinite(qp.lb[i])) comp = std::max(comp, std::abs(sol.mu_lower[i] * (v - qp.lb[i])));
    }
    const auto k = kkt_residuals(qp, sol);
    CHECK(std::abs(k.stationarity - stat) < 1e-12);
    CHECK(std::abs(k.eq_feas - eq) < 1e-12);
    CHECK(std::abs(k.ineq_feas - ineq) < 1e-12);
    CHECK(std::abs(k.comp - comp) < 1e-12);
  }
}
