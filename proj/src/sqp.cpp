#include "dqnmpc/sqp.hpp"

namespace dqnmpc {

std::string to_string(SqpMode m) { return m == SqpMode::full_sqp ? "full_sqp" : "rti"; }

std::string to_string(StepRule r) { return r == StepRule::full_step ? "full_step" : "backtracking"; }

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::qp_failed: return "qp_failed";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (max_sqp_iter < 1) throw std::invalid_argument("max_sqp_iter must be >= 1");
  if (!(tol_kkt > 0.0)) throw std::invalid_argument("tol_kkt must be positive");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("alpha0 must lie in (0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw std::invalid_argument("armijo_c must lie in (0, 1)");
  if (levenberg < 0.0) throw std::invalid_argument("levenberg must be non-negative");
  if (!(merit_penalty > 0.0)) throw std::invalid_argument("merit_penalty must be positive");
  if (qp_max_iter < 1) throw std::invalid_argument("qp_max_iter must be >= 1");
}

}  // namespace dqnmpc
