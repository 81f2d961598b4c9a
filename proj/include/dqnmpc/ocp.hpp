#pragma once

/**
 * @file
 * @brief Dual-quaternion optimal control problem: pose/twist errors, costs,
 * Gauss-Newton residuals, dynamics defects and the unit-norm/input constraints.
 *
 * Decision coordinates per node: the 14-vector [P D w v_body] (the zero real
 * parts of the pure quaternions are not decision variables) and a 4-vector
 * input [J^-1 tau, f/m]. The dual input is (f/m) e_z, so its two components
 * orthogonal to e_z are structurally zero, like the real parts of the twist.
 */

#include "dqnmpc/dq_algebra.hpp"
#include "dqnmpc/dynamics.hpp"
#include "dqnmpc/reference.hpp"

#include <Eigen/Core>

namespace dqnmpc {

struct Weights {
  Mat6 Qp{Vec6(50, 50, 50, 100, 100, 100).asDiagonal()};
  Mat6 Qv{Mat6::Identity()};
  Mat6 R{0.5 * Mat6::Identity()};
  Mat6 QpN{Vec6(500, 500, 500, 1000, 1000, 1000).asDiagonal()};
  Mat6 QvN{10.0 * Mat6::Identity()};

  /// Stage weights with terminal weights = multiplier x stage weights.
  static Weights with_terminal_multiplier(const Mat6& Qp, const Mat6& Qv, const Mat6& R, double multiplier);
  /// Throws std::invalid_argument if any matrix is not symmetric positive definite.
  void validate() const;
};

struct OcpConfig {
  double horizon_s{1.5};
  int N{30};
  /// Input bounds; only the e_z component of the dual part is used.
  DualVector u_min{};
  DualVector u_max{};
  double norm_tol{1e-6};
  /// Use central finite differences instead of the analytic Jacobians.
  bool fd_jacobians{false};

  double dt() const { return horizon_s / N; }
  void validate() const;
  /// Horizon defaults with input bounds taken from the vehicle limits.
  static OcpConfig from_params(const QuadrotorParams& params);
};

namespace ocp {

inline constexpr int kNx = flat::kDqStateDim;
inline constexpr int kNu = 4;
inline constexpr int kNr = 18;
inline constexpr int kNrTerminal = 12;

using StateVec = flat::DqVec;
using InputVec = Eigen::Matrix<double, kNu, 1>;

/// Free input components (J^-1 tau, (f/m)) of a dual input.
InputVec reduce_input(const DualVector& u, const QuadrotorParams& params);
DualVector expand_input(const InputVec& u, const QuadrotorParams& params);

}  // namespace ocp

/// Left-invariant pose error qd* q, sign-canonicalized.
UnitDualQuaternion pose_error(const UnitDualQuaternion& qd, const UnitDualQuaternion& q);
DualVector twist_error(const DualVector& wd, const DualVector& w);

/// Ln(q) as the 6-vector (phi/2, t/2).
Vec6 log_vector(const UnitDualQuaternion& q);

double stage_cost(const DqState& x, const DualVector& u, const ReferencePoint& ref, const Weights& w);
double terminal_cost(const DqState& x, const ReferencePoint& ref, const Weights& w);

struct CostResiduals {
  Eigen::Matrix<double, ocp::kNr, 1> r;
  Eigen::Matrix<double, ocp::kNr, ocp::kNx> Jx;
  Eigen::Matrix<double, ocp::kNr, 6> Ju;  ///< with respect to the full dual input
};

struct TerminalResiduals {
  Eigen::Matrix<double, ocp::kNrTerminal, 1> r;
  Eigen::Matrix<double, ocp::kNrTerminal, ocp::kNx> Jx;
};

/// r = [Lp' Ln(qe); Lv' we; Lr' ue] with Q = L L', so |r|^2 = stage_cost.
/// Jacobians are taken with respect to the flat state (not re-normalized).
CostResiduals cost_residuals(const ocp::StateVec& x, const DualVector& u, const ReferencePoint& ref, const Weights& w);
TerminalResiduals terminal_residuals(const ocp::StateVec& x, const ReferencePoint& ref, const Weights& w);

struct DefectLinearization {
  ocp::StateVec defect;  ///< x_next - F(x, u)
  Eigen::Matrix<double, ocp::kNx, ocp::kNx> A;  ///< dF/dx
  Eigen::Matrix<double, ocp::kNx, ocp::kNu> B;  ///< dF/du (reduced input)
};

DefectLinearization dynamics_defect(const ocp::StateVec& x, const ocp::InputVec& u, const ocp::StateVec& x_next,
                                    const OcpConfig& cfg, const QuadrotorParams& params);

struct ConstraintValues {
  /// [|P| - 1, 1 - |P|, u - u_max (4), u_min - u (4)] on the reduced input.
  Eigen::Matrix<double, 10, 1> g;
  Eigen::Matrix<double, 10, ocp::kNx> Jx;
  Eigen::Matrix<double, 10, ocp::kNu> Ju;
};

ConstraintValues constraint_eval(const ocp::StateVec& x, const DualVector& u, const OcpConfig& cfg,
                                 const QuadrotorParams& params);

/// Shooting model consumed by the SQP solver for the dual-quaternion OCP.
class DqModel {
 public:
  static constexpr int nx = ocp::kNx;
  static constexpr int nu = ocp::kNu;
  static constexpr int nr = ocp::kNr;
  static constexpr int nr_terminal = ocp::kNrTerminal;
  using State = ocp::StateVec;
  using Input = ocp::InputVec;
  using Ref = ReferencePoint;

  DqModel(QuadrotorParams params, OcpConfig cfg, Weights weights);

  const OcpConfig& config() const { return cfg_; }
  const QuadrotorParams& params() const { return params_; }
  const Weights& weights() const { return weights_; }
  double dt() const { return cfg_.dt(); }
  int horizon() const { return cfg_.N; }
  double norm_tol() const { return cfg_.norm_tol; }
  const Input& u_min() const { return u_min_; }
  const Input& u_max() const { return u_max_; }

  flat::Linearization<nx, nu> step(const State& x, const Input& u) const;
  void stage_residual(const State& x, const Input& u, const Ref& ref, Eigen::Matrix<double, nr, 1>& r,
                      Eigen::Matrix<double, nr, nx>* Jx, Eigen::Matrix<double, nr, nu>* Ju) const;
  void terminal_residual(const State& x, const Ref& ref, Eigen::Matrix<double, nr_terminal, 1>& r,
                         Eigen::Matrix<double, nr_terminal, nx>* Jx) const;
  State normalize(const State& x) const { return flat::dq_normalize(x); }
  /// |P| - 1 and its gradient.
  double norm_residual(const State& x, Eigen::Matrix<double, 1, nx>* grad) const;
  State reference_state(const Ref& ref) const;
  Input reference_input(const Ref& ref) const;

 private:
  QuadrotorParams params_;
  OcpConfig cfg_;
  Weights weights_;
  Mat6 Lp_, Lv_, Lr_, LpN_, LvN_;
  Input u_min_, u_max_;
};

}  // namespace dqnmpc
