#pragma once

/**
 * @file
 * @brief Quadrotor rigid-body dynamics in decoupled (position/attitude) and
 * dual-quaternion form, RK4 discretization and the disturbed simulation plant.
 *
 * Two flat coordinate layouts are used by the optimizers:
 *  - dual-quaternion state (14): [P(4) D(4) w(3) v_body(3)], input (6): [J^-1 tau (3), f/m e_z (3)]
 *  - classical state (13): [p(3) v(3) r(4) w(3)], input (4): [f, tau(3)]
 */

#include "dqnmpc/dq_algebra.hpp"

#include <Eigen/Core>

namespace dqnmpc {

struct QuadrotorParams {
  double mass{1.0};
  Vec3 inertia{0.01, 0.01, 0.02};  ///< diagonal of J (kg m^2)
  double gravity{9.81};
  Vec3 e_z{0.0, 0.0, 1.0};
  double f_min{0.0};
  double f_max{4.0 * 1.0 * 9.81};
  Vec3 tau_min{-1.0, -1.0, -1.0};
  Vec3 tau_max{1.0, 1.0, 1.0};
  double drag_c{0.0};  ///< linear drag, force = -drag_c v (N s/m)

  /// Throws std::invalid_argument on a non-physical parameter set.
  void validate() const;
  Mat3 inertia_matrix() const { return inertia.asDiagonal(); }
  double hover_thrust() const { return mass * gravity; }
};

struct WrenchInput {
  double f{0.0};
  Vec3 tau{Vec3::Zero()};
};

struct ClassicalState {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  UnitQuaternion r{};
  Vec3 w{Vec3::Zero()};
};

struct ClassicalDerivative {
  Vec3 p_dot{Vec3::Zero()};
  Vec3 v_dot{Vec3::Zero()};
  Quaternion r_dot{Quaternion::zero()};
  Vec3 w_dot{Vec3::Zero()};
};

/// Pose and dual twist (primary: body angular rate, dual: body-frame linear velocity).
struct DqState {
  UnitDualQuaternion q{};
  DualVector twist{};
};

struct DqDerivative {
  DualQuaternion q_dot{DualQuaternion{Quaternion::zero(), Quaternion::zero()}};
  DualVector twist_dot{};
};

/// Plant-side model mismatch and external disturbances.
struct DisturbanceConfig {
  double drag_scale{1.0};
  double mass_scale{1.0};
  double inertia_scale{1.0};
  Vec3 ext_force{Vec3::Zero()};   ///< world frame (N)
  Vec3 ext_moment{Vec3::Zero()};  ///< body frame (N m)

  void validate() const;
};

ClassicalDerivative classical_derivative(const ClassicalState& x, const WrenchInput& u, const QuadrotorParams& params);

DualVector dual_input_from_wrench(const WrenchInput& u, const QuadrotorParams& params);
WrenchInput wrench_from_dual_input(const DualVector& u, const QuadrotorParams& params);

DqDerivative dq_derivative(const DqState& x, const DualVector& u, const QuadrotorParams& params);

DqState to_dq_state(const ClassicalState& x);
ClassicalState to_classical_state(const DqState& x);

/// Classical fourth-order Runge-Kutta step for any vector-space value type.
template <class X, class F>
X rk4(F&& f, const X& x, double dt) {
  const X k1 = f(x);
  const X k2 = f(x + (0.5 * dt) * k1);
  const X k3 = f(x + (0.5 * dt) * k2);
  const X k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

DqState rk4_step(const DqState& x, const DualVector& u, const QuadrotorParams& params, double dt);
ClassicalState rk4_step(const ClassicalState& x, const WrenchInput& u, const QuadrotorParams& params, double dt);

/// Plant substep upper bound (s).
inline constexpr double kPlantSubstep = 1e-3;

/// Integrates the true (disturbed) plant over dt with RK4 substeps of at most 1 ms.
ClassicalState plant_step(const ClassicalState& x, const WrenchInput& u, const QuadrotorParams& truth,
                          const DisturbanceConfig& dist, double dt);

namespace flat {

inline constexpr int kDqStateDim = 14;
inline constexpr int kDqInputDim = 6;
inline constexpr int kClassicalStateDim = 13;
inline constexpr int kClassicalInputDim = 4;

using DqVec = Eigen::Matrix<double, kDqStateDim, 1>;
using DqInput = Eigen::Matrix<double, kDqInputDim, 1>;
using ClassicalVec = Eigen::Matrix<double, kClassicalStateDim, 1>;
using ClassicalInput = Eigen::Matrix<double, kClassicalInputDim, 1>;

template <int NX, int NU>
struct Linearization {
  Eigen::Matrix<double, NX, 1> y;
  Eigen::Matrix<double, NX, NX> A;
  Eigen::Matrix<double, NX, NU> B;
};

DqVec pack(const DqState& x);
/// Unpacks and projects onto the unit dual quaternions.
DqState unpack_dq(const DqVec& x);
ClassicalVec pack(const ClassicalState& x);
ClassicalState unpack_classical(const ClassicalVec& x);
ClassicalInput pack(const WrenchInput& u);
WrenchInput unpack_wrench(const ClassicalInput& u);

/// Right-hand side of the dual-quaternion dynamics with optional Jacobians.
DqVec dq_rhs(const DqVec& x, const DqInput& u, const QuadrotorParams& params,
             Eigen::Matrix<double, 14, 14>* jx = nullptr, Eigen::Matrix<double, 14, 6>* ju = nullptr);

/// Right-hand side of the decoupled dynamics with optional Jacobians.
/// ext_force (world) and ext_moment (body) are additive disturbances.
ClassicalVec classical_rhs(const ClassicalVec& x, const ClassicalInput& u, const QuadrotorParams& params,
                           Eigen::Matrix<double, 13, 13>* jx = nullptr, Eigen::Matrix<double, 13, 4>* ju = nullptr,
                           const Vec3& ext_force = Vec3::Zero(), const Vec3& ext_moment = Vec3::Zero());

/// dq_normalize in flat coordinates; twist entries pass through.
DqVec dq_normalize(const DqVec& x, Eigen::Matrix<double, 14, 14>* jac = nullptr);
/// Quaternion normalization of the attitude block.
ClassicalVec classical_normalize(const ClassicalVec& x, Eigen::Matrix<double, 13, 13>* jac = nullptr);

/// RK4 step with exact stage-chained Jacobians; rhs(x, u, jx*, ju*) -> xdot.
template <int NX, int NU, class Rhs>
Linearization<NX, NU> rk4_linearized(const Rhs& rhs, const Eigen::Matrix<double, NX, 1>& x,
                                      const Eigen::Matrix<double, NU, 1>& u, double h) {
  using MX = Eigen::Matrix<double, NX, NX>;
  using MU = Eigen::Matrix<double, NX, NU>;
  const MX I = MX::Identity();
  MX F;
  MU G;
  const auto k1 = rhs(x, u, &F, &G);
  const MX d1x = F;
  const MU d1u = G;
  const auto k2 = rhs(x + 0.5 * h * k1, u, &F, &G);
  const MX d2x = F * (I + 0.5 * h * d1x);
  const MU d2u = F * (0.5 * h * d1u) + G;
  const auto k3 = rhs(x + 0.5 * h * k2, u, &F, &G);
  const MX d3x = F * (I + 0.5 * h * d2x);
  const MU d3u = F * (0.5 * h * d2u) + G;
  const auto k4 = rhs(x + h * k3, u, &F, &G);
  const MX d4x = F * (I + h * d3x);
  const MU d4u = F * (h * d3u) + G;
  Linearization<NX, NU> out;
  out.y = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.A = I + (h / 6.0) * (d1x + 2.0 * d2x + 2.0 * d3x + d4x);
  out.B = (h / 6.0) * (d1u + 2.0 * d2u + 2.0 * d3u + d4u);
  return out;
}

/// One normalized RK4 step of the dual-quaternion model with Jacobians.
Linearization<14, 6> dq_step(const DqVec& x, const DqInput& u, const QuadrotorParams& params, double dt);
/// One normalized RK4 step of the classical model with Jacobians.
Linearization<13, 4> classical_step(const ClassicalVec& x, const ClassicalInput& u, const QuadrotorParams& params,
                                    double dt);

}  // namespace flat

}  // namespace dqnmpc
