#pragma once

/**
 * @file
 * @brief Decoupled baseline NMPC: classical state [p v r w], wrench input
 * [f tau], and a quadratic penalty on the vector part of the quaternion error.
 */

#include "dqnmpc/dq_algebra.hpp"
#include "dqnmpc/dynamics.hpp"
#include "dqnmpc/ocp.hpp"
#include "dqnmpc/reference.hpp"
#include "dqnmpc/sqp.hpp"

#include <Eigen/Core>

namespace dqnmpc {

using Mat4x4 = Eigen::Matrix4d;

struct BaselineWeights {
  Mat3 Qpos{25.0 * Mat3::Identity()};
  Mat3 Qvel{Mat3::Identity()};
  Mat3 Qquat{50.0 * Mat3::Identity()};
  Mat3 Qomega{Mat3::Identity()};
  /// Input weights on (f, tau); the defaults match the DQ input weight 0.5 on (f/m, J^-1 tau).
  Mat4x4 Rb{Eigen::Vector4d(0.5, 5000.0, 5000.0, 1250.0).asDiagonal()};
  Mat3 QposN{250.0 * Mat3::Identity()};
  Mat3 QvelN{10.0 * Mat3::Identity()};
  Mat3 QquatN{500.0 * Mat3::Identity()};
  Mat3 QomegaN{10.0 * Mat3::Identity()};

  /// Throws std::invalid_argument if any matrix is not symmetric positive definite.
  void validate() const;
  /// Input weights equivalent to a weight R on the normalized input (f/m, J^-1 tau).
  static Mat4x4 input_weights_for(const QuadrotorParams& params, double r);
};

/// Im(rd* (x) r) after sign canonicalization; its norm is sin(theta/2).
Vec3 baseline_orientation_error(const UnitQuaternion& rd, const UnitQuaternion& r);

double baseline_stage_cost(const ClassicalState& x, const WrenchInput& u, const ClassicalReference& ref,
                           const BaselineWeights& w);
double baseline_terminal_cost(const ClassicalState& x, const ClassicalReference& ref, const BaselineWeights& w);

/// Shooting model for the SQP solver over the classical state.
class ClassicalModel {
 public:
  static constexpr int nx = flat::kClassicalStateDim;
  static constexpr int nu = flat::kClassicalInputDim;
  static constexpr int nr = 16;
  static constexpr int nr_terminal = 12;
  using State = flat::ClassicalVec;
  using Input = flat::ClassicalInput;
  using Ref = ClassicalReference;

  ClassicalModel(QuadrotorParams params, OcpConfig cfg, BaselineWeights weights);

  const OcpConfig& config() const { return cfg_; }
  const QuadrotorParams& params() const { return params_; }
  const BaselineWeights& weights() const { return weights_; }
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
  State normalize(const State& x) const { return flat::classical_normalize(x); }
  /// |r| - 1 and its gradient.
  double norm_residual(const State& x, Eigen::Matrix<double, 1, nx>* grad) const;
  State reference_state(const Ref& ref) const { return flat::pack(ref.x); }
  Input reference_input(const Ref& ref) const { return flat::pack(ref.u); }

 private:
  QuadrotorParams params_;
  OcpConfig cfg_;
  BaselineWeights weights_;
  Mat3 Lpos_, Lvel_, Lquat_, Lomega_, LposN_, LvelN_, LquatN_, LomegaN_;
  Mat4x4 Lr_;
  Input u_min_, u_max_;
};

using BaselineSolver = SqpSolver<ClassicalModel>;
using DqSolver = SqpSolver<DqModel>;
using DecisionTrajectory = Trajectory<DqModel>;

}  // namespace dqnmpc
