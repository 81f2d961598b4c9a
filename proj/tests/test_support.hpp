#pragma once

#include "dqnmpc/dq_algebra.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace dqnmpc::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

inline UnitQuaternion random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return UnitQuaternion::normalized({n(rng), n(rng), n(rng), n(rng)});
}

inline UnitDualQuaternion random_udq(std::mt19937_64& rng, double scale = 3.0) {
  return dq_from_pose(random_vec3(rng, scale), random_rotation(rng));
}

/// Rotation angle of r in [0, pi].
inline double rotation_angle(const UnitQuaternion& r) { return 2.0 * quat_log(r).norm(); }

}  // namespace dqnmpc::testing

namespace dqnmpc::testing {

/// Central finite-difference Jacobian of f at x.
template <class F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// Max entry-wise error relative to the larger of the two Jacobians' scales.
inline double jacobian_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  const double scale = std::max({1.0, analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff()});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace dqnmpc::testing
