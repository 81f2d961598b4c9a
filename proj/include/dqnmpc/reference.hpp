#pragma once

/**
 * @file
 * @brief Analytic sinusoidal reference trajectories and the differential-flatness
 * map to full-state references for both controllers.
 *
 * Every trajectory is p_i(t) = c_i + A_i sin(W_i t + phi_i); hover and circle
 * are special cases of the Lissajous family.
 */

#include "dqnmpc/dq_algebra.hpp"
#include "dqnmpc/dynamics.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace dqnmpc {

class OutOfWindow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class SingularReference : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class TrajectoryKind { hover, circle, lissajous };
enum class YawMode { fixed, tangent };

std::string to_string(TrajectoryKind k);
TrajectoryKind trajectory_kind_from_string(const std::string& s);
std::string to_string(YawMode m);
YawMode yaw_mode_from_string(const std::string& s);

struct TrajectorySpec {
  TrajectoryKind kind{TrajectoryKind::hover};
  Vec3 center{Vec3::Zero()};
  Vec3 amplitudes{Vec3::Zero()};
  Vec3 angular_freqs{Vec3::Zero()};
  Vec3 phases{Vec3::Zero()};
  YawMode yaw_mode{YawMode::fixed};
  double yaw0{0.0};
  double duration{20.0};

  void validate() const;
  /// Maximum of |dp/dt| over [0, duration], from dense sampling plus golden-section refinement.
  double max_speed() const;
};

TrajectorySpec make_hover(const Vec3& center, double duration, double yaw0 = 0.0);
/// Horizontal circle starting at center + (radius, 0, 0).
TrajectorySpec make_circle(const Vec3& center, double radius, double omega, double duration);
/// Default figure-eight Lissajous in the horizontal plane with a small vertical component.
TrajectorySpec make_lissajous(const Vec3& center, const Vec3& amplitudes, double base_omega, double duration);
/// Rescales the angular frequencies so that max_speed() hits v_target.
TrajectorySpec calibrate_max_speed(TrajectorySpec spec, double v_target);

struct FlatOutput {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};
  Vec3 j{Vec3::Zero()};
  double yaw{0.0};
  double yaw_rate{0.0};
};

/// Throws OutOfWindow for t outside [0, duration].
FlatOutput eval_flat(const TrajectorySpec& spec, double t);

/// Desired pose, dual twist and dual input for the dual-quaternion controller.
struct ReferencePoint {
  UnitDualQuaternion qd{};
  DualVector wd{};
  DualVector ud{};
};

/// Same reference in decoupled coordinates (used by the baseline and metrics).
struct ClassicalReference {
  ClassicalState x{};
  WrenchInput u{};
};

/// Differential flatness: thrust direction from the acceleration, attitude from
/// tilt and yaw, body rates from the jerk. Reference torque is zero.
/// Throws SingularReference when |a + g e_z| <= 1e-6.
ClassicalReference flat_to_classical(const FlatOutput& flat, const QuadrotorParams& params);
ReferencePoint flat_to_reference(const FlatOutput& flat, const QuadrotorParams& params);
ReferencePoint to_reference_point(const ClassicalReference& ref, const QuadrotorParams& params);

/// Setpoint reference for regulation: hover at p with attitude r.
ClassicalReference hover_reference(const Vec3& p, const UnitQuaternion& r, const QuadrotorParams& params);

}  // namespace dqnmpc
