#include "dqnmpc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dqnmpc {

std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::hover: return "hover";
    case TrajectoryKind::circle: return "circle";
    case TrajectoryKind::lissajous: return "lissajous";
  }
  return "hover";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "hover") return TrajectoryKind::hover;
  if (s == "circle") return TrajectoryKind::circle;
  if (s == "lissajous") return TrajectoryKind::lissajous;
  throw std::invalid_argument("unknown trajectory kind '" + s + "'");
}

std::string to_string(YawMode m) { return m == YawMode::fixed ? "fixed" : "tangent"; }

YawMode yaw_mode_from_string(const std::string& s) {
  if (s == "fixed") return YawMode::fixed;
  if (s == "tangent") return YawMode::tangent;
  throw std::invalid_argument("unknown yaw mode '" + s + "'");
}

void TrajectorySpec::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("trajectory duration must be positive");
  if (!center.allFinite() || !amplitudes.allFinite() || !angular_freqs.allFinite() || !phases.allFinite()) {
    throw std::invalid_argument("trajectory parameters must be finite");
  }
}

namespace {

Vec3 velocity_at(const TrajectorySpec& s, double t) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = s.amplitudes[i] * s.angular_freqs[i] * std::cos(s.angular_freqs[i] * t + s.phases[i]);
  return v;
}

}  // namespace

double TrajectorySpec::max_speed() const {
  const double wmax = angular_freqs.cwiseAbs().maxCoeff();
  if (amplitudes.cwiseAbs().maxCoeff() == 0.0 || wmax == 0.0) return 0.0;
  // 64 samples per fastest period is enough to bracket every local maximum.
  const double step = std::min(duration, 2.0 * std::numbers::pi / wmax) / 64.0;
  const int n = static_cast<int>(std::ceil(duration / step));
  double best = 0.0;
  double best_t = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(duration, k * step);
    const double s = velocity_at(*this, t).norm();
    if (s > best) {
      best = s;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - step);
  double hi = std::min(duration, best_t + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    const double a = hi - gr * (hi - lo);
    const double b = lo + gr * (hi - lo);
    if (velocity_at(*this, a).norm() > velocity_at(*this, b).norm()) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return std::max(best, velocity_at(*this, 0.5 * (lo + hi)).norm());
}

TrajectorySpec make_hover(const Vec3& center, double duration, double yaw0) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::hover;
  s.center = center;
  s.duration = duration;
  s.yaw0 = yaw0;
  return s;
}

TrajectorySpec make_circle(const Vec3& center, double radius, double omega, double duration) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::circle;
  s.center = center;
  s.amplitudes = {radius, radius, 0.0};
  s.angular_freqs = {omega, omega, 0.0};
  s.phases = {0.5 * std::numbers::pi, 0.0, 0.0};
  s.duration = duration;
  return s;
}

TrajectorySpec make_lissajous(const Vec3& center, const Vec3& amplitudes, double base_omega, double duration) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::lissajous;
  s.center = center;
  s.amplitudes = amplitudes;
  s.angular_freqs = {base_omega, 2.0 * base_omega, base_omega};
  s.phases = {0.0, 0.0, 0.5 * std::numbers::pi};
  s.duration = duration;
  return s;
}

TrajectorySpec calibrate_max_speed(TrajectorySpec spec, double v_target) {
  for (int it = 0; it < 5; ++it) {
    const double v = spec.max_speed();
    if (v <= 0.0) throw std::invalid_argument("cannot calibrate the speed of a static trajectory");
    spec.angular_freqs *= v_target / v;
  }
  return spec;
}

FlatOutput eval_flat(const TrajectorySpec& spec, double t) {
  if (!(t >= 0.0 && t <= spec.duration)) {
    throw OutOfWindow("t = " + std::to_string(t) + " outside [0, " + std::to_string(spec.duration) + "]");
  }
  FlatOutput out;
  for (int i = 0; i < 3; ++i) {
    const double A = spec.amplitudes[i];
    const double w = spec.angular_freqs[i];
    const double arg = w * t + spec.phases[i];
    const double s = std::sin(arg);
    const double c = std::cos(arg);
    out.p[i] = spec.center[i] + A * s;
    out.v[i] = A * w * c;
    out.a[i] = -A * w * w * s;
    out.j[i] = -A * w * w * w * c;
  }
  out.yaw = spec.yaw0;
  out.yaw_rate = 0.0;
  if (spec.yaw_mode == YawMode::tangent) {
    const double h2 = out.v.x() * out.v.x() + out.v.y() * out.v.y();
    if (h2 > 1e-12) {
      out.yaw = std::atan2(out.v.y(), out.v.x());
      out.yaw_rate = (out.v.x() * out.a.y() - out.v.y() * out.a.x()) / h2;
    }
  }
  return out;
}

ClassicalReference flat_to_classical(const FlatOutput& flat, const QuadrotorParams& params) {
  const Vec3& ez = params.e_z;
  const Vec3 thrust = flat.a + params.gravity * ez;
  const double T = thrust.norm();
  if (!(T > 1e-6)) throw SingularReference("reference thrust vanishes (free fall)");
  const Vec3 b = thrust / T;
  const Vec3 b_dot = (flat.j - b.dot(flat.j) * b) / T;

  // Minimal rotation taking e_z to b: normalize(1 + e_z.b, e_z x b).
  Vec4 u;
  u << 1.0 + ez.dot(b), ez.cross(b);
  const double nu = u.norm();
  if (!(nu > 1e-9)) throw SingularReference("reference thrust points opposite to e_z");
  Vec4 u_dot;
  u_dot << ez.dot(b_dot), ez.cross(b_dot);
  const Vec4 qt = u / nu;
  const Vec4 qt_dot = (u_dot - qt * qt.dot(u_dot)) / nu;

  const double hy = 0.5 * flat.yaw;
  const Quaternion qy{std::cos(hy), std::sin(hy) * ez.x(), std::sin(hy) * ez.y(), std::sin(hy) * ez.z()};
  const double hr = 0.5 * flat.yaw_rate;
  const Quaternion qy_dot{-hr * std::sin(hy), hr * std::cos(hy) * ez.x(), hr * std::cos(hy) * ez.y(),
                          hr * std::cos(hy) * ez.z()};

  const Quaternion tilt = Quaternion::from_coeffs(qt);
  const Quaternion r = tilt * qy;
  const Quaternion r_dot = Quaternion::from_coeffs(qt_dot) * qy + tilt * qy_dot;

  ClassicalReference ref;
  ref.x.p = flat.p;
  ref.x.v = flat.v;
  ref.x.r = UnitQuaternion::normalized(r);
  ref.x.w = 2.0 * (ref.x.r.quat().conj() * r_dot).vec();
  ref.u.f = params.mass * T;
  ref.u.tau = Vec3::Zero();
  return ref;
}

ReferencePoint to_reference_point(const ClassicalReference& ref, const QuadrotorParams& params) {
  const DqState s = to_dq_state(ref.x);
  return {s.q, s.twist, dual_input_from_wrench(ref.u, params)};
}

ReferencePoint flat_to_reference(const FlatOutput& flat, const QuadrotorParams& params) {
  return to_reference_point(flat_to_classical(flat, params), params);
}

ClassicalReference hover_reference(const Vec3& p, const UnitQuaternion& r, const QuadrotorParams& params) {
  ClassicalReference ref;
  ref.x.p = p;
  ref.x.r = r;
  ref.u.f = params.hover_thrust();
  return ref;
}

}  // namespace dqnmpc
