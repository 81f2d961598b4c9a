#include "dqnmpc/dq_algebra.hpp"

#include <cmath>
#include <string>

namespace dqnmpc {

double Quaternion::norm() const { return std::sqrt(squared_norm()); }

ConjugateNorm quat_conj_norm(const Quaternion& q) { return {q.conj(), q.norm()}; }

Mat4 left_matrix(const Quaternion& a) {
  Mat4 m;
  m << a.w, -a.x, -a.y, -a.z,
       a.x,  a.w, -a.z,  a.y,
       a.y,  a.z,  a.w, -a.x,
       a.z, -a.y,  a.x,  a.w;
  return m;
}

Mat4 right_matrix(const Quaternion& b) {
  Mat4 m;
  m << b.w, -b.x, -b.y, -b.z,
       b.x,  b.w,  b.z, -b.y,
       b.y, -b.z,  b.w,  b.x,
       b.z,  b.y, -b.x,  b.w;
  return m;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

UnitQuaternion::UnitQuaternion(const Quaternion& q) : q_(q) {
  if (!(std::abs(q.norm() - 1.0) <= kUnitTolerance)) {
    throw NotUnit("quaternion norm " + std::to_string(q.norm()) + " is not 1");
  }
}

UnitQuaternion UnitQuaternion::normalized(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > kDegenerateNorm)) throw DegenerateDualQuaternion("cannot normalize a zero quaternion");
  return UnitQuaternion((1.0 / n) * q, Unchecked{});
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 n = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return normalized({std::cos(0.5 * angle), s * n.x(), s * n.y(), s * n.z()});
}

UnitQuaternion UnitQuaternion::canonical() const { return UnitQuaternion(canonicalize(q_), Unchecked{}); }

Mat3 UnitQuaternion::to_rotation_matrix() const {
  const auto& q = q_;
  Mat3 r;
  r << 1 - 2 * (q.y * q.y + q.z * q.z), 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y),
       2 * (q.x * q.y + q.w * q.z), 1 - 2 * (q.x * q.x + q.z * q.z), 2 * (q.y * q.z - q.w * q.x),
       2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), 1 - 2 * (q.x * q.x + q.y * q.y);
  return r;
}

Quaternion canonicalize(const Quaternion& q) {
  if (q.w > 0.0) return q;
  if (q.w < 0.0) return -q;
  // Tie on the scalar part: keep the lexicographically larger imaginary part.
  for (double c : {q.x, q.y, q.z}) {
    if (c > 0.0) return q;
    if (c < 0.0) return -q;
  }
  return q;
}

Vec3 quat_log(const UnitQuaternion& r) {
  const Quaternion c = canonicalize(r.quat());
  const Vec3 v = c.vec();
  const double s = v.norm();
  if (2.0 * s < kSmallAngle) {
    // atan(s/w)/s = (1 - s^2/(3 w^2)) / w + O(s^4)
    return v * ((1.0 - s * s / (3.0 * c.w * c.w)) / c.w);
  }
  return v * (std::atan2(s, c.w) / s);
}

UnitQuaternion quat_exp(const Vec3& v) {
  const double a = v.norm();
  if (2.0 * a < kSmallAngle) {
    const Vec3 im = v * (1.0 - a * a / 6.0);
    return UnitQuaternion::normalized({1.0 - 0.5 * a * a, im.x(), im.y(), im.z()});
  }
  const Vec3 im = v * (std::sin(a) / a);
  return UnitQuaternion::normalized({std::cos(a), im.x(), im.y(), im.z()});
}

Vec3 rotate_to_body(const UnitQuaternion& r, const Vec3& v) {
  return (r.quat().conj() * Quaternion::pure(v) * r.quat()).vec();
}

Vec3 rotate_to_world(const UnitQuaternion& r, const Vec3& v) {
  return (r.quat() * Quaternion::pure(v) * r.quat().conj()).vec();
}

Vec3 pure_cross(const Vec3& a, const Vec3& b) {
  const Quaternion qa = Quaternion::pure(a);
  const Quaternion qb = Quaternion::pure(b);
  return (0.5 * (qa * qb - qb * qa)).vec();
}

Eigen::Matrix<double, 8, 1> DualQuaternion::coeffs() const {
  Eigen::Matrix<double, 8, 1> c;
  c << p.coeffs(), d.coeffs();
  return c;
}

DualQuaternion DualQuaternion::from_coeffs(const Eigen::Matrix<double, 8, 1>& c) {
  return {Quaternion::from_coeffs(c.head<4>()), Quaternion::from_coeffs(c.tail<4>())};
}

UnitDualQuaternion::UnitDualQuaternion(const DualQuaternion& q) : q_(q) {
  const double n = q.p.norm();
  const double orth = q.p.coeffs().dot(q.d.coeffs());
  if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
    throw NotUnit("dual quaternion primary norm " + std::to_string(n) + " is not 1");
  }
  if (!(std::abs(orth) <= kUnitTolerance)) {
    throw NotUnit("dual quaternion parts are not orthogonal (" + std::to_string(orth) + ")");
  }
}

UnitDualQuaternion UnitDualQuaternion::from_pose(const Vec3& p, const UnitQuaternion& r) {
  return UnitDualQuaternion({r.quat(), 0.5 * (Quaternion::pure(p) * r.quat())}, Unchecked{});
}

UnitQuaternion UnitDualQuaternion::rotation() const { return UnitQuaternion::normalized(q_.p); }

Vec3 UnitDualQuaternion::translation() const { return 2.0 * (q_.d * q_.p.conj()).vec(); }

UnitDualQuaternion UnitDualQuaternion::canonical() const {
  const Quaternion c = canonicalize(q_.p);
  if (c == q_.p) return *this;
  return UnitDualQuaternion({-q_.p, -q_.d}, Unchecked{});
}

UnitDualQuaternion dq_from_pose(const Vec3& p, const UnitQuaternion& r) {
  return UnitDualQuaternion::from_pose(p, r);
}

Pose dq_to_pose(const UnitDualQuaternion& q) { return q.to_pose(); }

ScrewTangent dq_log(const UnitDualQuaternion& q) {
  const UnitDualQuaternion c = q.canonical();
  return {2.0 * quat_log(c.rotation()), c.translation()};
}

UnitDualQuaternion dq_exp(const ScrewTangent& s) { return dq_from_pose(s.t, quat_exp(0.5 * s.phi)); }

UnitDualQuaternion dq_normalize(const DualQuaternion& q) {
  const double n = q.p.norm();
  if (!(n > kDegenerateNorm)) {
    throw DegenerateDualQuaternion("primary part norm " + std::to_string(n) + " too small to normalize");
  }
  const Vec4 p = q.p.coeffs() / n;
  Vec4 d = q.d.coeffs() / n;
  d -= p.dot(d) * p;
  return UnitDualQuaternion({Quaternion::from_coeffs(p), Quaternion::from_coeffs(d)},
                            UnitDualQuaternion::Unchecked{});
}

Mat4 to_homogeneous(const UnitDualQuaternion& q) {
  Mat4 t = Mat4::Identity();
  t.topLeftCorner<3, 3>() = q.rotation().to_rotation_matrix();
  t.topRightCorner<3, 1>() = q.translation();
  return t;
}

}  // namespace dqnmpc
