#pragma once

/**
 * @file
 * @brief Quaternion, dual-quaternion and pose algebra.
 *
 * Conventions: quaternions are stored scalar-first (w, x, y, z) and multiply
 * with the Hamilton product. Pure quaternions (zero real part) are carried as
 * Eigen 3-vectors. A unit dual quaternion encodes a pose as
 *   q = r + 1/2 eps (p (x) r),
 * i.e. a translation p followed by a rotation r, both in the world frame.
 */

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>

namespace dqnmpc {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Primary-part norm below which a dual quaternion cannot be normalized.
inline constexpr double kDegenerateNorm = 1e-12;
/// Tolerance used when validating unit (dual) quaternions at construction.
inline constexpr double kUnitTolerance = 1e-9;
/// Rotation angle below which exp/log use their Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;

class DegenerateDualQuaternion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotUnit : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Quaternion {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr Quaternion() = default;
  constexpr Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static constexpr Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  static constexpr Quaternion zero() { return {0.0, 0.0, 0.0, 0.0}; }
  static Quaternion pure(const Vec3& v) { return {0.0, v.x(), v.y(), v.z()}; }
  static Quaternion from_coeffs(const Vec4& c) { return {c[0], c[1], c[2], c[3]}; }

  Vec4 coeffs() const { return {w, x, y, z}; }
  Vec3 vec() const { return {x, y, z}; }

  Quaternion conj() const { return {w, -x, -y, -z}; }
  double squared_norm() const { return w * w + x * x + y * y + z * z; }
  double norm() const;

  friend Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
  }
  friend Quaternion operator+(const Quaternion& a, const Quaternion& b) {
    return {a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Quaternion operator-(const Quaternion& a, const Quaternion& b) {
    return {a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Quaternion operator-(const Quaternion& a) { return {-a.w, -a.x, -a.y, -a.z}; }
  friend Quaternion operator*(double s, const Quaternion& a) { return {s * a.w, s * a.x, s * a.y, s * a.z}; }
  friend Quaternion operator*(const Quaternion& a, double s) { return s * a; }
  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

/// Hamilton product; alias kept for symmetry with dq_mul.
inline Quaternion quat_mul(const Quaternion& a, const Quaternion& b) { return a * b; }

struct ConjugateNorm {
  Quaternion conj;
  double norm;
};
ConjugateNorm quat_conj_norm(const Quaternion& q);

/// Matrix L(a) such that a (x) b = L(a) b.coeffs().
Mat4 left_matrix(const Quaternion& a);
/// Matrix R(b) such that a (x) b = R(b) a.coeffs().
Mat4 right_matrix(const Quaternion& b);

Mat3 skew(const Vec3& v);

/// Unit quaternion; the norm is checked at construction.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  /// Throws NotUnit if |‖q‖ - 1| exceeds kUnitTolerance.
  explicit UnitQuaternion(const Quaternion& q);

  /// Renormalizes q; throws DegenerateDualQuaternion when q is near zero.
  static UnitQuaternion normalized(const Quaternion& q);
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
  static UnitQuaternion identity() { return {}; }

  const Quaternion& quat() const { return q_; }
  double w() const { return q_.w; }
  Vec3 vec() const { return q_.vec(); }
  UnitQuaternion conj() const { return UnitQuaternion(q_.conj(), Unchecked{}); }
  /// Representative with non-negative scalar part (see canonicalize()).
  UnitQuaternion canonical() const;
  Mat3 to_rotation_matrix() const;

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
    return UnitQuaternion(a.q_ * b.q_, Unchecked{});
  }

 private:
  struct Unchecked {};
  UnitQuaternion(const Quaternion& q, Unchecked) : q_(q) {}
  Quaternion q_{};
};

/// Flips q so that w >= 0. At w == 0 the representative whose (x, y, z) is
/// lexicographically largest wins.
Quaternion canonicalize(const Quaternion& q);

/// Rotation log: returns (theta/2) n for the canonical representative.
Vec3 quat_log(const UnitQuaternion& r);
/// Inverse of quat_log: (cos|v|, sin|v| v/|v|).
UnitQuaternion quat_exp(const Vec3& v);

/// r* (x) v (x) r: world vector expressed in the body frame of r.
Vec3 rotate_to_body(const UnitQuaternion& r, const Vec3& v);
/// r (x) v (x) r*: body vector expressed in the world frame.
Vec3 rotate_to_world(const UnitQuaternion& r, const Vec3& v);

/// Commutator cross product of pure quaternions, (a b - b a)/2.
Vec3 pure_cross(const Vec3& a, const Vec3& b);

struct DualQuaternion {
  Quaternion p{};                  ///< primary part
  Quaternion d{Quaternion::zero()};  ///< dual part

  static DualQuaternion identity() { return {Quaternion::identity(), Quaternion::zero()}; }

  DualQuaternion conj() const { return {p.conj(), d.conj()}; }
  Eigen::Matrix<double, 8, 1> coeffs() const;
  static DualQuaternion from_coeffs(const Eigen::Matrix<double, 8, 1>& c);

  friend DualQuaternion operator*(const DualQuaternion& a, const DualQuaternion& b) {
    return {a.p * b.p, a.p * b.d + a.d * b.p};
  }
  friend DualQuaternion operator+(const DualQuaternion& a, const DualQuaternion& b) {
    return {a.p + b.p, a.d + b.d};
  }
  friend DualQuaternion operator-(const DualQuaternion& a, const DualQuaternion& b) {
    return {a.p - b.p, a.d - b.d};
  }
  friend DualQuaternion operator*(double s, const DualQuaternion& a) { return {s * a.p, s * a.d}; }
  friend bool operator==(const DualQuaternion&, const DualQuaternion&) = default;
};

inline DualQuaternion dq_mul(const DualQuaternion& a, const DualQuaternion& b) { return a * b; }

/// Pure dual quaternion (twist or dual input): prim + eps dual.
struct DualVector {
  Vec3 prim{Vec3::Zero()};
  Vec3 dual{Vec3::Zero()};

  static DualVector zero() { return {}; }
  static DualVector from_vec(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
  Vec6 to_vec() const {
    Vec6 v;
    v << prim, dual;
    return v;
  }
  DualQuaternion as_dual_quaternion() const { return {Quaternion::pure(prim), Quaternion::pure(dual)}; }

  friend DualVector operator+(const DualVector& a, const DualVector& b) { return {a.prim + b.prim, a.dual + b.dual}; }
  friend DualVector operator-(const DualVector& a, const DualVector& b) { return {a.prim - b.prim, a.dual - b.dual}; }
  friend DualVector operator*(double s, const DualVector& a) { return {s * a.prim, s * a.dual}; }
};

/// Pose-increment coordinates: rotation vector phi (rad) and translation t (m).
struct ScrewTangent {
  Vec3 phi{Vec3::Zero()};
  Vec3 t{Vec3::Zero()};
};

struct Pose {
  Vec3 p{Vec3::Zero()};
  UnitQuaternion r{};
};

/// Unit dual quaternion: unit primary part orthogonal to the dual part.
class UnitDualQuaternion {
 public:
  UnitDualQuaternion() = default;
  /// Throws NotUnit if either unit invariant is off by more than kUnitTolerance.
  explicit UnitDualQuaternion(const DualQuaternion& q);

  static UnitDualQuaternion identity() { return {}; }
  static UnitDualQuaternion from_pose(const Vec3& p, const UnitQuaternion& r);

  const DualQuaternion& dq() const { return q_; }
  const Quaternion& primary() const { return q_.p; }
  const Quaternion& dual() const { return q_.d; }
  UnitQuaternion rotation() const;
  Vec3 translation() const;
  Pose to_pose() const { return {translation(), rotation()}; }
  UnitDualQuaternion conj() const { return UnitDualQuaternion(q_.conj(), Unchecked{}); }
  UnitDualQuaternion canonical() const;

  friend UnitDualQuaternion operator*(const UnitDualQuaternion& a, const UnitDualQuaternion& b) {
    return UnitDualQuaternion(a.q_ * b.q_, Unchecked{});
  }

 private:
  friend UnitDualQuaternion dq_normalize(const DualQuaternion& q);
  struct Unchecked {};
  UnitDualQuaternion(const DualQuaternion& q, Unchecked) : q_(q) {}
  DualQuaternion q_{DualQuaternion::identity()};
};

UnitDualQuaternion dq_from_pose(const Vec3& p, const UnitQuaternion& r);
Pose dq_to_pose(const UnitDualQuaternion& q);

/// Ln(q) = 1/2 (phi + eps t); q is canonicalized first.
ScrewTangent dq_log(const UnitDualQuaternion& q);
UnitDualQuaternion dq_exp(const ScrewTangent& s);

/// Projects onto the unit dual quaternions: normalizes the primary part and
/// removes the dual part's component along it. Idempotent.
UnitDualQuaternion dq_normalize(const DualQuaternion& q);

/// 4x4 homogeneous transform of the encoded pose.
Mat4 to_homogeneous(const UnitDualQuaternion& q);

}  // namespace dqnmpc
