#include "dqnmpc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace dqnmpc {

void QuadrotorParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw std::invalid_argument("inertia diagonal must be positive");
  if (!(gravity >= 0.0)) throw std::invalid_argument("gravity must be non-negative");
  if (!(std::abs(e_z.norm() - 1.0) <= 1e-9)) throw std::invalid_argument("e_z must be a unit vector");
  if (!(f_min >= 0.0 && f_min < f_max)) throw std::invalid_argument("thrust bounds must satisfy 0 <= f_min < f_max");
  if (!((tau_max - tau_min).minCoeff() > 0.0)) throw std::invalid_argument("torque bounds must satisfy tau_min < tau_max");
  if (!(drag_c >= 0.0)) throw std::invalid_argument("drag_c must be non-negative");
}

void DisturbanceConfig::validate() const {
  if (!(drag_scale > 0.0 && mass_scale > 0.0 && inertia_scale > 0.0)) {
    throw std::invalid_argument("disturbance scales must be positive");
  }
}

namespace flat {
namespace {

Quaternion quat_at(const auto& x, int i) { return {x[i], x[i + 1], x[i + 2], x[i + 3]}; }

const Eigen::DiagonalMatrix<double, 4> kConjugation(1.0, -1.0, -1.0, -1.0);

}  // namespace

DqVec pack(const DqState& x) {
  DqVec v;
  v << x.q.primary().coeffs(), x.q.dual().coeffs(), x.twist.prim, x.twist.dual;
  return v;
}

DqState unpack_dq(const DqVec& x) {
  return {dqnmpc::dq_normalize({quat_at(x, 0), quat_at(x, 4)}), {x.segment<3>(8), x.segment<3>(11)}};
}

ClassicalVec pack(const ClassicalState& x) {
  ClassicalVec v;
  v << x.p, x.v, x.r.quat().coeffs(), x.w;
  return v;
}

ClassicalState unpack_classical(const ClassicalVec& x) {
  return {x.segment<3>(0), x.segment<3>(3), UnitQuaternion::normalized(quat_at(x, 6)), x.segment<3>(10)};
}

ClassicalInput pack(const WrenchInput& u) {
  ClassicalInput v;
  v << u.f, u.tau;
  return v;
}

WrenchInput unpack_wrench(const ClassicalInput& u) { return {u[0], u.tail<3>()}; }

DqVec dq_rhs(const DqVec& x, const DqInput& u, const QuadrotorParams& params, Eigen::Matrix<double, 14, 14>* jx,
             Eigen::Matrix<double, 14, 6>* ju) {
  const Quaternion P = quat_at(x, 0);
  const Quaternion D = quat_at(x, 4);
  const Vec3 w = x.segment<3>(8);
  const Vec3 vb = x.segment<3>(11);
  const Quaternion wq = Quaternion::pure(w);
  const Quaternion vq = Quaternion::pure(vb);
  const Quaternion G = Quaternion::pure(params.gravity * params.e_z);
  const Mat3 J = params.inertia_matrix();
  const Vec3 Jinv = params.inertia.cwiseInverse();
  const double drag = params.drag_c / params.mass;

  DqVec out;
  out.segment<4>(0) = (0.5 * (P * wq)).coeffs();
  out.segment<4>(4) = (0.5 * (P * vq + D * wq)).coeffs();
  out.segment<3>(8) = -Jinv.cwiseProduct(w.cross(J * w)) + u.head<3>();
  out.segment<3>(11) = vb.cross(w) - (P.conj() * G * P).vec() - drag * vb + u.tail<3>();

  if (jx != nullptr) {
    auto& A = *jx;
    A.setZero();
    const Mat4 Rw = right_matrix(wq);
    const Mat4 LP = left_matrix(P);
    A.block<4, 4>(0, 0) = 0.5 * Rw;
    A.block<4, 3>(0, 8) = 0.5 * LP.rightCols<3>();
    A.block<4, 4>(4, 0) = 0.5 * right_matrix(vq);
    A.block<4, 4>(4, 4) = 0.5 * Rw;
    A.block<4, 3>(4, 8) = 0.5 * left_matrix(D).rightCols<3>();
    A.block<4, 3>(4, 11) = 0.5 * LP.rightCols<3>();
    A.block<3, 3>(8, 8) = -(Jinv.asDiagonal() * (skew(w) * J - skew(J * w)));
    const Mat4 dgrav = right_matrix(G * P) * kConjugation + left_matrix(P.conj() * G);
    A.block<3, 4>(11, 0) = -dgrav.bottomRows<3>();
    A.block<3, 3>(11, 8) = skew(vb);
    A.block<3, 3>(11, 11) = -skew(w) - drag * Mat3::Identity();
  }
  if (ju != nullptr) {
    ju->setZero();
    ju->block<3, 3>(8, 0).setIdentity();
    ju->block<3, 3>(11, 3).setIdentity();
  }
  return out;
}

ClassicalVec classical_rhs(const ClassicalVec& x, const ClassicalInput& u, const QuadrotorParams& params,
                           Eigen::Matrix<double, 13, 13>* jx, Eigen::Matrix<double, 13, 4>* ju,
                           const Vec3& ext_force, const Vec3& ext_moment) {
  const Vec3 v = x.segment<3>(3);
  const Quaternion r = quat_at(x, 6);
  const Vec3 w = x.segment<3>(10);
  const Quaternion wq = Quaternion::pure(w);
  const Quaternion E = Quaternion::pure(params.e_z);
  const Mat3 J = params.inertia_matrix();
  const Vec3 Jinv = params.inertia.cwiseInverse();
  const double m = params.mass;
  const double f = u[0];
  const Vec3 tau = u.tail<3>();
  const Vec3 thrust_dir = (r * E * r.conj()).vec();

  ClassicalVec out;
  out.segment<3>(0) = v;
  out.segment<3>(3) = (f / m) * thrust_dir - params.gravity * params.e_z - (params.drag_c / m) * v + ext_force / m;
  out.segment<4>(6) = (0.5 * (r * wq)).coeffs();
  out.segment<3>(10) = Jinv.cwiseProduct(tau + ext_moment - w.cross(J * w));

  if (jx != nullptr) {
    auto& A = *jx;
    A.setZero();
    A.block<3, 3>(0, 3).setIdentity();
    A.block<3, 3>(3, 3) = -(params.drag_c / m) * Mat3::Identity();
    const Mat4 dthrust = right_matrix(E * r.conj()) + left_matrix(r * E) * kConjugation;
    A.block<3, 4>(3, 6) = (f / m) * dthrust.bottomRows<3>();
    A.block<4, 4>(6, 6) = 0.5 * right_matrix(wq);
    A.block<4, 3>(6, 10) = 0.5 * left_matrix(r).rightCols<3>();
    A.block<3, 3>(10, 10) = -(Jinv.asDiagonal() * (skew(w) * J - skew(J * w)));
  }
  if (ju != nullptr) {
    ju->setZero();
    ju->block<3, 1>(3, 0) = thrust_dir / m;
    ju->block<3, 3>(10, 1) = Jinv.asDiagonal();
  }
  return out;
}

DqVec dq_normalize(const DqVec& x, Eigen::Matrix<double, 14, 14>* jac) {
  const Vec4 P = x.segment<4>(0);
  const Vec4 D = x.segment<4>(4);
  const double n = P.norm();
  if (!(n > kDegenerateNorm)) throw DegenerateDualQuaternion("primary part too small to normalize");
  const Vec4 ph = P / n;
  const Vec4 dt = D / n;
  const double s = ph.dot(dt);
  DqVec out = x;
  out.segment<4>(0) = ph;
  out.segment<4>(4) = dt - s * ph;
  if (jac != nullptr) {
    const Mat4 I = Mat4::Identity();
    const Mat4 Mp = (I - ph * ph.transpose()) / n;
    const Mat4 dDt_dP = -dt * ph.transpose() / n;
    auto& Jn = *jac;
    Jn.setIdentity();
    Jn.block<4, 4>(0, 0) = Mp;
    Jn.block<4, 4>(4, 0) = dDt_dP - ph * (dt.transpose() * Mp + ph.transpose() * dDt_dP) - s * Mp;
    Jn.block<4, 4>(4, 4) = (I - ph * ph.transpose()) / n;
  }
  return out;
}

ClassicalVec classical_normalize(const ClassicalVec& x, Eigen::Matrix<double, 13, 13>* jac) {
  const Vec4 r = x.segment<4>(6);
  const double n = r.norm();
  if (!(n > kDegenerateNorm)) throw DegenerateDualQuaternion("attitude quaternion too small to normalize");
  ClassicalVec out = x;
  out.segment<4>(6) = r / n;
  if (jac != nullptr) {
    jac->setIdentity();
    const Vec4 rh = r / n;
    jac->block<4, 4>(6, 6) = (Mat4::Identity() - rh * rh.transpose()) / n;
  }
  return out;
}

Linearization<14, 6> dq_step(const DqVec& x, const DqInput& u, const QuadrotorParams& params, double dt) {
  auto rhs = [&params](const DqVec& xx, const DqInput& uu, Eigen::Matrix<double, 14, 14>* a,
                       Eigen::Matrix<double, 14, 6>* b) { return dq_rhs(xx, uu, params, a, b); };
  auto lin = rk4_linearized<14, 6>(rhs, x, u, dt);
  Eigen::Matrix<double, 14, 14> Jn;
  lin.y = dq_normalize(lin.y, &Jn);
  lin.A = Jn * lin.A;
  lin.B = Jn * lin.B;
  return lin;
}

Linearization<13, 4> classical_step(const ClassicalVec& x, const ClassicalInput& u, const QuadrotorParams& params,
                                    double dt) {
  auto rhs = [&params](const ClassicalVec& xx, const ClassicalInput& uu, Eigen::Matrix<double, 13, 13>* a,
                       Eigen::Matrix<double, 13, 4>* b) { return classical_rhs(xx, uu, params, a, b); };
  auto lin = rk4_linearized<13, 4>(rhs, x, u, dt);
  Eigen::Matrix<double, 13, 13> Jn;
  lin.y = classical_normalize(lin.y, &Jn);
  lin.A = Jn * lin.A;
  lin.B = Jn * lin.B;
  return lin;
}

}  // namespace flat

ClassicalDerivative classical_derivative(const ClassicalState& x, const WrenchInput& u,
                                         const QuadrotorParams& params) {
  const flat::ClassicalVec d = flat::classical_rhs(flat::pack(x), flat::pack(u), params);
  return {d.segment<3>(0), d.segment<3>(3), Quaternion::from_coeffs(d.segment<4>(6)), d.segment<3>(10)};
}

DualVector dual_input_from_wrench(const WrenchInput& u, const QuadrotorParams& params) {
  return {params.inertia.cwiseInverse().cwiseProduct(u.tau), (u.f / params.mass) * params.e_z};
}

WrenchInput wrench_from_dual_input(const DualVector& u, const QuadrotorParams& params) {
  return {params.mass * u.dual.dot(params.e_z), params.inertia.cwiseProduct(u.prim)};
}

DqDerivative dq_derivative(const DqState& x, const DualVector& u, const QuadrotorParams& params) {
  const flat::DqVec d = flat::dq_rhs(flat::pack(x), u.to_vec(), params);
  return {{Quaternion::from_coeffs(d.segment<4>(0)), Quaternion::from_coeffs(d.segment<4>(4))},
          {d.segment<3>(8), d.segment<3>(11)}};
}

DqState to_dq_state(const ClassicalState& x) {
  return {dq_from_pose(x.p, x.r), {x.w, rotate_to_body(x.r, x.v)}};
}

ClassicalState to_classical_state(const DqState& x) {
  const Pose pose = x.q.to_pose();
  return {pose.p, rotate_to_world(pose.r, x.twist.dual), pose.r, x.twist.prim};
}

DqState rk4_step(const DqState& x, const DualVector& u, const QuadrotorParams& params, double dt) {
  const flat::DqInput uv = u.to_vec();
  const flat::DqVec y =
      rk4([&](const flat::DqVec& s) -> flat::DqVec { return flat::dq_rhs(s, uv, params); }, flat::pack(x), dt);
  return flat::unpack_dq(y);
}

ClassicalState rk4_step(const ClassicalState& x, const WrenchInput& u, const QuadrotorParams& params, double dt) {
  const flat::ClassicalInput uv = flat::pack(u);
  const flat::ClassicalVec y = rk4(
      [&](const flat::ClassicalVec& s) -> flat::ClassicalVec { return flat::classical_rhs(s, uv, params); },
      flat::pack(x), dt);
  return flat::unpack_classical(y);
}

ClassicalState plant_step(const ClassicalState& x, const WrenchInput& u, const QuadrotorParams& truth,
                          const DisturbanceConfig& dist, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step requires dt > 0");
  QuadrotorParams eff = truth;
  eff.mass = truth.mass * dist.mass_scale;
  eff.inertia = truth.inertia * dist.inertia_scale;
  eff.drag_c = truth.drag_c * dist.drag_scale;
  const int substeps = static_cast<int>(std::ceil(dt / kPlantSubstep - 1e-9));
  const double h = dt / substeps;
  const flat::ClassicalInput uv = flat::pack(u);
  flat::ClassicalVec s = flat::pack(x);
  for (int i = 0; i < substeps; ++i) {
    s = rk4(
        [&](const flat::ClassicalVec& z) -> flat::ClassicalVec {
          return flat::classical_rhs(z, uv, eff, nullptr, nullptr, dist.ext_force, dist.ext_moment);
        },
        s, h);
    s = flat::classical_normalize(s);
  }
  return flat::unpack_classical(s);
}

}  // namespace dqnmpc
