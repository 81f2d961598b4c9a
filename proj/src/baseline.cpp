#include "dqnmpc/baseline.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>
#include <string>

namespace dqnmpc {

namespace {

template <int n>
Eigen::Matrix<double, n, n> cholesky_factor(const Eigen::Matrix<double, n, n>& Q, const char* name) {
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(name) + " is not symmetric");
  }
  Eigen::LLT<Eigen::Matrix<double, n, n>> llt(Q);
  if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(name) + " is not positive definite");
  return llt.matrixL();
}

// Im of the canonical rd* (x) r for a flat (possibly non-unit) r, with its Jacobian.
Vec3 orientation_error_flat(const Vec4& r, const UnitQuaternion& rd, Eigen::Matrix<double, 3, 4>* jac) {
  const Mat4 L = left_matrix(rd.conj().quat());
  const Vec4 qe = L * r;
  const Quaternion q = Quaternion::from_coeffs(qe);
  const double sg = canonicalize(q) == q ? 1.0 : -1.0;
  if (jac) *jac = sg * L.bottomRows<3>();
  return sg * qe.tail<3>();
}

}  // namespace

void BaselineWeights::validate() const {
  cholesky_factor<3>(Qpos, "Qpos");
  cholesky_factor<3>(Qvel, "Qvel");
  cholesky_factor<3>(Qquat, "Qquat");
  cholesky_factor<3>(Qomega, "Qomega");
  cholesky_factor<4>(Rb, "Rb");
  cholesky_factor<3>(QposN, "QposN");
  cholesky_factor<3>(QvelN, "QvelN");
  cholesky_factor<3>(QquatN, "QquatN");
  cholesky_factor<3>(QomegaN, "QomegaN");
}

Mat4x4 BaselineWeights::input_weights_for(const QuadrotorParams& params, double r) {
  const Vec3 Jinv = params.inertia.cwiseInverse();
  return Eigen::Vector4d(r / (params.mass * params.mass), r * Jinv.x() * Jinv.x(), r * Jinv.y() * Jinv.y(),
                         r * Jinv.z() * Jinv.z())
      .asDiagonal();
}

Vec3 baseline_orientation_error(const UnitQuaternion& rd, const UnitQuaternion& r) {
  return (rd.conj() * r).canonical().vec();
}

double baseline_stage_cost(const ClassicalState& x, const WrenchInput& u, const ClassicalReference& ref,
                           const BaselineWeights& w) {
  const Vec3 ep = ref.x.p - x.p;
  const Vec3 ev = ref.x.v - x.v;
  const Vec3 eq = baseline_orientation_error(ref.x.r, x.r);
  const Vec3 ew = ref.x.w - x.w;
  const Eigen::Vector4d eu = flat::pack(ref.u) - flat::pack(u);
  return ep.dot(w.Qpos * ep) + ev.dot(w.Qvel * ev) + eq.dot(w.Qquat * eq) + ew.dot(w.Qomega * ew) +
         eu.dot(w.Rb * eu);
}

double baseline_terminal_cost(const ClassicalState& x, const ClassicalReference& ref, const BaselineWeights& w) {
  const Vec3 ep = ref.x.p - x.p;
  const Vec3 ev = ref.x.v - x.v;
  const Vec3 eq = baseline_orientation_error(ref.x.r, x.r);
  const Vec3 ew = ref.x.w - x.w;
  return ep.dot(w.QposN * ep) + ev.dot(w.QvelN * ev) + eq.dot(w.QquatN * eq) + ew.dot(w.QomegaN * ew);
}

ClassicalModel::ClassicalModel(QuadrotorParams params, OcpConfig cfg, BaselineWeights weights)
    : params_(std::move(params)), cfg_(std::move(cfg)), weights_(std::move(weights)) {
  params_.validate();
  cfg_.validate();
  Lpos_ = cholesky_factor<3>(weights_.Qpos, "Qpos");
  Lvel_ = cholesky_factor<3>(weights_.Qvel, "Qvel");
  Lquat_ = cholesky_factor<3>(weights_.Qquat, "Qquat");
  Lomega_ = cholesky_factor<3>(weights_.Qomega, "Qomega");
  Lr_ = cholesky_factor<4>(weights_.Rb, "Rb");
  LposN_ = cholesky_factor<3>(weights_.QposN, "QposN");
  LvelN_ = cholesky_factor<3>(weights_.QvelN, "QvelN");
  LquatN_ = cholesky_factor<3>(weights_.QquatN, "QquatN");
  LomegaN_ = cholesky_factor<3>(weights_.QomegaN, "QomegaN");
  u_min_ << params_.f_min, params_.tau_min;
  u_max_ << params_.f_max, params_.tau_max;
  if (!((u_max_ - u_min_).minCoeff() > 0.0)) throw std::invalid_argument("baseline input bounds must satisfy u_min < u_max");
}

flat::Linearization<ClassicalModel::nx, ClassicalModel::nu> ClassicalModel::step(const State& x,
                                                                                 const Input& u) const {
  return flat::classical_step(x, u, params_, dt());
}

void ClassicalModel::stage_residual(const State& x, const Input& u, const Ref& ref, Eigen::Matrix<double, nr, 1>& r,
                                    Eigen::Matrix<double, nr, nx>* Jx, Eigen::Matrix<double, nr, nu>* Ju) const {
  Eigen::Matrix<double, 3, 4> Jq;
  const Vec3 eq = orientation_error_flat(x.segment<4>(6), ref.x.r, &Jq);
  r.segment<3>(0) = Lpos_.transpose() * (x.segment<3>(0) - ref.x.p);
  r.segment<3>(3) = Lvel_.transpose() * (x.segment<3>(3) - ref.x.v);
  r.segment<3>(6) = Lquat_.transpose() * eq;
  r.segment<3>(9) = Lomega_.transpose() * (x.segment<3>(10) - ref.x.w);
  r.segment<4>(12) = Lr_.transpose() * (u - flat::pack(ref.u));
  if (Jx) {
    Jx->setZero();
    Jx->block<3, 3>(0, 0) = Lpos_.transpose();
    Jx->block<3, 3>(3, 3) = Lvel_.transpose();
    Jx->block<3, 4>(6, 6) = Lquat_.transpose() * Jq;
    Jx->block<3, 3>(9, 10) = Lomega_.transpose();
  }
  if (Ju) {
    Ju->setZero();
    Ju->block<4, 4>(12, 0) = Lr_.transpose();
  }
}

void ClassicalModel::terminal_residual(const State& x, const Ref& ref, Eigen::Matrix<double, nr_terminal, 1>& r,
                                       Eigen::Matrix<double, nr_terminal, nx>* Jx) const {
  Eigen::Matrix<double, 3, 4> Jq;
  const Vec3 eq = orientation_error_flat(x.segment<4>(6), ref.x.r, &Jq);
  r.segment<3>(0) = LposN_.transpose() * (x.segment<3>(0) - ref.x.p);
  r.segment<3>(3) = LvelN_.transpose() * (x.segment<3>(3) - ref.x.v);
  r.segment<3>(6) = LquatN_.transpose() * eq;
  r.segment<3>(9) = LomegaN_.transpose() * (x.segment<3>(10) - ref.x.w);
  if (Jx) {
    Jx->setZero();
    Jx->block<3, 3>(0, 0) = LposN_.transpose();
    Jx->block<3, 3>(3, 3) = LvelN_.transpose();
    Jx->block<3, 4>(6, 6) = LquatN_.transpose() * Jq;
    Jx->block<3, 3>(9, 10) = LomegaN_.transpose();
  }
}

double ClassicalModel::norm_residual(const State& x, Eigen::Matrix<double, 1, nx>* grad) const {
  const Vec4 r = x.segment<4>(6);
  const double n = r.norm();
  if (grad) {
    grad->setZero();
    grad->segment<4>(6) = r.transpose() / n;
  }
  return n - 1.0;
}

}  // namespace dqnmpc
