#include "dqnmpc/ocp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dqnmpc {

namespace {

const Eigen::DiagonalMatrix<double, 4> kConjugation(1.0, -1.0, -1.0, -1.0);

Quaternion quat4(const Vec4& c) { return Quaternion::from_coeffs(c); }

// Returns the lower factor L of Q = L L'.
Mat6 cholesky_factor(const Mat6& Q, const char* name) {
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(name) + " is not symmetric");
  }
  Eigen::LLT<Mat6> llt(Q);
  if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(name) + " is not positive definite");
  return llt.matrixL();
}

double canonical_sign(const Vec4& q) {
  return canonicalize(quat4(q)) == quat4(q) ? 1.0 : -1.0;
}

// (phi/2, t/2) of the dual quaternion (eP, eD) and its Jacobian with respect to (eP, eD).
Vec6 log_raw(const Vec4& eP_in, const Vec4& eD_in, Eigen::Matrix<double, 6, 8>* jac) {
  const double sg = canonical_sign(eP_in);
  const Vec4 P = sg * eP_in;
  const Vec4 D = sg * eD_in;
  const double w = P[0];
  const Vec3 v = P.tail<3>();
  const double s = v.norm();
  double a_over_s;
  double c;
  if (s < 1e-3 && w > 0.0) {
    const double w2 = w * w;
    const double w3 = w2 * w;
    const double w5 = w3 * w2;
    a_over_s = 1.0 / w - s * s / (3.0 * w3) + s * s * s * s / (5.0 * w5);
    c = -2.0 / (3.0 * w3) + 0.8 * s * s / w5;
  } else {
    const double a = std::atan2(s, w);
    a_over_s = a / s;
    c = w / (s * s * (w * w + s * s)) - a / (s * s * s);
  }
  const Quaternion Pq = quat4(P);
  const Quaternion Dq = quat4(D);
  Vec6 out;
  out.head<3>() = a_over_s * v;
  out.tail<3>() = (Dq * Pq.conj()).vec();
  if (jac != nullptr) {
    jac->setZero();
    jac->block<3, 1>(0, 0) = -v / (w * w + s * s);
    jac->block<3, 3>(0, 1) = a_over_s * Mat3::Identity() + c * v * v.transpose();
    jac->block<3, 4>(3, 0) = (left_matrix(Dq) * kConjugation).bottomRows<3>();
    jac->block<3, 4>(3, 4) = right_matrix(Pq.conj()).bottomRows<3>();
    *jac *= sg;
  }
  return out;
}

Eigen::Matrix<double, 6, ocp::kNu> input_expansion(const QuadrotorParams& params) {
  Eigen::Matrix<double, 6, ocp::kNu> M = Eigen::Matrix<double, 6, ocp::kNu>::Zero();
  M.topLeftCorner<3, 3>().setIdentity();
  M.block<3, 1>(3, 3) = params.e_z;
  return M;
}

}  // namespace

Weights Weights::with_terminal_multiplier(const Mat6& Qp, const Mat6& Qv, const Mat6& R, double multiplier) {
  return {Qp, Qv, R, multiplier * Qp, multiplier * Qv};
}

void Weights::validate() const {
  cholesky_factor(Qp, "Qp");
  cholesky_factor(Qv, "Qv");
  cholesky_factor(R, "R");
  cholesky_factor(QpN, "QpN");
  cholesky_factor(QvN, "QvN");
}

void OcpConfig::validate() const {
  if (N < 2) throw std::invalid_argument("ocp.N must be at least 2");
  if (!(horizon_s > 0.0)) throw std::invalid_argument("ocp.horizon_s must be positive");
  if (!(norm_tol > 0.0)) throw std::invalid_argument("ocp.norm_tol must be positive");
  if (!((u_max.prim - u_min.prim).minCoeff() > 0.0) || !((u_max.dual - u_min.dual).norm() > 0.0)) {
    throw std::invalid_argument("ocp input bounds must satisfy u_min < u_max");
  }
}

OcpConfig OcpConfig::from_params(const QuadrotorParams& params) {
  OcpConfig cfg;
  cfg.u_min = dual_input_from_wrench({params.f_min, params.tau_min}, params);
  cfg.u_max = dual_input_from_wrench({params.f_max, params.tau_max}, params);
  return cfg;
}

namespace ocp {

InputVec reduce_input(const DualVector& u, const QuadrotorParams& params) {
  InputVec v;
  v << u.prim, u.dual.dot(params.e_z);
  return v;
}

DualVector expand_input(const InputVec& u, const QuadrotorParams& params) {
  return {u.head<3>(), u[3] * params.e_z};
}

}  // namespace ocp

UnitDualQuaternion pose_error(const UnitDualQuaternion& qd, const UnitDualQuaternion& q) {
  return (qd.conj() * q).canonical();
}

DualVector twist_error(const DualVector& wd, const DualVector& w) { return wd - w; }

Vec6 log_vector(const UnitDualQuaternion& q) {
  const ScrewTangent s = dq_log(q);
  Vec6 v;
  v << 0.5 * s.phi, 0.5 * s.t;
  return v;
}

double stage_cost(const DqState& x, const DualVector& u, const ReferencePoint& ref, const Weights& w) {
  const Vec6 ln = log_vector(pose_error(ref.qd, x.q));
  const Vec6 we = twist_error(ref.wd, x.twist).to_vec();
  const Vec6 ue = (ref.ud - u).to_vec();
  return ln.dot(w.Qp * ln) + we.dot(w.Qv * we) + ue.dot(w.R * ue);
}

double terminal_cost(const DqState& x, const ReferencePoint& ref, const Weights& w) {
  const Vec6 ln = log_vector(pose_error(ref.qd, x.q));
  const Vec6 we = twist_error(ref.wd, x.twist).to_vec();
  return ln.dot(w.QpN * ln) + we.dot(w.QvN * we);
}

namespace {

// Ln of qd* q in flat coordinates with its Jacobian (6 x 8 over P, D).
Vec6 pose_log_flat(const ocp::StateVec& x, const UnitDualQuaternion& qd, Eigen::Matrix<double, 6, 8>* jac) {
  const Quaternion Pd = qd.primary().conj();
  const Quaternion Dd = qd.dual().conj();
  const Mat4 LPd = left_matrix(Pd);
  const Mat4 LDd = left_matrix(Dd);
  const Vec4 P = x.segment<4>(0);
  const Vec4 D = x.segment<4>(4);
  const Vec4 eP = LPd * P;
  const Vec4 eD = LPd * D + LDd * P;
  if (jac == nullptr) return log_raw(eP, eD, nullptr);
  Eigen::Matrix<double, 6, 8> Jl;
  const Vec6 out = log_raw(eP, eD, &Jl);
  Eigen::Matrix<double, 8, 8> de = Eigen::Matrix<double, 8, 8>::Zero();
  de.block<4, 4>(0, 0) = LPd;
  de.block<4, 4>(4, 0) = LDd;
  de.block<4, 4>(4, 4) = LPd;
  *jac = Jl * de;
  return out;
}

Vec6 twist_of(const ocp::StateVec& x) { return x.tail<6>(); }

}  // namespace

CostResiduals cost_residuals(const ocp::StateVec& x, const DualVector& u, const ReferencePoint& ref,
                             const Weights& w) {
  const Mat6 Lp = cholesky_factor(w.Qp, "Qp");
  const Mat6 Lv = cholesky_factor(w.Qv, "Qv");
  const Mat6 Lr = cholesky_factor(w.R, "R");
  Eigen::Matrix<double, 6, 8> Jl;
  const Vec6 ln = pose_log_flat(x, ref.qd, &Jl);
  CostResiduals out;
  out.r.segment<6>(0) = Lp.transpose() * ln;
  out.r.segment<6>(6) = Lv.transpose() * (ref.wd.to_vec() - twist_of(x));
  out.r.segment<6>(12) = Lr.transpose() * (ref.ud - u).to_vec();
  out.Jx.setZero();
  out.Jx.block<6, 8>(0, 0) = Lp.transpose() * Jl;
  out.Jx.block<6, 6>(6, 8) = -Lv.transpose();
  out.Ju.setZero();
  out.Ju.block<6, 6>(12, 0) = -Lr.transpose();
  return out;
}

TerminalResiduals terminal_residuals(const ocp::StateVec& x, const ReferencePoint& ref, const Weights& w) {
  const Mat6 Lp = cholesky_factor(w.QpN, "QpN");
  const Mat6 Lv = cholesky_factor(w.QvN, "QvN");
  Eigen::Matrix<double, 6, 8> Jl;
  const Vec6 ln = pose_log_flat(x, ref.qd, &Jl);
  TerminalResiduals out;
  out.r.segment<6>(0) = Lp.transpose() * ln;
  out.r.segment<6>(6) = Lv.transpose() * (ref.wd.to_vec() - twist_of(x));
  out.Jx.setZero();
  out.Jx.block<6, 8>(0, 0) = Lp.transpose() * Jl;
  out.Jx.block<6, 6>(6, 8) = -Lv.transpose();
  return out;
}

DefectLinearization dynamics_defect(const ocp::StateVec& x, const ocp::InputVec& u, const ocp::StateVec& x_next,
                                    const OcpConfig& cfg, const QuadrotorParams& params) {
  const auto lin = flat::dq_step(x, ocp::expand_input(u, params).to_vec(), params, cfg.dt());
  return {x_next - lin.y, lin.A, lin.B * input_expansion(params)};
}

ConstraintValues constraint_eval(const ocp::StateVec& x, const DualVector& u, const OcpConfig& cfg,
                                 const QuadrotorParams& params) {
  const Vec4 P = x.head<4>();
  const double n = P.norm();
  const ocp::InputVec uv = ocp::reduce_input(u, params);
  const ocp::InputVec lo = ocp::reduce_input(cfg.u_min, params);
  const ocp::InputVec hi = ocp::reduce_input(cfg.u_max, params);
  ConstraintValues c;
  c.g << n - 1.0, 1.0 - n, uv - hi, lo - uv;
  c.Jx.setZero();
  c.Jx.block<1, 4>(0, 0) = P.transpose() / n;
  c.Jx.block<1, 4>(1, 0) = -P.transpose() / n;
  c.Ju.setZero();
  c.Ju.block<4, 4>(2, 0).setIdentity();
  c.Ju.block<4, 4>(6, 0) = -Eigen::Matrix4d::Identity();
  return c;
}

DqModel::DqModel(QuadrotorParams params, OcpConfig cfg, Weights weights)
    : params_(std::move(params)), cfg_(std::move(cfg)), weights_(std::move(weights)) {
  params_.validate();
  cfg_.validate();
  Lp_ = cholesky_factor(weights_.Qp, "Qp");
  Lv_ = cholesky_factor(weights_.Qv, "Qv");
  Lr_ = cholesky_factor(weights_.R, "R");
  LpN_ = cholesky_factor(weights_.QpN, "QpN");
  LvN_ = cholesky_factor(weights_.QvN, "QvN");
  u_min_ = ocp::reduce_input(cfg_.u_min, params_);
  u_max_ = ocp::reduce_input(cfg_.u_max, params_);
  if (!((u_max_ - u_min_).minCoeff() > 0.0)) throw std::invalid_argument("ocp input bounds must satisfy u_min < u_max");
}

flat::Linearization<DqModel::nx, DqModel::nu> DqModel::step(const State& x, const Input& u) const {
  const auto M = input_expansion(params_);
  if (!cfg_.fd_jacobians) {
    const auto lin = flat::dq_step(x, ocp::expand_input(u, params_).to_vec(), params_, dt());
    return {lin.y, lin.A, lin.B * M};
  }
  const auto f = [&](const State& xx, const Input& uu) {
    return flat::dq_step(xx, ocp::expand_input(uu, params_).to_vec(), params_, dt()).y;
  };
  flat::Linearization<nx, nu> lin;
  lin.y = f(x, u);
  constexpr double h = 1e-6;
  for (int i = 0; i < nx; ++i) {
    State xp = x;
    State xm = x;
    xp[i] += h;
    xm[i] -= h;
    lin.A.col(i) = (f(xp, u) - f(xm, u)) / (2.0 * h);
  }
  for (int i = 0; i < nu; ++i) {
    Input up = u;
    Input um = u;
    up[i] += h;
    um[i] -= h;
    lin.B.col(i) = (f(x, up) - f(x, um)) / (2.0 * h);
  }
  return lin;
}

void DqModel::stage_residual(const State& x, const Input& u, const Ref& ref, Eigen::Matrix<double, nr, 1>& r,
                             Eigen::Matrix<double, nr, nx>* Jx, Eigen::Matrix<double, nr, nu>* Ju) const {
  const DualVector uf = ocp::expand_input(u, params_);
  const auto eval = [&](const State& xx, const DualVector& uu, Eigen::Matrix<double, 6, 8>* jl) {
    Eigen::Matrix<double, nr, 1> out;
    out.segment<6>(0) = Lp_.transpose() * pose_log_flat(xx, ref.qd, jl);
    out.segment<6>(6) = Lv_.transpose() * (ref.wd.to_vec() - twist_of(xx));
    out.segment<6>(12) = Lr_.transpose() * (ref.ud - uu).to_vec();
    return out;
  };
  if (Jx == nullptr && Ju == nullptr) {
    r = eval(x, uf, nullptr);
    return;
  }
  if (cfg_.fd_jacobians) {
    r = eval(x, uf, nullptr);
    constexpr double h = 1e-6;
    for (int i = 0; i < nx && Jx; ++i) {
      State xp = x;
      State xm = x;
      xp[i] += h;
      xm[i] -= h;
      Jx->col(i) = (eval(xp, uf, nullptr) - eval(xm, uf, nullptr)) / (2.0 * h);
    }
    for (int i = 0; i < nu && Ju; ++i) {
      Input up = u;
      Input um = u;
      up[i] += h;
      um[i] -= h;
      Ju->col(i) = (eval(x, ocp::expand_input(up, params_), nullptr) - eval(x, ocp::expand_input(um, params_), nullptr)) /
                   (2.0 * h);
    }
    return;
  }
  Eigen::Matrix<double, 6, 8> Jl;
  r = eval(x, uf, &Jl);
  if (Jx) {
    Jx->setZero();
    Jx->block<6, 8>(0, 0) = Lp_.transpose() * Jl;
    Jx->block<6, 6>(6, 8) = -Lv_.transpose();
  }
  if (Ju) {
    Ju->setZero();
    Ju->block<6, nu>(12, 0) = -Lr_.transpose() * input_expansion(params_);
  }
}

void DqModel::terminal_residual(const State& x, const Ref& ref, Eigen::Matrix<double, nr_terminal, 1>& r,
                                Eigen::Matrix<double, nr_terminal, nx>* Jx) const {
  const auto eval = [&](const State& xx, Eigen::Matrix<double, 6, 8>* jl) {
    Eigen::Matrix<double, nr_terminal, 1> out;
    out.segment<6>(0) = LpN_.transpose() * pose_log_flat(xx, ref.qd, jl);
    out.segment<6>(6) = LvN_.transpose() * (ref.wd.to_vec() - twist_of(xx));
    return out;
  };
  if (Jx == nullptr) {
    r = eval(x, nullptr);
    return;
  }
  if (cfg_.fd_jacobians) {
    r = eval(x, nullptr);
    constexpr double h = 1e-6;
    for (int i = 0; i < nx; ++i) {
      State xp = x;
      State xm = x;
      xp[i] += h;
      xm[i] -= h;
      Jx->col(i) = (eval(xp, nullptr) - eval(xm, nullptr)) / (2.0 * h);
    }
    return;
  }
  Eigen::Matrix<double, 6, 8> Jl;
  r = eval(x, &Jl);
  Jx->setZero();
  Jx->block<6, 8>(0, 0) = LpN_.transpose() * Jl;
  Jx->block<6, 6>(6, 8) = -LvN_.transpose();
}

double DqModel::norm_residual(const State& x, Eigen::Matrix<double, 1, nx>* grad) const {
  const Vec4 P = x.head<4>();
  const double n = P.norm();
  if (grad) {
    grad->setZero();
    grad->head<4>() = P.transpose() / n;
  }
  return n - 1.0;
}

DqModel::State DqModel::reference_state(const Ref& ref) const { return flat::pack(DqState{ref.qd, ref.wd}); }

DqModel::Input DqModel::reference_input(const Ref& ref) const { return ocp::reduce_input(ref.ud, params_); }

}  // namespace dqnmpc
