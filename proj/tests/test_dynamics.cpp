#include "dqnmpc/dynamics.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace dqnmpc;
using namespace dqnmpc::testing;

namespace {

ClassicalState random_state(std::mt19937_64& rng) {
  return {random_vec3(rng, 3.0), random_vec3(rng, 2.0), random_rotation(rng), random_vec3(rng, 2.0)};
}

WrenchInput random_input(std::mt19937_64& rng, const QuadrotorParams& p) {
  return {uniform(rng, 0.0, 2.0 * p.hover_thrust()), random_vec3(rng, 0.05)};
}

double geodesic(const UnitQuaternion& a, const UnitQuaternion& b) { return quat_log(a.conj() * b).norm(); }

}  // namespace

TEST_CASE("classical derivative") {
  const QuadrotorParams p;
  ClassicalState hover;
  const auto d = classical_derivative(hover, {p.hover_thrust(), Vec3::Zero()}, p);
  CHECK(d.p_dot.norm() == 0.0);
  CHECK(d.v_dot.norm() < 1e-15);
  CHECK(d.r_dot.norm() == 0.0);
  CHECK(d.w_dot.norm() == 0.0);
  const auto fall = classical_derivative(hover, {0.0, Vec3::Zero()}, p);
  CHECK((fall.v_dot - Vec3(0, 0, -9.81)).norm() == 0.0);

  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_state(rng);
    const auto u = random_input(rng, p);
    const auto dx = classical_derivative(x, u, p);
    const Vec3& w = x.w;
    const Vec3& J = p.inertia;
    // Euler's equations written out per axis.
    const Vec3 euler((u.tau.x() - (J.z() - J.y()) * w.y() * w.z()) / J.x(),
                     (u.tau.y() - (J.x() - J.z()) * w.z() * w.x()) / J.y(),
                     (u.tau.z() - (J.y() - J.x()) * w.x() * w.y()) / J.z());
    CHECK((dx.w_dot - euler).norm() < 1e-12);
  }
}

TEST_CASE("dual input mapping") {
  const QuadrotorParams p;
  const auto u = dual_input_from_wrench({p.hover_thrust(), Vec3::Zero()}, p);
  CHECK(u.prim.norm() == 0.0);
  CHECK((u.dual - Vec3(0, 0, 9.81)).norm() < 1e-15);
  const auto z = wrench_from_dual_input(DualVector::zero(), p);
  CHECK(z.f == 0.0);
  CHECK(z.tau.norm() == 0.0);
  std::mt19937_64 rng(22);
  for (int i = 0; i < 100; ++i) {
    const auto w = random_input(rng, p);
    const auto back = wrench_from_dual_input(dual_input_from_wrench(w, p), p);
    CHECK(std::abs(back.f - w.f) < 1e-12);
    CHECK((back.tau - w.tau).norm() < 1e-12);
  }
}

TEST_CASE("state conversion") {
  const auto id = to_dq_state(ClassicalState{});
  CHECK(id.q.dq() == DualQuaternion::identity());
  CHECK(id.twist.to_vec().norm() == 0.0);
  ClassicalState moving;
  moving.v = {1, 0, 0};
  CHECK((to_dq_state(moving).twist.dual - Vec3(1, 0, 0)).norm() == 0.0);
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_state(rng);
    const auto y = to_classical_state(to_dq_state(x));
    CHECK((y.p - x.p).norm() < 1e-12);
    CHECK((y.v - x.v).norm() < 1e-12);
    CHECK((y.w - x.w).norm() < 1e-12);
    CHECK((y.r.quat().coeffs() - x.r.quat().coeffs()).norm() < 1e-12);
  }
}

TEST_CASE("dual-quaternion derivative agrees with the classical model") {
  QuadrotorParams p;
  const auto hover = to_dq_state(ClassicalState{});
  const auto dh = dq_derivative(hover, dual_input_from_wrench({p.hover_thrust(), Vec3::Zero()}, p), p);
  CHECK(dh.q_dot.coeffs().norm() == 0.0);
  CHECK(dh.twist_dot.to_vec().norm() < 1e-15);

  std::mt19937_64 rng(24);
  {
    // Zero gravity and input: dual part of the twist rate is the commutator term.
    QuadrotorParams p0 = p;
    p0.gravity = 0.0;
    const auto x = to_dq_state(random_state(rng));
    const auto d = dq_derivative(x, DualVector::zero(), p0);
    const Quaternion vb = Quaternion::pure(x.twist.dual);
    const Quaternion w = Quaternion::pure(x.twist.prim);
    CHECK((d.twist_dot.dual - (0.5 * (vb * w - w * vb)).vec()).norm() < 1e-12);
  }
  for (int i = 0; i < 200; ++i) {
    p.drag_c = i % 2 == 0 ? 0.0 : 0.3;
    const auto xc = random_state(rng);
    const auto u = random_input(rng, p);
    const auto x = to_dq_state(xc);
    const auto d = dq_derivative(x, dual_input_from_wrench(u, p), p);
    const auto ref = classical_derivative(xc, u, p);
    const Quaternion P = x.q.primary();
    const Quaternion D = x.q.dual();
    const Vec3 p_dot = 2.0 * (d.q_dot.d * P.conj() + D * d.q_dot.p.conj()).vec();
    const Quaternion r = xc.r.quat();
    const Quaternion vb = Quaternion::pure(x.twist.dual);
    const Vec3 v_dot = (d.q_dot.p * vb * r.conj() + r * Quaternion::pure(d.twist_dot.dual) * r.conj() +
                        r * vb * d.q_dot.p.conj())
                           .vec();
    CHECK((p_dot - ref.p_dot).norm() < 1e-10);
    CHECK((d.q_dot.p.coeffs() - ref.r_dot.coeffs()).norm() < 1e-10);
    CHECK((v_dot - ref.v_dot).norm() < 1e-10);
    CHECK((d.twist_dot.prim - ref.w_dot).norm() < 1e-10);
  }
}

TEST_CASE("rk4") {
  const double y = rk4([](double x) { return x; }, 1.0, 0.1);
  CHECK(std::abs(y - std::exp(0.1)) < 1e-7);
  const QuadrotorParams p;
  ClassicalState x;
  x.p = {1, 2, 3};
  const auto still = rk4_step(x, {p.hover_thrust(), Vec3::Zero()}, p, 0.01);
  CHECK((still.p - x.p).norm() < 1e-14);

  std::mt19937_64 rng(25);
  for (int i = 0; i < 50; ++i) {
    const auto s = to_dq_state(random_state(rng));
    const auto n = rk4_step(s, dual_input_from_wrench(random_input(rng, p), p), p, 0.05);
    CHECK(std::abs(n.q.primary().norm() - 1.0) < 1e-9);
    CHECK(std::abs(n.q.primary().coeffs().dot(n.q.dual().coeffs())) < 1e-9);
  }
}

TEST_CASE("conservation laws") {
  QuadrotorParams p;
  p.gravity = 0.0;
  std::mt19937_64 rng(26);
  auto x = random_state(rng);
  const auto energy = [&](const ClassicalState& s) {
    return 0.5 * p.mass * s.v.squaredNorm() + 0.5 * s.w.dot(p.inertia.cwiseProduct(s.w));
  };
  const auto momentum = [&](const ClassicalState& s) {
    return rotate_to_world(s.r, p.inertia.cwiseProduct(s.w));
  };
  const double e0 = energy(x);
  const Vec3 h0 = momentum(x);
  for (int k = 0; k < 1000; ++k) x = rk4_step(x, {0.0, Vec3::Zero()}, p, 1e-3);
  CHECK(std::abs(energy(x) - e0) / e0 < 1e-6);
  CHECK((momentum(x) - h0).norm() / h0.norm() < 1e-6);
}

TEST_CASE("plant disturbances") {
  const QuadrotorParams p;
  std::mt19937_64 rng(27);
  const auto x = random_state(rng);
  const auto u = random_input(rng, p);
  const auto a = plant_step(x, u, p, DisturbanceConfig{}, 1e-3);
  const auto b = rk4_step(x, u, p, 1e-3);
  CHECK((a.p - b.p).norm() < 1e-12);
  CHECK((a.v - b.v).norm() < 1e-12);
  CHECK((a.w - b.w).norm() < 1e-12);

  const ClassicalState hover;
  const WrenchInput uh{p.hover_thrust(), Vec3::Zero()};
  DisturbanceConfig push;
  push.ext_force = {0, 0, 7.07};
  const auto up = plant_step(hover, uh, p, push, 1e-3);
  CHECK(std::abs(up.v.z() / 1e-3 - 7.07 / p.mass) < 1e-9);
  DisturbanceConfig heavy;
  heavy.mass_scale = 1.2;
  const auto down = plant_step(hover, uh, p, heavy, 1e-3);
  CHECK(std::abs(down.v.z() / 1e-3 + p.gravity * (1.0 - 1.0 / 1.2)) < 1e-9);
  DisturbanceConfig bad;
  bad.mass_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("representation equivalence over a rollout") {
  const QuadrotorParams p;
  std::mt19937_64 rng(28);
  for (int run = 0; run < 5; ++run) {
    ClassicalState xc;
    xc.p = random_vec3(rng, 2.0);
    xc.r = random_rotation(rng);
    DqState xd = to_dq_state(xc);
    for (int k = 0; k < 2000; ++k) {
      const WrenchInput u{p.hover_thrust() * (1.0 + 0.3 * std::sin(0.01 * k + run)),
                          Vec3(0.01 * std::cos(0.003 * k), -0.01 * std::sin(0.002 * k), 0.005)};
      xc = rk4_step(xc, u, p, 1e-3);
      xd = rk4_step(xd, dual_input_from_wrench(u, p), p, 1e-3);
    }
    const auto back = to_classical_state(xd);
    CHECK((back.p - xc.p).norm() < 1e-6);
    CHECK(geodesic(back.r, xc.r) < 1e-6);
  }
}

TEST_CASE("flat Jacobians match finite differences") {
  QuadrotorParams p;
  p.drag_c = 0.2;
  std::mt19937_64 rng(29);
  for (int i = 0; i < 20; ++i) {
    const auto xc = random_state(rng);
    const auto u = random_input(rng, p);
    const flat::DqVec xd = flat::pack(to_dq_state(xc));
    const flat::DqInput ud = dual_input_from_wrench(u, p).to_vec();
    const flat::ClassicalVec xv = flat::pack(xc);
    const flat::ClassicalInput uv = flat::pack(u);
    const Vec3 fe = random_vec3(rng);
    const Vec3 me = random_vec3(rng, 0.01);

    Eigen::Matrix<double, 14, 14> A;
    Eigen::Matrix<double, 14, 6> B;
    flat::dq_rhs(xd, ud, p, &A, &B);
    CHECK(jacobian_error(A, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::dq_rhs(z, ud, p);
          }, xd)) < 1e-7);
    CHECK(jacobian_error(B, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::dq_rhs(xd, z, p);
          }, ud)) < 1e-7);

    Eigen::Matrix<double, 13, 13> Ac;
    Eigen::Matrix<double, 13, 4> Bc;
    flat::classical_rhs(xv, uv, p, &Ac, &Bc, fe, me);
    CHECK(jacobian_error(Ac, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::classical_rhs(z, uv, p, nullptr, nullptr, fe, me);
          }, xv)) < 1e-7);
    CHECK(jacobian_error(Bc, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::classical_rhs(xv, z, p, nullptr, nullptr, fe, me);
          }, uv)) < 1e-7);

    const auto ld = flat::dq_step(xd, ud, p, 0.05);
    CHECK(jacobian_error(ld.A, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::dq_step(z, ud, p, 0.05).y;
          }, xd)) < 1e-6);
    CHECK(jacobian_error(ld.B, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::dq_step(xd, z, p, 0.05).y;
          }, ud)) < 1e-6);
    const auto lc = flat::classical_step(xv, uv, p, 0.05);
    CHECK(jacobian_error(lc.A, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::classical_step(z, uv, p, 0.05).y;
          }, xv)) < 1e-6);
    CHECK(jacobian_error(lc.B, numeric_jacobian([&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return flat::classical_step(xv, z, p, 0.05).y;
          }, uv)) < 1e-6);
  }
}
