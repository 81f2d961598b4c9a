#include "dqnmpc/reference.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace dqnmpc;
using namespace dqnmpc::testing;

namespace {

std::vector<TrajectorySpec> sample_specs() {
  std::vector<TrajectorySpec> specs;
  specs.push_back(make_hover({1, 2, 3}, 10.0, 0.4));
  specs.push_back(make_circle({0, 0, 2}, 1.5, 1.2, 10.0));
  specs.push_back(calibrate_max_speed(make_lissajous({0, 0, 2}, {2.0, 1.5, 0.3}, 1.0, 10.0), 4.68));
  auto tangent = make_circle({0, 0, 1}, 2.0, 0.8, 10.0);
  tangent.yaw_mode = YawMode::tangent;
  specs.push_back(tangent);
  return specs;
}

}  // namespace

TEST_CASE("hover flat output is constant") {
  const auto s = make_hover({1, -2, 3}, 5.0, 0.7);
  for (double t : {0.0, 1.3, 5.0}) {
    const auto f = eval_flat(s, t);
    CHECK((f.p - Vec3(1, -2, 3)).norm() == 0.0);
    CHECK(f.v.norm() == 0.0);
    CHECK(f.a.norm() == 0.0);
    CHECK(f.j.norm() == 0.0);
    CHECK(f.yaw == 0.7);
  }
  CHECK_THROWS_AS(eval_flat(s, -1e-9), OutOfWindow);
  CHECK_THROWS_AS(eval_flat(s, 5.0 + 1e-9), OutOfWindow);
}

TEST_CASE("circle kinematics at t = 0") {
  const auto s = make_circle({0, 0, 1}, 1.0, 1.0, 10.0);
  const auto f = eval_flat(s, 0.0);
  CHECK(f.v.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.a.norm() == doctest::Approx(1.0).epsilon(1e-14));
  const Vec3 to_center = (s.center - f.p).normalized();
  CHECK(f.a.normalized().dot(to_center) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lissajous calibrated to 4.68 m/s") {
  const auto s = calibrate_max_speed(make_lissajous({0, 0, 2}, {2.0, 1.5, 0.3}, 1.0, 20.0), 4.68);
  double vmax = 0.0;
  for (int k = 0; k <= 200000; ++k) vmax = std::max(vmax, eval_flat(s, 20.0 * k / 200000.0).v.norm());
  CHECK(vmax >= 4.63);
  CHECK(vmax <= 4.68 + 1e-9);
  CHECK(std::abs(s.max_speed() - vmax) / vmax < 0.01);
}

TEST_CASE("flat derivatives match finite differences") {
  const double h = 1e-4;
  for (const auto& s : sample_specs()) {
    for (double t = 0.5; t < 9.5; t += 0.77) {
      const auto f = eval_flat(s, t);
      const auto fp = eval_flat(s, t + h);
      const auto fm = eval_flat(s, t - h);
      const auto rel = [](const Vec3& a, const Vec3& b) { return (a - b).norm() / std::max(1.0, b.norm()); };
      CHECK(rel((fp.p - fm.p) / (2 * h), f.v) < 1e-5);
      CHECK(rel((fp.v - fm.v) / (2 * h), f.a) < 1e-5);
      CHECK(rel((fp.a - fm.a) / (2 * h), f.j) < 1e-5);
      CHECK(std::abs((fp.yaw - fm.yaw) / (2 * h) - f.yaw_rate) < 1e-5 * std::max(1.0, std::abs(f.yaw_rate)));
    }
  }
}

TEST_CASE("flatness at equilibrium and under vertical acceleration") {
  const QuadrotorParams p;
  FlatOutput f;
  f.p = {1, 2, 3};
  f.yaw = 0.6;
  const auto c = flat_to_classical(f, p);
  const auto yaw_only = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), 0.6);
  CHECK(quat_log(c.x.r.conj() * yaw_only).norm() < 1e-14);
  CHECK(c.u.f == doctest::Approx(p.mass * p.gravity));
  CHECK(c.x.w.norm() < 1e-14);
  CHECK(c.u.tau.norm() == 0.0);

  f.a = {0, 0, p.gravity};
  const auto up = flat_to_classical(f, p);
  CHECK(up.u.f == doctest::Approx(2.0 * p.mass * p.gravity));
  CHECK(quat_log(up.x.r.conj() * yaw_only).norm() < 1e-14);

  f.a = {0, 0, -p.gravity};
  CHECK_THROWS_AS(flat_to_reference(f, p), SingularReference);
}

TEST_CASE("yaw mode changes attitude but not thrust") {
  const QuadrotorParams p;
  auto fixed = make_circle({0, 0, 1}, 2.0, 0.8, 10.0);
  auto tangent = fixed;
  tangent.yaw_mode = YawMode::tangent;
  for (double t = 0.1; t < 10.0; t += 0.9) {
    const auto a = flat_to_classical(eval_flat(fixed, t), p);
    const auto b = flat_to_classical(eval_flat(tangent, t), p);
    CHECK(a.u.f == doctest::Approx(b.u.f).epsilon(1e-14));
    CHECK(quat_log(a.x.r.conj() * b.x.r).norm() > 1e-3);
    // Body z axes coincide.
    CHECK((rotate_to_world(a.x.r, Vec3::UnitZ()) - rotate_to_world(b.x.r, Vec3::UnitZ())).norm() < 1e-12);
  }
}

TEST_CASE("reference pose is kinematically consistent with the dual twist") {
  const QuadrotorParams p;
  for (const auto& s : sample_specs()) {
    for (double dt : {1e-3, 5e-4}) {
      double worst = 0.0;
      for (double t = 0.2; t < 9.5; t += 0.61) {
        const auto r0 = flat_to_reference(eval_flat(s, t), p);
        const auto rp = flat_to_reference(eval_flat(s, t + dt), p);
        const auto rm = flat_to_reference(eval_flat(s, t - dt), p);
        // Consistent sign for the finite difference.
        const auto align = [&](const UnitDualQuaternion& q) {
          return q.primary().coeffs().dot(r0.qd.primary().coeffs()) < 0 ? -1.0 * q.dq() : q.dq();
        };
        const DualQuaternion fd = 0.5 / dt * (align(rp.qd) - align(rm.qd));
        const DualQuaternion model = 0.5 * (r0.qd.dq() * r0.wd.as_dual_quaternion());
        worst = std::max(worst, (fd.coeffs() - model.coeffs()).norm());
      }
      // Central differences: O(dt^2) error.
      CHECK(worst < 200.0 * dt * dt);
    }
  }
}

TEST_CASE("open-loop replay of the reference thrust along the reference attitude tracks the position") {
  const QuadrotorParams p;
  for (const auto& s : sample_specs()) {
    const double dt = 1e-3;
    Vec3 pos = eval_flat(s, 0.0).p;
    Vec3 vel = eval_flat(s, 0.0).v;
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const auto ref = flat_to_reference(eval_flat(s, k * dt), p);
      const UnitQuaternion r = ref.qd.rotation();
      DqState x{dq_from_pose(pos, r), {ref.wd.prim, rotate_to_body(r, vel)}};
      x = rk4_step(x, ref.ud, p, dt);
      pos = x.q.translation();
      vel = rotate_to_world(x.q.rotation(), x.twist.dual);
      worst = std::max(worst, (pos - eval_flat(s, (k + 1) * dt).p).norm());
    }
    CHECK(worst < 0.05);
  }
}

TEST_CASE("classical and dual-quaternion references agree") {
  const QuadrotorParams p;
  const auto s = sample_specs()[2];
  for (double t = 0.0; t < 10.0; t += 1.1) {
    const auto f = eval_flat(s, t);
    const auto c = flat_to_classical(f, p);
    const auto d = flat_to_reference(f, p);
    CHECK((d.qd.translation() - f.p).norm() < 1e-12);
    CHECK(quat_log(d.qd.rotation().conj() * c.x.r).norm() < 1e-12);
    CHECK((rotate_to_world(c.x.r, d.wd.dual) - f.v).norm() < 1e-12);
    CHECK((d.wd.prim - c.x.w).norm() < 1e-12);
  }
}

TEST_CASE("trajectory validation and enum names") {
  auto s = make_circle({0, 0, 1}, 1.0, 1.0, 10.0);
  CHECK_NOTHROW(s.validate());
  s.duration = -1.0;
  CHECK_THROWS(s.validate());
  CHECK(trajectory_kind_from_string(to_string(TrajectoryKind::lissajous)) == TrajectoryKind::lissajous);
  CHECK(yaw_mode_from_string("tangent") == YawMode::tangent);
  CHECK_THROWS(trajectory_kind_from_string("spiral"));
}
