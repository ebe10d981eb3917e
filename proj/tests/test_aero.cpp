#include <cmath>

#include "doctest.h"
#include "fwsim/aero.hpp"
#include "fwsim/dynamics.hpp"

using namespace fwsim;

namespace {

/// Monte-Carlo silhouette estimate: fraction of rays parallel to the view
/// direction, launched through a bounding square, that hit the ellipsoid.
double silhouette_mc(const Vec3& semi, const Vec3& dir, int samples, Rng& rng) {
  const Vec3 u = dir.normalized();
  Vec3 e1 = u.cross(Vec3::UnitX());
  if (e1.norm() < 1e-6) e1 = u.cross(Vec3::UnitY());
  e1.normalize();
  const Vec3 e2 = u.cross(e1);
  const double r = semi.maxCoeff();
  const Mat3 scale = Vec3(1.0 / semi.x(), 1.0 / semi.y(), 1.0 / semi.z()).asDiagonal();
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    const double a = rng.uniform(-r, r);
    const double b = rng.uniform(-r, r);
    const Vec3 p = a * e1 + b * e2;
    // Ray p + t u hits the unit sphere after scaling.
    const Vec3 ps = scale * p;
    const Vec3 us = scale * u;
    const double qa = us.squaredNorm();
    const double qb = 2.0 * ps.dot(us);
    const double qc = ps.squaredNorm() - 1.0;
    if (qb * qb - 4.0 * qa * qc >= 0.0) ++hits;
  }
  return 4.0 * r * r * static_cast<double>(hits) / samples;
}

FluidBodyParams wing_params() {
  return make_fluid_params(Vec3(0.085, 0.22375, 0.00425), 1.225);
}

BodyAirKinematics kin_v(const Vec3& v, const Vec3& w = Vec3::Zero(),
                        const Vec3& vdot = Vec3::Zero(), const Vec3& wdot = Vec3::Zero()) {
  BodyAirKinematics k;
  k.velocity = v;
  k.omega = w;
  k.accel = vdot;
  k.omega_dot = wdot;
  return k;
}

}  // namespace

TEST_CASE("projected area closed forms") {
  CHECK(projected_area(Vec3(0.3, 0.3, 0.3), Vec3(0.2, -0.5, 0.8).normalized()) ==
        doctest::Approx(M_PI * 0.09).epsilon(1e-12));
  CHECK(projected_area(Vec3(0.2, 0.4, 0.1), Vec3::UnitZ()) ==
        doctest::Approx(M_PI * 0.2 * 0.4).epsilon(1e-12));
  CHECK(projected_area(Vec3(0.2, 0.4, 0.1), Vec3::UnitX()) ==
        doctest::Approx(M_PI * 0.4 * 0.1).epsilon(1e-12));
  CHECK_THROWS_AS(projected_area(Vec3(0.2, 0.4, 0.1), Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("projected area matches the Monte-Carlo silhouette oracle") {
  Rng rng(99);
  const Vec3 semi(0.085, 0.22375, 0.02);
  for (int trial = 0; trial < 4; ++trial) {
    Vec3 dir(rng.normal(), rng.normal(), rng.normal());
    dir.normalize();
    const double analytic = projected_area(semi, dir);
    const double mc = silhouette_mc(semi, dir, 400000, rng);
    CHECK(std::abs(mc - analytic) / analytic < 0.01);
  }
}

TEST_CASE("ellipsoid added mass reproduces classical limits") {
  // Sphere: added mass = rho V / 2 on every axis, zero added inertia.
  const double rho = 1.225;
  const Vec3 sphere(0.1, 0.1, 0.1);
  const Vec3 ma = ellipsoid_added_mass(sphere, rho);
  const double v = 4.0 / 3.0 * M_PI * 0.001;
  for (int i = 0; i < 3; ++i) CHECK(ma(i) == doctest::Approx(0.5 * rho * v).epsilon(1e-6));
  CHECK(ellipsoid_added_inertia(sphere, rho).norm() < 1e-12);

  // Thin circular disk of radius R: normal added mass -> (8/3) rho R^3.
  const double radius = 0.2;
  const Vec3 disk(radius, radius, radius * 1e-4);
  const Vec3 ma_disk = ellipsoid_added_mass(disk, rho);
  CHECK(ma_disk.z() == doctest::Approx(8.0 / 3.0 * rho * std::pow(radius, 3)).epsilon(0.01));
  // In-plane added mass of a flat plate vanishes.
  CHECK(ma_disk.x() < 0.01 * ma_disk.z());
}

TEST_CASE("zero kinematics produce a zero wrench") {
  const auto params = wing_params();
  const FluidCoefficients coeffs;
  const Environment env;
  const AeroTerms t = ellipsoid_wrench(kin_v(Vec3::Zero()), params, coeffs, env);
  const Wrench w = t.total();
  CHECK(w.force.norm() == 0.0);
  CHECK(w.torque.norm() == 0.0);
  const Wrench wb = inertia_box_wrench(kin_v(Vec3::Zero()), params, env).total();
  CHECK(wb.force.norm() == 0.0);
  CHECK(wb.torque.norm() == 0.0);
}

TEST_CASE("Magnus force vanishes when omega is parallel to v") {
  const auto params = wing_params();
  const FluidCoefficients coeffs;
  const Environment env;
  const Vec3 v(2.0, -1.0, 0.5);
  const AeroTerms t = ellipsoid_wrench(kin_v(v, 3.0 * v), params, coeffs, env);
  CHECK(t.f_magnus.norm() < 1e-14);
}

TEST_CASE("Kutta force vanishes for in-plane flow and for normal flow") {
  const auto params = wing_params();  // thin axis = z
  const FluidCoefficients coeffs;
  const Environment env;
  const AeroTerms in_plane =
      ellipsoid_wrench(kin_v(Vec3(3.0, -1.0, 0.0)), params, coeffs, env);
  CHECK(in_plane.f_kutta.norm() < 1e-14);
  const AeroTerms normal = ellipsoid_wrench(kin_v(Vec3(0.0, 0.0, 2.0)), params, coeffs, env);
  CHECK(normal.f_kutta.norm() < 1e-14);
}

TEST_CASE("drag quadruples and viscous force doubles when speed doubles") {
  const auto params = wing_params();
  const FluidCoefficients coeffs;
  const Environment env;
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const AeroTerms t1 = ellipsoid_wrench(kin_v(v), params, coeffs, env);
    const AeroTerms t2 = ellipsoid_wrench(kin_v(2.0 * v), params, coeffs, env);
    CHECK((t2.f_drag - 4.0 * t1.f_drag).norm() < 1e-12 * t2.f_drag.norm() + 1e-15);
    CHECK((t2.f_viscous - 2.0 * t1.f_viscous).norm() < 1e-12 * t2.f_viscous.norm() + 1e-15);
  }
}

TEST_CASE("viscous force matches the direct Stokes-form evaluation") {
  FluidBodyParams params = wing_params();
  params.viscous_radius = 0.1;
  Environment env;
  env.kinematic_viscosity = 1.5e-5;
  const AeroTerms t = ellipsoid_wrench(kin_v(Vec3(1.0, 0.0, 0.0)), params, FluidCoefficients{}, env);
  CHECK(t.f_viscous.x() == doctest::Approx(-6.0 * M_PI * 0.1 * 1.5e-5).epsilon(1e-12));
  CHECK(t.f_viscous.y() == 0.0);
  CHECK(t.f_viscous.z() == 0.0);
}

TEST_CASE("inertia-box wrench equals ellipsoid wrench with lift terms zeroed") {
  const auto params = wing_params();
  const Environment env;
  Rng rng(77);
  FluidCoefficients zeroed;
  zeroed.c_d_blunt = zeroed.c_d_slender = zeroed.c_d_angular = 0.0;
  zeroed.c_kutta = zeroed.c_magnus = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const BodyAirKinematics kin = kin_v(
        Vec3(rng.normal(), rng.normal(), rng.normal()), Vec3(rng.normal(), rng.normal(), rng.normal()),
        Vec3(rng.normal(), rng.normal(), rng.normal()), Vec3(rng.normal(), rng.normal(), rng.normal()));
    const Wrench box = inertia_box_wrench(kin, params, env).total();
    const Wrench ell = ellipsoid_wrench(kin, params, zeroed, env).total();
    CHECK((box.force - ell.force).norm() < 1e-14);
    CHECK((box.torque - ell.torque).norm() < 1e-14);
  }
}

TEST_CASE("steady translation leaves only the viscous force in the box model") {
  const auto params = wing_params();
  const Environment env;
  const Vec3 v(1.5, 0.3, -0.8);
  const AeroTerms t = inertia_box_wrench(kin_v(v), params, env);
  CHECK(t.f_added.norm() < 1e-14);
  CHECK((t.total().force - t.f_viscous).norm() < 1e-14);
}

TEST_CASE("drag and viscous terms are dissipative, lift terms orthogonal") {
  const auto params = wing_params();
  const FluidCoefficients coeffs;
  const Environment env;
  Rng rng(31);
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const Vec3 w(rng.normal(), rng.normal(), rng.normal());
    const AeroTerms t = ellipsoid_wrench(kin_v(3.0 * v, 3.0 * w), params, coeffs, env);
    CHECK(t.f_drag.dot(3.0 * v) <= 1e-15);
    CHECK(t.f_viscous.dot(3.0 * v) <= 1e-15);
    CHECK(t.tau_drag.dot(3.0 * w) <= 1e-15);
    CHECK(t.tau_viscous.dot(3.0 * w) <= 1e-15);
    // Magnus is perpendicular to both omega and v; Kutta does no work on v.
    const double fm_scale = std::max(t.f_magnus.norm(), 1e-30);
    CHECK(std::abs(t.f_magnus.dot(v)) / (fm_scale * std::max(v.norm(), 1e-30)) < 1e-12);
    CHECK(std::abs(t.f_magnus.dot(w)) / (fm_scale * std::max(w.norm(), 1e-30)) < 1e-12);
    const double fk_scale = std::max(t.f_kutta.norm(), 1e-30);
    CHECK(std::abs(t.f_kutta.dot(3.0 * v)) / (fk_scale * 3.0 * std::max(v.norm(), 1e-30)) < 1e-9);
  }
}

TEST_CASE("thin-wing Kutta lift behaves like a flat plate") {
  const auto params = wing_params();
  const FluidCoefficients coeffs;
  const Environment env;
  const double speed = 6.0;
  const double alpha = 8.0 * M_PI / 180.0;
  const Vec3 v(speed * std::cos(alpha), 0.0, speed * std::sin(alpha));
  const AeroTerms t = ellipsoid_wrench(kin_v(v), params, coeffs, env);
  // Lift is perpendicular to the flow, pointing against the plunge side.
  CHECK(t.f_kutta.z() < 0.0);
  CHECK(std::abs(t.f_kutta.dot(v)) < 1e-9 * t.f_kutta.norm() * v.norm());
  // Magnitude is exactly C_K sin(2 alpha) on dynamic pressure and plate area.
  const double plate_area = M_PI * params.semi_axes.x() * params.semi_axes.y();
  const double cl = t.f_kutta.norm() / (0.5 * env.fluid_density * speed * speed * plate_area);
  CHECK(cl == doctest::Approx(coeffs.c_kutta * std::sin(2.0 * alpha)).epsilon(1e-9));
}

TEST_CASE("frame covariance of the aero pipeline") {
  const RobotModel model = build_default_model();
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    SimState s = make_initial_state(model);
    s.base_orientation = quat_from_euler_zyx(
        {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-M_PI, M_PI)});
    s.base_linear_velocity = rng.uniform_vec(Vec3::Constant(-3.0), Vec3::Constant(3.0));
    s.base_angular_velocity = rng.uniform_vec(Vec3::Constant(-2.0), Vec3::Constant(2.0));
    for (int j = 0; j < 5; ++j) s.joint_positions(j) = rng.uniform(-0.4, 0.4);
    Environment env;
    env.wind_velocity = rng.uniform_vec(Vec3::Constant(-2.0), Vec3::Constant(2.0));

    const Quat rot = quat_from_euler_zyx(
        {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-M_PI, M_PI)});
    SimState sr = s;
    sr.base_position = rot * s.base_position;
    sr.base_orientation = rot * s.base_orientation;
    sr.base_linear_velocity = rot * s.base_linear_velocity;
    Environment env_r = env;
    env_r.wind_velocity = rot * env.wind_velocity;

    const auto w = compute_aero_wrenches(model, s, env);
    const auto wr = compute_aero_wrenches(model, sr, env_r);
    for (int i = 0; i < model.num_bodies(); ++i) {
      // Body-frame wrenches are invariant under a world-frame rotation.
      CHECK((w[i].force - wr[i].force).norm() < 1e-9);
      CHECK((w[i].torque - wr[i].torque).norm() < 1e-9);
    }
  }
}

TEST_CASE("generalized aero force: basics and power balance") {
  const RobotModel model = build_default_model();
  SimState s = make_initial_state(model);

  std::vector<Wrench> zero(4);
  CHECK(generalized_aero_force(model, s, zero).cwiseAbs().maxCoeff() == 0.0);
  std::vector<Wrench> three(3);
  CHECK_THROWS_AS(generalized_aero_force(model, s, three), std::invalid_argument);

  std::vector<Wrench> unit(4);
  unit[0].force = Vec3(0.0, 0.0, 1.0);
  const VecX u = generalized_aero_force(model, s, unit);
  CHECK(u(2) == doctest::Approx(1.0));
  CHECK(u(0) == doctest::Approx(0.0));
  CHECK(u(1) == doctest::Approx(0.0));
  CHECK(u.tail(5).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  // Base rotation rows pick up the moment of the force about the base
  // origin (the base CoM is offset from it).
  const Vec3 moment = model.base().com_offset.cross(Vec3(0.0, 0.0, 1.0));
  CHECK(u(4) == doctest::Approx(moment.y()));

  Rng rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    SimState sr = make_initial_state(model);
    sr.base_orientation = quat_from_euler_zyx(
        {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-M_PI, M_PI)});
    sr.base_linear_velocity = rng.uniform_vec(Vec3::Constant(-3.0), Vec3::Constant(3.0));
    sr.base_angular_velocity = rng.uniform_vec(Vec3::Constant(-2.0), Vec3::Constant(2.0));
    for (int j = 0; j < 5; ++j) {
      sr.joint_positions(j) = rng.uniform(-0.5, 0.5);
      sr.joint_velocities(j) = rng.uniform(-3.0, 3.0);
    }
    std::vector<Wrench> wrenches(4);
    for (auto& w : wrenches) {
      w.force = rng.uniform_vec(Vec3::Constant(-2.0), Vec3::Constant(2.0));
      w.torque = rng.uniform_vec(Vec3::Constant(-1.0), Vec3::Constant(1.0));
    }
    const VecX u_gen = generalized_aero_force(model, sr, wrenches);
    const VecX qd = generalized_velocity(model, sr);
    const KinematicsCache cache = compute_kinematics(model, sr);
    double cart_power = 0.0;
    for (int i = 0; i < 4; ++i) {
      const VecX twist = body_jacobian(model, cache, i) * qd;
      const Mat3& rot = cache.body[i].rotation;
      cart_power += (rot * wrenches[i].force).dot(twist.segment<3>(0)) +
                    (rot * wrenches[i].torque).dot(twist.segment<3>(3));
    }
    const double gen_power = u_gen.dot(qd);
    const double scale = std::max({std::abs(cart_power), std::abs(gen_power), 1.0});
    CHECK(std::abs(cart_power - gen_power) / scale < 1e-10);
  }
}
