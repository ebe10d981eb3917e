#include <cstring>

#include "doctest.h"
#include "fwsim/model.hpp"
#include "fwsim/training.hpp"

using namespace fwsim;

TEST_CASE("default model matches the platform description") {
  const RobotModel m = build_default_model();
  CHECK(m.num_bodies() == 4);
  CHECK(m.num_joints() == 5);
  CHECK(m.num_dof() == 11);
  CHECK(m.total_wingspan == doctest::Approx(0.995));
  CHECK(m.mean_chord == doctest::Approx(0.17));

  double mass = 0.0;
  for (const auto& b : m.bodies) mass += b.mass;
  CHECK(mass == doctest::Approx(0.31).epsilon(1e-12));

  // Wings plus body width reach the full span.
  const double span = 2.0 * m.bodies[1].semi_axes.y() * 2.0 + 2.0 * m.bodies[0].semi_axes.y();
  CHECK(span == doctest::Approx(0.995).epsilon(1e-12));
}

TEST_CASE("default model mirror symmetry across the x-z plane") {
  const RobotModel m = build_default_model();
  const auto& left = m.bodies[1];
  const auto& right = m.bodies[2];
  const Vec3 mirror(1.0, -1.0, 1.0);

  CHECK(left.mass == right.mass);
  CHECK((left.com_offset.cwiseProduct(mirror) - right.com_offset).norm() < 1e-15);
  CHECK((left.semi_axes - right.semi_axes).norm() < 1e-15);
  CHECK((left.inertia - right.inertia).norm() < 1e-15);  // diagonal inertia

  // Flap and pitch joints: anchors mirror as points, axes as axial vectors
  // (a -> -M a under the reflection M = diag(1,-1,1)).
  const auto& flap_l = m.joints[0];
  const auto& flap_r = m.joints[2];
  CHECK((flap_l.anchor.cwiseProduct(mirror) - flap_r.anchor).norm() < 1e-15);
  CHECK((-flap_l.axis.cwiseProduct(mirror) - flap_r.axis).norm() < 1e-15);
  const auto& pitch_l = m.joints[1];
  const auto& pitch_r = m.joints[3];
  CHECK((-pitch_l.axis.cwiseProduct(mirror) - pitch_r.axis).norm() < 1e-15);
  CHECK(flap_l.pos_lower == flap_r.pos_lower);
  CHECK(flap_l.pos_upper == flap_r.pos_upper);
}

TEST_CASE("validate_model accepts the default and rejects broken variants") {
  const RobotModel good = build_default_model();
  CHECK(validate_model(good).empty());

  RobotModel negative_mass = good;
  negative_mass.bodies[1].mass = -0.01;
  bool found_mass = false;
  for (const auto& issue : validate_model(negative_mass)) {
    if (issue.field.find("mass") != std::string::npos) found_mass = true;
  }
  CHECK(found_mass);

  RobotModel bad_axis = good;
  bad_axis.joints[0].axis = Vec3(1.0, 1.0, 0.0);
  bool found_axis = false;
  for (const auto& issue : validate_model(bad_axis)) {
    if (issue.field.find("axis") != std::string::npos) found_axis = true;
  }
  CHECK(found_axis);

  RobotModel bad_limits = good;
  bad_limits.joints[2].pos_lower = bad_limits.joints[2].pos_upper;
  CHECK(!validate_model(bad_limits).empty());

  RobotModel indefinite = good;
  indefinite.bodies[0].inertia(0, 0) = -1e-3;
  CHECK(!validate_model(indefinite).empty());
}

TEST_CASE("model config round trip is bit-exact, including randomized variants") {
  const RobotModel base = build_default_model();
  const RandomizedSetup setup = sample_randomization(base, RandomizationConfig{}, 1234);
  for (const RobotModel* m : {&base, &setup.model}) {
    const std::string text = model_to_config(*m);
    const RobotModel back = model_from_config(text);
    REQUIRE(back.num_bodies() == m->num_bodies());
    REQUIRE(back.num_joints() == m->num_joints());
    for (int i = 0; i < m->num_bodies(); ++i) {
      CHECK(std::memcmp(&back.bodies[i].mass, &m->bodies[i].mass, sizeof(double)) == 0);
      CHECK(back.bodies[i].inertia == m->bodies[i].inertia);
      CHECK(back.bodies[i].com_offset == m->bodies[i].com_offset);
      CHECK(back.bodies[i].semi_axes == m->bodies[i].semi_axes);
      CHECK(back.bodies[i].fluid_model == m->bodies[i].fluid_model);
      CHECK(back.fluid_params[i].added_mass == m->fluid_params[i].added_mass);
      CHECK(back.fluid_params[i].added_inertia == m->fluid_params[i].added_inertia);
      CHECK(back.fluid_params[i].moment_drag == m->fluid_params[i].moment_drag);
    }
    for (int j = 0; j < m->num_joints(); ++j) {
      CHECK(back.joints[j].axis == m->joints[j].axis);
      CHECK(back.joints[j].anchor == m->joints[j].anchor);
      CHECK(back.joints[j].damping == m->joints[j].damping);
      CHECK(back.joints[j].parent == m->joints[j].parent);
      CHECK(back.joints[j].child == m->joints[j].child);
    }
    CHECK(back.coefficients.c_kutta == m->coefficients.c_kutta);
    const std::string second = model_to_config(back);
    CHECK(second == text);
  }
}

TEST_CASE("generalized velocity layout") {
  const RobotModel m = build_default_model();
  SimState s = make_initial_state(m);
  s.base_linear_velocity = Vec3(1, 2, 3);
  s.base_angular_velocity = Vec3(4, 5, 6);
  s.joint_velocities << 7, 8, 9, 10, 11;
  const VecX v = generalized_velocity(m, s);
  REQUIRE(v.size() == 11);
  for (int i = 0; i < 11; ++i) CHECK(v(i) == doctest::Approx(i + 1.0));
}
