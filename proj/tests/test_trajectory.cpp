#include <cmath>

#include "doctest.h"
#include "fwsim/trajectory.hpp"

using namespace fwsim;

TEST_CASE("single forward command integrates to the exact length") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.8, 0.0, 0.0, 3.0});
  const Trajectory traj = generate(spec, 0.02);
  REQUIRE(traj.size() == 151);
  const Vec3 delta = traj.positions().back() - traj.positions().front();
  CHECK(delta.norm() == doctest::Approx(11.4).epsilon(1e-12));
  CHECK(delta.x() == doctest::Approx(11.4));
  CHECK(delta.y() == doctest::Approx(0.0));
}

TEST_CASE("turn command traces a circle of radius v over omega") {
  TrajectorySpec spec;
  const double v = 4.0, omega = 0.5;
  spec.segments.emplace_back(Command{v, 0.0, omega, 6.0});
  const Trajectory traj = generate(spec, 0.02);
  // Center of the arc is at radius v/omega to the left of the start.
  const Vec3 center(0.0, v / omega, 0.0);
  for (const Vec3& p : traj.positions()) {
    CHECK((p - center).norm() == doctest::Approx(v / omega).epsilon(1e-9));
    CHECK(p.z() == 0.0);
  }
}

TEST_CASE("climbing turn composes as a helix") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{4.0, 0.7, 0.5, 6.0});
  const Trajectory traj = generate(spec, 0.02);
  const Vec3 center(0.0, 8.0, 0.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vec3 p = traj.positions()[k];
    CHECK(std::hypot(p.x() - center.x(), p.y() - center.y()) ==
          doctest::Approx(8.0).epsilon(1e-9));
    CHECK(p.z() == doctest::Approx(0.7 * 0.02 * static_cast<double>(k)).epsilon(1e-9));
  }
}

TEST_CASE("loop primitive closes on itself") {
  TrajectorySpec spec;
  // Duration 2*pi*r/v = 4 s exactly, so the last sample is the closure point.
  spec.segments.emplace_back(LoopPrimitive{2.0, M_PI, 0.0, LoopKind::Full});
  const Trajectory traj = generate(spec, 0.02);
  REQUIRE(traj.size() == 201);
  CHECK((traj.positions().back() - traj.positions().front()).norm() < 1e-9);
  // Top of the loop is 2 r up.
  double zmax = 0.0;
  for (const auto& p : traj.positions()) zmax = std::max(zmax, p.z());
  CHECK(zmax == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("immelmann reverses the subsequent heading") {
  TrajectorySpec spec;
  spec.segments.emplace_back(LoopPrimitive{2.0, M_PI, 0.0, LoopKind::HalfImmelmann});
  spec.segments.emplace_back(Command{2.0, 0.0, 0.0, 1.0});
  const Trajectory traj = generate(spec, 0.02);
  // Half loop ends 2r above the start; the following segment runs in -x.
  const Vec3 apex = traj.position_at(2.0);
  CHECK(apex.z() == doctest::Approx(4.0).epsilon(1e-9));
  const Vec3 after = traj.position_at(2.5);
  CHECK(after.x() < apex.x() - 0.9);
  CHECK(after.z() == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("command concatenation keeps duration and continuity") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.0, 0.5, 0.2, 3.0});
  spec.segments.emplace_back(Command{5.0, -0.5, -0.4, 3.0});
  spec.segments.emplace_back(Command{4.0, 0.0, 0.0, 3.0});
  const Trajectory traj = generate(spec, 0.02);
  CHECK(traj.duration() == doctest::Approx(9.0).epsilon(0.01));
  // C0 continuity: no jump larger than speed*dt anywhere.
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK((traj.positions()[k] - traj.positions()[k - 1]).norm() < 5.5 * 0.02);
  }
}

TEST_CASE("linear segment sample spacing equals speed times dt") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.8, 0.0, 0.0, 3.0});
  const Trajectory traj = generate(spec, 0.02);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double spacing = (traj.positions()[k] - traj.positions()[k - 1]).norm();
    CHECK(std::abs(spacing - 3.8 * 0.02) < 1e-9);
  }
}

TEST_CASE("generate rejects bad specs") {
  CHECK_THROWS_AS(generate(TrajectorySpec{}), std::invalid_argument);
  TrajectorySpec bad;
  bad.segments.emplace_back(Command{-1.0, 0.0, 0.0, 3.0});
  CHECK_THROWS_AS(generate(bad), std::invalid_argument);
  TrajectorySpec zero_dur;
  zero_dur.segments.emplace_back(Command{1.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(generate(zero_dur), std::invalid_argument);
}

TEST_CASE("lookahead window on a straight path") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.0, 0.0, 0.0, 10.0});
  const Trajectory traj = generate(spec, 0.02);

  RobotModel model = build_default_model();
  SimState s = make_initial_state(model);
  const double t = 2.0;
  s.base_position = traj.position_at(t);

  const auto points = lookahead_window(traj, t, s);
  REQUIRE(points.size() == 30);
  for (int k = 1; k <= 30; ++k) {
    const Vec3& p = points[static_cast<std::size_t>(k - 1)];
    CHECK(p.x() == doctest::Approx(3.0 * 0.02 * k).epsilon(1e-9));
    CHECK(std::abs(p.y()) < 1e-12);
    CHECK(std::abs(p.z()) < 1e-12);
  }

  // Yawed 90 degrees: the same world offsets appear rotated into the body.
  SimState yawed = s;
  yawed.base_orientation = quat_from_euler_zyx({0.0, 0.0, M_PI / 2});
  const auto rotated = lookahead_window(traj, t, yawed);
  for (int k = 0; k < 30; ++k) {
    CHECK(rotated[static_cast<std::size_t>(k)].y() ==
          doctest::Approx(-points[static_cast<std::size_t>(k)].x()).epsilon(1e-9));
  }
}

TEST_CASE("lookahead holds the final point past the end") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{3.0, 0.0, 0.0, 1.0});
  const Trajectory traj = generate(spec, 0.02);
  RobotModel model = build_default_model();
  SimState s = make_initial_state(model);
  s.base_position = Vec3(1.0, 2.0, 3.0);
  const auto points = lookahead_window(traj, traj.duration(), s);
  const Vec3 expected = traj.positions().back() - s.base_position;
  for (const auto& p : points) CHECK((p - expected).norm() < 1e-12);
}

TEST_CASE("lookahead is invariant to simultaneous world translation") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{4.0, 0.3, 0.2, 6.0});
  const Vec3 shift(12.0, -7.0, 3.0);
  TrajectorySpec moved = spec;
  moved.start_position += shift;
  const Trajectory a = generate(spec, 0.02);
  const Trajectory b = generate(moved, 0.02);
  RobotModel model = build_default_model();
  SimState s = make_initial_state(model);
  s.base_position = Vec3(0.5, 0.2, -0.1);
  s.base_orientation = quat_from_euler_zyx({0.1, -0.2, 0.7});
  SimState s2 = s;
  s2.base_position += shift;
  const auto pa = lookahead_window(a, 1.5, s);
  const auto pb = lookahead_window(b, 1.5, s2);
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK((pa[k] - pb[k]).norm() < 1e-9);
}

TEST_CASE("trajectory spec config round trip") {
  TrajectorySpec spec;
  spec.start_position = Vec3(1.0, -2.0, 0.5);
  spec.start_heading = 0.3;
  spec.segments.emplace_back(Command{3.8, -0.4, 0.25, 3.0});
  spec.segments.emplace_back(LoopPrimitive{2.5, 4.0, 0.1, LoopKind::HalfImmelmann});
  spec.segments.emplace_back(Command{5.0, 0.0, 0.0, 3.0});
  const std::string text = trajectory_spec_to_config(spec);
  const TrajectorySpec back = trajectory_spec_from_config(text);
  const Trajectory ta = generate(spec, 0.02);
  const Trajectory tb = generate(back, 0.02);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t k = 0; k < ta.size(); ++k) {
    CHECK((ta.positions()[k] - tb.positions()[k]).norm() == 0.0);
  }
}

TEST_CASE("trajectory csv export") {
  TrajectorySpec spec;
  spec.segments.emplace_back(Command{1.0, 0.0, 0.0, 0.1});
  const std::string csv = trajectory_to_csv(generate(spec, 0.02));
  CHECK(csv.rfind("t_s,x_m,y_m,z_m\n", 0) == 0);
  CHECK(csv.find("0.02") != std::string::npos);
}
