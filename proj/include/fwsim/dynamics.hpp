#pragma once

#include <stdexcept>
#include <vector>

#include "fwsim/model.hpp"

namespace fwsim {

/// Thrown by step() when the integrated state stops being finite; episode
/// runners convert it into a terminal.
struct PhysicsBlowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// World-frame kinematics of one body, with the bias ("zero generalized
/// acceleration") terms needed for the Newton-Euler sweep.
struct BodyKinematics {
  Mat3 rotation = Mat3::Identity();     // body -> world
  Vec3 origin = Vec3::Zero();           // frame origin, world
  Vec3 com = Vec3::Zero();              // CoM, world
  Vec3 com_velocity = Vec3::Zero();     // m/s, world
  Vec3 omega = Vec3::Zero();            // rad/s, world
  Vec3 com_accel_bias = Vec3::Zero();   // m/s^2 at qdd = 0
  Vec3 omega_dot_bias = Vec3::Zero();   // rad/s^2 at qdd = 0
};

struct KinematicsCache {
  std::vector<BodyKinematics> body;
  std::vector<Vec3> joint_axis_world;
  std::vector<Vec3> joint_origin_world;
  std::vector<std::vector<int>> paths;  // contributing joints per body
};

KinematicsCache compute_kinematics(const RobotModel& model, const SimState& state);

/// 6 x ndof geometric Jacobian of a body's CoM: rows 0-2 map generalized
/// velocity to the world-frame CoM linear velocity, rows 3-5 to the
/// world-frame angular velocity. Throws std::out_of_range on a bad body id.
MatX body_jacobian(const RobotModel& model, const SimState& state, int body_id);
MatX body_jacobian(const RobotModel& model, const KinematicsCache& cache, int body_id);

/// Joint-space mass matrix M(q), symmetric positive definite.
MatX mass_matrix(const RobotModel& model, const SimState& state);

/// C(q,qd) qd + G(q). At zero velocity this is exactly the gravity vector.
VecX bias_forces(const RobotModel& model, const SimState& state, const Vec3& gravity);

/// Commanded torques clamped to the limits, minus viscous joint damping,
/// padded with the unactuated base block. This is the right-hand side
/// applied-force convention used by forward_dynamics and the tests.
VecX generalized_applied_force(const RobotModel& model, const SimState& state,
                               const VecX& joint_torques);

/// Solves M qdd = applied + u_aero - bias. Throws std::runtime_error on a
/// singular mass matrix.
VecX forward_dynamics(const RobotModel& model, const SimState& state, const VecX& joint_torques,
                      const VecX& generalized_aero, const Vec3& gravity);

struct SimOptions {
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  bool aero_enabled = true;
  bool lock_joints = false;  // freeze joint coordinates (glide checks)
};

/// One semi-implicit Euler step at dt (1/250 s by default): velocities
/// first, then positions from the new velocities; quaternion renormalized;
/// aero wrenches evaluated on the pre-step state. Joint damping is folded
/// into the velocity solve implicitly so stiff damping settings cannot
/// destabilize the integrator. Throws PhysicsBlowup on non-finite results.
SimState step(const RobotModel& model, const SimState& state, const VecX& joint_torques,
              const Environment& env, double dt, const SimOptions& options = {});

}  // namespace fwsim
