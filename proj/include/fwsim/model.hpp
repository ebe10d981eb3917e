#pragma once

#include <string>
#include <vector>

#include "fwsim/aero.hpp"
#include "fwsim/math.hpp"

namespace fwsim {

enum class FluidModelTag { Ellipsoid, InertiaBox, None };

/// Rigid ellipsoid body. The inertia tensor is about the CoM in the body
/// frame; semi-axes are aligned with the body frame axes.
struct BodyDesc {
  std::string name;
  double mass = 0.0;                    // kg
  Mat3 inertia = Mat3::Zero();          // kg m^2
  Vec3 com_offset = Vec3::Zero();       // m, CoM in the body frame
  Vec3 semi_axes = Vec3::Zero();        // m
  FluidModelTag fluid_model = FluidModelTag::None;
};

/// One revolute degree of freedom. A child body may be reached through
/// several joints in sequence (MuJoCo-style stacked hinges); `anchor` and
/// `axis` are expressed in the frame reached so far, i.e. the parent body
/// frame for the first joint of a child and the previous joint frame after
/// that.
struct JointDesc {
  std::string name;
  int parent = 0;                       // body index (0 is the floating base)
  int child = -1;
  Vec3 axis = Vec3::UnitX();            // unit vector
  Vec3 anchor = Vec3::Zero();           // m
  double pos_lower = -1.0;              // rad
  double pos_upper = 1.0;               // rad
  double vel_limit = 50.0;              // rad/s
  double damping = 1e-3;                // N m s/rad
  double torque_limit = 5.0;            // N m
  double armature = 0.0;                // kg m^2, gearmotor reflected inertia
};

/// Immutable description of the robot. bodies[0] is the floating base
/// (the main body); the four bodies and five joints mirror the platform
/// layout: left wing (flap + pitch), right wing (flap + pitch), tail pitch.
struct RobotModel {
  std::vector<BodyDesc> bodies;
  std::vector<JointDesc> joints;
  std::vector<FluidBodyParams> fluid_params;  // one per body
  FluidCoefficients coefficients;
  double total_wingspan = 0.0;          // m
  double mean_chord = 0.0;              // m
  bool fixed_base = false;              // test harness option (pendulum rigs)

  // Glide tuning block: pose the joints are locked at during the gliding
  // check, and the lift-to-drag ratio the coefficients were tuned to.
  VecX glide_pose;                      // rad, size nj
  double design_lift_to_drag = 0.0;

  const BodyDesc& base() const { return bodies.front(); }
  int num_bodies() const { return static_cast<int>(bodies.size()); }
  int num_joints() const { return static_cast<int>(joints.size()); }
  int num_dof() const { return (fixed_base ? 0 : 6) + num_joints(); }
};

/// Full kinematic state. `prev_acceleration` carries the last generalized
/// acceleration so the added-mass terms can be evaluated without giving the
/// force model its own state; it is part of the state on purpose so that
/// stepping stays a pure function.
struct SimState {
  Vec3 base_position = Vec3::Zero();           // m, world
  Quat base_orientation = Quat::Identity();    // world <- body
  Vec3 base_linear_velocity = Vec3::Zero();    // m/s, world
  Vec3 base_angular_velocity = Vec3::Zero();   // rad/s, body frame
  VecX joint_positions;                        // rad
  VecX joint_velocities;                       // rad/s
  double time = 0.0;                           // s
  VecX prev_acceleration;                      // generalized, zero at reset

  bool all_finite() const;
};

SimState make_initial_state(const RobotModel& model);

/// Generalized velocity [v_world(3), omega_body(3), qd_joints], or just the
/// joint block for a fixed-base model.
VecX generalized_velocity(const RobotModel& model, const SimState& state);

/// Euler-angle view of the base orientation (ZYX yaw-pitch-roll).
EulerZYX base_euler(const SimState& state);

/// Platform defaults: wingspan 0.995 m, mean chord 0.17 m, total mass
/// 0.31 kg split 70/10/10/10 across main body, wings and tail. All numbers
/// are exposed in the serialized config.
RobotModel build_default_model();

struct ValidationIssue {
  std::string field;
  std::string message;
};

/// Invariant report; empty means valid.
std::vector<ValidationIssue> validate_model(const RobotModel& model);

/// Key-value text serialization, bit-exact through a dump/load round trip.
std::string model_to_config(const RobotModel& model);
RobotModel model_from_config(const std::string& text);
void save_model_config(const RobotModel& model, const std::string& path);
RobotModel load_model_config(const std::string& path);

}  // namespace fwsim
