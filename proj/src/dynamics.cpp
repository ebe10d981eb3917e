#include "fwsim/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "fwsim/aero.hpp"

namespace fwsim {

namespace {

/// Joints contributing to each body's motion: the body's own joint chain
/// plus everything on the path to the base. Bodies must be listed so that
/// parents precede children.
std::vector<std::vector<int>> joint_paths(const RobotModel& model) {
  std::vector<std::vector<int>> paths(model.num_bodies());
  for (int body = 1; body < model.num_bodies(); ++body) {
    int parent = -1;
    for (int j = 0; j < model.num_joints(); ++j) {
      if (model.joints[j].child == body) {
        parent = model.joints[j].parent;
        break;
      }
    }
    if (parent >= 0 && parent < body) paths[body] = paths[parent];
    for (int j = 0; j < model.num_joints(); ++j) {
      if (model.joints[j].child == body) paths[body].push_back(j);
    }
  }
  return paths;
}

}  // namespace

KinematicsCache compute_kinematics(const RobotModel& model, const SimState& state) {
  KinematicsCache cache;
  cache.body.resize(model.num_bodies());
  cache.joint_axis_world.assign(model.num_joints(), Vec3::Zero());
  cache.joint_origin_world.assign(model.num_joints(), Vec3::Zero());
  cache.paths = joint_paths(model);

  // Base frame. For a fixed base the pose is kept but the motion is zeroed.
  BodyKinematics base;
  base.rotation = state.base_orientation.normalized().toRotationMatrix();
  base.origin = state.base_position;
  if (!model.fixed_base) {
    base.omega = base.rotation * state.base_angular_velocity;
    base.com_velocity = state.base_linear_velocity;  // origin velocity for now
  }

  struct FrameMotion {
    Mat3 rot;
    Vec3 origin, v_origin, omega, a_origin, omega_dot;
  };

  std::vector<FrameMotion> body_frame(model.num_bodies());
  body_frame[0] = {base.rotation, base.origin, base.com_velocity, base.omega,
                   Vec3::Zero(),  Vec3::Zero()};

  for (int body = 1; body < model.num_bodies(); ++body) {
    // Find the parent through the body's first joint.
    int parent = 0;
    for (int j = 0; j < model.num_joints(); ++j) {
      if (model.joints[j].child == body) {
        parent = model.joints[j].parent;
        break;
      }
    }
    FrameMotion f = body_frame[parent];
    for (int j = 0; j < model.num_joints(); ++j) {
      const auto& joint = model.joints[j];
      if (joint.child != body) continue;
      // Translate to the joint anchor.
      const Vec3 r = f.rot * joint.anchor;
      f.origin += r;
      f.v_origin += f.omega.cross(r);
      f.a_origin += f.omega_dot.cross(r) + f.omega.cross(f.omega.cross(r));
      // Rotate about the joint axis (fixed in the pre-rotation frame).
      const Vec3 axis_w = f.rot * joint.axis;
      cache.joint_axis_world[j] = axis_w;
      cache.joint_origin_world[j] = f.origin;
      const double qd = state.joint_velocities(j);
      f.omega_dot += f.omega.cross(qd * axis_w);  // qdd = 0 bias term
      f.omega += qd * axis_w;
      f.rot = f.rot * Eigen::AngleAxisd(state.joint_positions(j), joint.axis).toRotationMatrix();
    }
    body_frame[body] = f;
  }

  for (int body = 0; body < model.num_bodies(); ++body) {
    const FrameMotion& f = body_frame[body];
    BodyKinematics bk;
    bk.rotation = f.rot;
    bk.origin = f.origin;
    const Vec3 rc = f.rot * model.bodies[body].com_offset;
    bk.com = f.origin + rc;
    bk.com_velocity = f.v_origin + f.omega.cross(rc);
    bk.omega = f.omega;
    bk.com_accel_bias = f.a_origin + f.omega_dot.cross(rc) + f.omega.cross(f.omega.cross(rc));
    bk.omega_dot_bias = f.omega_dot;
    cache.body[body] = bk;
  }
  return cache;
}

MatX body_jacobian(const RobotModel& model, const KinematicsCache& cache, int body_id) {
  if (body_id < 0 || body_id >= model.num_bodies()) {
    throw std::out_of_range("body_jacobian: invalid body id");
  }
  const int n = model.num_dof();
  const int base_cols = model.fixed_base ? 0 : 6;
  MatX jac = MatX::Zero(6, n);
  const Vec3 com = cache.body[body_id].com;

  if (!model.fixed_base) {
    jac.block<3, 3>(0, 0) = Mat3::Identity();
    const Mat3& rot0 = cache.body[0].rotation;
    const Vec3 rel = com - cache.body[0].origin;
    for (int k = 0; k < 3; ++k) {
      const Vec3 axis = rot0.col(k);  // body-frame angular velocity coordinates
      jac.block<3, 1>(0, 3 + k) = axis.cross(rel);
      jac.block<3, 1>(3, 3 + k) = axis;
    }
  }

  for (const int j : cache.paths[body_id]) {
    const Vec3& axis = cache.joint_axis_world[j];
    jac.block<3, 1>(0, base_cols + j) = axis.cross(com - cache.joint_origin_world[j]);
    jac.block<3, 1>(3, base_cols + j) = axis;
  }
  return jac;
}

MatX body_jacobian(const RobotModel& model, const SimState& state, int body_id) {
  return body_jacobian(model, compute_kinematics(model, state), body_id);
}

MatX mass_matrix(const RobotModel& model, const SimState& state) {
  const KinematicsCache cache = compute_kinematics(model, state);
  const int n = model.num_dof();
  const int base_cols = model.fixed_base ? 0 : 6;
  MatX m = MatX::Zero(n, n);
  for (int i = 0; i < model.num_bodies(); ++i) {
    const auto& body = model.bodies[i];
    const MatX jac = body_jacobian(model, cache, i);
    const Mat3 inertia_w =
        cache.body[i].rotation * body.inertia * cache.body[i].rotation.transpose();
    m.noalias() += body.mass * jac.topRows<3>().transpose() * jac.topRows<3>();
    m.noalias() += jac.bottomRows<3>().transpose() * inertia_w * jac.bottomRows<3>();
  }
  // Gearmotor rotor inertia reflected onto the joint coordinate.
  for (int j = 0; j < model.num_joints(); ++j) {
    m(base_cols + j, base_cols + j) += model.joints[j].armature;
  }
  return m;
}

VecX bias_forces(const RobotModel& model, const SimState& state, const Vec3& gravity) {
  const KinematicsCache cache = compute_kinematics(model, state);
  const int n = model.num_dof();
  VecX bias = VecX::Zero(n);
  for (int i = 0; i < model.num_bodies(); ++i) {
    const auto& body = model.bodies[i];
    const auto& bk = cache.body[i];
    const Mat3 inertia_w = bk.rotation * body.inertia * bk.rotation.transpose();
    VecX f6(6);
    f6.segment<3>(0) = body.mass * (bk.com_accel_bias - gravity);
    f6.segment<3>(3) = inertia_w * bk.omega_dot_bias + bk.omega.cross(inertia_w * bk.omega);
    bias.noalias() += body_jacobian(model, cache, i).transpose() * f6;
  }
  return bias;
}

VecX generalized_applied_force(const RobotModel& model, const SimState& state,
                               const VecX& joint_torques) {
  if (joint_torques.size() != model.num_joints()) {
    throw std::invalid_argument("generalized_applied_force: torque size mismatch");
  }
  const int base_cols = model.fixed_base ? 0 : 6;
  VecX f = VecX::Zero(model.num_dof());
  for (int j = 0; j < model.num_joints(); ++j) {
    const auto& joint = model.joints[j];
    const double tau = std::clamp(joint_torques(j), -joint.torque_limit, joint.torque_limit);
    f(base_cols + j) = tau - joint.damping * state.joint_velocities(j);
  }
  return f;
}

VecX forward_dynamics(const RobotModel& model, const SimState& state, const VecX& joint_torques,
                      const VecX& generalized_aero, const Vec3& gravity) {
  const int n = model.num_dof();
  const MatX m = mass_matrix(model, state);
  VecX rhs = generalized_applied_force(model, state, joint_torques) - bias_forces(model, state, gravity);
  if (generalized_aero.size() == n) {
    rhs += generalized_aero;
  } else if (generalized_aero.size() != 0) {
    throw std::invalid_argument("forward_dynamics: aero force size mismatch");
  }
  const Eigen::LDLT<MatX> ldlt(m);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("forward_dynamics: singular mass matrix");
  }
  VecX qdd = ldlt.solve(rhs);
  qdd += ldlt.solve(rhs - m * qdd);  // one refinement pass
  if (!qdd.allFinite()) throw std::runtime_error("forward_dynamics: singular mass matrix");
  return qdd;
}

SimState step(const RobotModel& model, const SimState& state, const VecX& joint_torques,
              const Environment& env, double dt, const SimOptions& options) {
  const int n = model.num_dof();
  const int nj = model.num_joints();
  const int base_cols = model.fixed_base ? 0 : 6;

  VecX u_aero = VecX::Zero(n);
  if (options.aero_enabled) {
    u_aero = generalized_aero_force(model, state, compute_aero_wrenches(model, state, env));
  }

  const MatX m = mass_matrix(model, state);
  const VecX rhs =
      generalized_applied_force(model, state, joint_torques) + u_aero -
      bias_forces(model, state, options.gravity);

  // Joint damping handled implicitly in the velocity update: the damping
  // force at the new velocity adds dt*D to the system matrix (the explicit
  // -D qd part is already inside the applied-force vector).
  MatX sys = m;
  for (int j = 0; j < nj; ++j) sys(base_cols + j, base_cols + j) += dt * model.joints[j].damping;

  VecX dv = VecX::Zero(n);
  if (options.lock_joints && !model.fixed_base) {
    // Welded joints: the assembly moves as one rigid body, so only the base
    // block of the system participates; joint rows are carried by the
    // (implicit) locking constraint.
    const MatX sys_bb = sys.topLeftCorner(6, 6);
    const VecX rhs_b = rhs.head(6);
    const Eigen::LDLT<MatX> ldlt(sys_bb);
    if (ldlt.info() != Eigen::Success) throw PhysicsBlowup("step: singular system matrix");
    VecX dvb = ldlt.solve(dt * rhs_b);
    dvb += ldlt.solve(dt * rhs_b - sys_bb * dvb);
    dv.head(6) = dvb;
  } else if (options.lock_joints) {
    dv.setZero();  // fixed base with locked joints: nothing moves
  } else {
    const Eigen::LDLT<MatX> ldlt(sys);
    if (ldlt.info() != Eigen::Success) throw PhysicsBlowup("step: singular system matrix");
    dv = ldlt.solve(dt * rhs);
    dv += ldlt.solve(dt * rhs - sys * dv);
  }

  VecX vel = generalized_velocity(model, state) + dv;

  SimState next = state;
  if (options.lock_joints) {
    vel.tail(nj).setZero();
  }
  for (int j = 0; j < nj; ++j) {
    const double lim = model.joints[j].vel_limit;
    vel(base_cols + j) = std::clamp(vel(base_cols + j), -lim, lim);
  }

  if (!model.fixed_base) {
    next.base_linear_velocity = vel.segment<3>(0);
    next.base_angular_velocity = vel.segment<3>(3);
    next.base_position = state.base_position + dt * next.base_linear_velocity;
    next.base_orientation = quat_integrate(state.base_orientation, next.base_angular_velocity, dt);
  }
  next.joint_velocities = vel.tail(nj);
  if (!options.lock_joints) {
    next.joint_positions = state.joint_positions + dt * next.joint_velocities;
    for (int j = 0; j < nj; ++j) {
      const auto& joint = model.joints[j];
      if (next.joint_positions(j) < joint.pos_lower) {
        next.joint_positions(j) = joint.pos_lower;
        if (next.joint_velocities(j) < 0.0) next.joint_velocities(j) = 0.0;
      } else if (next.joint_positions(j) > joint.pos_upper) {
        next.joint_positions(j) = joint.pos_upper;
        if (next.joint_velocities(j) > 0.0) next.joint_velocities(j) = 0.0;
      }
    }
  }
  next.time = state.time + dt;
  next.prev_acceleration = dv / dt;
  if (options.lock_joints) next.prev_acceleration.tail(nj).setZero();

  if (!next.all_finite()) throw PhysicsBlowup("step: state diverged to non-finite values");
  return next;
}

}  // namespace fwsim
