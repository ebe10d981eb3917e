#include "fwsim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fwsim/io.hpp"

namespace fwsim {

namespace {

Mat3 solid_ellipsoid_inertia(double mass, const Vec3& s) {
  Mat3 inertia = Mat3::Zero();
  inertia(0, 0) = mass * (s.y() * s.y() + s.z() * s.z()) / 5.0;
  inertia(1, 1) = mass * (s.x() * s.x() + s.z() * s.z()) / 5.0;
  inertia(2, 2) = mass * (s.x() * s.x() + s.y() * s.y()) / 5.0;
  return inertia;
}

const char* tag_name(FluidModelTag tag) {
  switch (tag) {
    case FluidModelTag::Ellipsoid: return "ellipsoid";
    case FluidModelTag::InertiaBox: return "inertia_box";
    default: return "none";
  }
}

FluidModelTag tag_from_name(const std::string& name) {
  if (name == "ellipsoid") return FluidModelTag::Ellipsoid;
  if (name == "inertia_box") return FluidModelTag::InertiaBox;
  if (name == "none") return FluidModelTag::None;
  throw std::runtime_error("unknown fluid model tag: " + name);
}

}  // namespace

bool SimState::all_finite() const {
  return base_position.allFinite() && base_orientation.coeffs().allFinite() &&
         base_linear_velocity.allFinite() && base_angular_velocity.allFinite() &&
         joint_positions.allFinite() && joint_velocities.allFinite() && std::isfinite(time) &&
         prev_acceleration.allFinite();
}

SimState make_initial_state(const RobotModel& model) {
  SimState s;
  s.joint_positions = VecX::Zero(model.num_joints());
  s.joint_velocities = VecX::Zero(model.num_joints());
  s.prev_acceleration = VecX::Zero(model.num_dof());
  return s;
}

VecX generalized_velocity(const RobotModel& model, const SimState& state) {
  VecX v(model.num_dof());
  if (model.fixed_base) {
    v = state.joint_velocities;
  } else {
    v.segment<3>(0) = state.base_linear_velocity;
    v.segment<3>(3) = state.base_angular_velocity;
    v.tail(model.num_joints()) = state.joint_velocities;
  }
  return v;
}

EulerZYX base_euler(const SimState& state) { return euler_zyx_from_quat(state.base_orientation); }

RobotModel build_default_model() {
  RobotModel m;
  m.total_wingspan = 0.995;
  m.mean_chord = 0.17;

  const double total_mass = 0.31;
  const double rho = Environment{}.fluid_density;

  // Main body ellipsoid along x; its width sets where the shoulders sit.
  const Vec3 body_axes(0.15, 0.05, 0.05);
  const double wing_length = 0.5 * (m.total_wingspan - 2.0 * body_axes.y());  // per wing
  const double wing_semi_chord = 0.5 * m.mean_chord;
  const double wing_semi_thickness = 0.5 * 0.05 * m.mean_chord;  // thickness 5% of chord
  const Vec3 wing_axes(wing_semi_chord, 0.5 * wing_length, wing_semi_thickness);
  const Vec3 tail_axes(wing_semi_chord, 0.12, wing_semi_thickness);

  BodyDesc main_body;
  main_body.name = "main_body";
  main_body.mass = 0.70 * total_mass;
  main_body.semi_axes = body_axes;
  main_body.inertia = solid_ellipsoid_inertia(main_body.mass, body_axes);
  // Motor/battery mass sits ahead of and below the shoulder line; this puts
  // the vehicle CG forward of the wing center (tail-stabilized pitch trim)
  // and gives pendular roll stability.
  main_body.com_offset = Vec3(0.06, 0.0, -0.02);
  main_body.fluid_model = FluidModelTag::InertiaBox;

  // The feathering spar sits at quarter chord; the wing panel's center of
  // mass stays on the mid-chord line behind it, which gives the feathering
  // joint a restoring arm against the pitch-divergence (Munk) moment.
  const double spar_offset = 0.5 * wing_semi_chord;

  BodyDesc left_wing;
  left_wing.name = "left_wing";
  left_wing.mass = 0.10 * total_mass;
  left_wing.semi_axes = wing_axes;
  left_wing.inertia = solid_ellipsoid_inertia(left_wing.mass, wing_axes);
  left_wing.com_offset = Vec3(-spar_offset, 0.5 * wing_length, 0.0);
  left_wing.fluid_model = FluidModelTag::Ellipsoid;

  BodyDesc right_wing = left_wing;
  right_wing.name = "right_wing";
  right_wing.com_offset = Vec3(-spar_offset, -0.5 * wing_length, 0.0);

  BodyDesc tail;
  tail.name = "tail";
  tail.mass = 0.10 * total_mass;
  tail.semi_axes = tail_axes;
  tail.inertia = solid_ellipsoid_inertia(tail.mass, tail_axes);
  tail.com_offset = Vec3(-(wing_semi_chord + 0.005), 0.0, 0.0);
  tail.fluid_model = FluidModelTag::Ellipsoid;

  m.bodies = {main_body, left_wing, right_wing, tail};

  const double flap_limit = 60.0 * M_PI / 180.0;
  const double pitch_limit = 45.0 * M_PI / 180.0;
  const double armature = 2e-4;  // kg m^2 gearmotor reflected inertia

  JointDesc flap_left;
  flap_left.name = "flap_left";
  flap_left.parent = 0;
  flap_left.child = 1;
  flap_left.axis = Vec3::UnitX();
  flap_left.anchor = Vec3(0.0, body_axes.y(), 0.0);
  flap_left.pos_lower = -flap_limit;
  flap_left.pos_upper = flap_limit;
  flap_left.armature = armature;

  JointDesc pitch_left;
  pitch_left.name = "pitch_left";
  pitch_left.parent = 0;
  pitch_left.child = 1;
  pitch_left.axis = Vec3::UnitY();
  pitch_left.anchor = Vec3(spar_offset, 0.0, 0.0);
  pitch_left.pos_lower = -pitch_limit;
  pitch_left.pos_upper = pitch_limit;
  pitch_left.armature = armature;

  JointDesc flap_right = flap_left;
  flap_right.name = "flap_right";
  flap_right.child = 2;
  flap_right.axis = -Vec3::UnitX();  // +q flaps both wings up
  flap_right.anchor = Vec3(0.0, -body_axes.y(), 0.0);

  JointDesc pitch_right = pitch_left;
  pitch_right.name = "pitch_right";
  pitch_right.child = 2;

  JointDesc tail_pitch;
  tail_pitch.name = "tail_pitch";
  tail_pitch.parent = 0;
  tail_pitch.child = 3;
  tail_pitch.axis = Vec3::UnitY();
  tail_pitch.anchor = Vec3(-body_axes.x(), 0.0, 0.0);
  tail_pitch.pos_lower = -pitch_limit;
  tail_pitch.pos_upper = pitch_limit;
  tail_pitch.armature = armature;

  m.joints = {flap_left, pitch_left, flap_right, pitch_right, tail_pitch};

  m.fluid_params.reserve(m.bodies.size());
  for (const auto& body : m.bodies) m.fluid_params.push_back(make_fluid_params(body.semi_axes, rho));

  // Locked-joint gliding trim: a little dihedral for lateral margin and
  // tail-up pitch trim. The design ratio is the steady horizontal-to-
  // vertical distance this model covers from the canonical glide start.
  m.glide_pose = VecX::Zero(m.num_joints());
  m.glide_pose(0) = 0.1;
  m.glide_pose(2) = 0.1;
  m.glide_pose(4) = 0.2;
  m.design_lift_to_drag = 4.47;
  return m;
}

std::vector<ValidationIssue> validate_model(const RobotModel& model) {
  std::vector<ValidationIssue> issues;
  auto add = [&issues](const std::string& field, const std::string& message) {
    issues.push_back({field, message});
  };

  if (model.bodies.empty()) {
    add("bodies", "model has no bodies");
    return issues;
  }
  if (model.fluid_params.size() != model.bodies.size()) {
    add("fluid_params", "fluid parameter count does not match body count");
  }

  double total_mass = 0.0;
  for (std::size_t i = 0; i < model.bodies.size(); ++i) {
    const auto& b = model.bodies[i];
    const std::string field = "bodies[" + std::to_string(i) + "]";
    if (!(b.mass > 0.0)) add(field + ".mass", "mass must be positive");
    total_mass += b.mass;
    if ((b.inertia - b.inertia.transpose()).norm() > 1e-12) {
      add(field + ".inertia", "inertia tensor not symmetric");
    } else {
      const Eigen::SelfAdjointEigenSolver<Mat3> eig(b.inertia);
      if (eig.eigenvalues().minCoeff() <= 0.0) {
        add(field + ".inertia", "inertia tensor not positive definite");
      }
    }
    if ((b.semi_axes.array() <= 0.0).any()) add(field + ".semi_axes", "semi-axes must be positive");
  }

  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const auto& joint = model.joints[j];
    const std::string field = "joints[" + std::to_string(j) + "]";
    if (std::abs(joint.axis.norm() - 1.0) > 1e-9) add(field + ".axis", "axis is not a unit vector");
    if (!(joint.pos_lower < joint.pos_upper)) add(field + ".limits", "requires low < high");
    if (joint.damping < 0.0) add(field + ".damping", "damping must be nonnegative");
    if (joint.armature < 0.0) add(field + ".armature", "armature must be nonnegative");
    if (!(joint.vel_limit > 0.0)) add(field + ".vel_limit", "velocity limit must be positive");
    if (!(joint.torque_limit > 0.0)) add(field + ".torque_limit", "torque limit must be positive");
    if (joint.child <= 0 || joint.child >= model.num_bodies()) {
      add(field + ".child", "child body id out of range");
    }
    if (joint.parent < 0 || joint.parent >= model.num_bodies()) {
      add(field + ".parent", "parent body id out of range");
    }
  }

  // Platform-level checks only apply to the flight model, not test rigs.
  if (model.num_bodies() == 4 && model.num_joints() == 5 && !model.fixed_base) {
    if (std::abs(total_mass - 0.31) > 0.31 * 0.25) {
      add("bodies.mass", "total mass far from 0.31 kg");
    }
  }
  return issues;
}

std::string model_to_config(const RobotModel& m) {
  KeyValueConfig cfg;
  cfg.set_string("schema", "fwsim-model-v1");
  cfg.set_int("num_bodies", m.num_bodies());
  cfg.set_int("num_joints", m.num_joints());
  cfg.set_double("total_wingspan_m", m.total_wingspan);
  cfg.set_double("mean_chord_m", m.mean_chord);
  cfg.set_bool("fixed_base", m.fixed_base);
  cfg.set_double("design_lift_to_drag", m.design_lift_to_drag);
  for (int j = 0; j < m.glide_pose.size(); ++j) {
    cfg.set_double("glide_pose_rad." + std::to_string(j), m.glide_pose(j));
  }

  cfg.set_double("coefficients.c_d_blunt", m.coefficients.c_d_blunt);
  cfg.set_double("coefficients.c_d_slender", m.coefficients.c_d_slender);
  cfg.set_double("coefficients.c_d_angular", m.coefficients.c_d_angular);
  cfg.set_double("coefficients.c_kutta", m.coefficients.c_kutta);
  cfg.set_double("coefficients.c_magnus", m.coefficients.c_magnus);

  for (int i = 0; i < m.num_bodies(); ++i) {
    const auto& b = m.bodies[i];
    const std::string p = "body." + std::to_string(i) + ".";
    cfg.set_string(p + "name", b.name);
    cfg.set_double(p + "mass_kg", b.mass);
    cfg.set_vec3(p + "inertia_diag_kgm2", b.inertia.diagonal());
    cfg.set_vec3(p + "inertia_offdiag_kgm2", Vec3(b.inertia(0, 1), b.inertia(0, 2), b.inertia(1, 2)));
    cfg.set_vec3(p + "com_offset_m", b.com_offset);
    cfg.set_vec3(p + "semi_axes_m", b.semi_axes);
    cfg.set_string(p + "fluid_model", tag_name(b.fluid_model));

    const auto& f = m.fluid_params[i];
    cfg.set_vec3(p + "added_mass_kg", f.added_mass);
    cfg.set_vec3(p + "added_inertia_kgm2", f.added_inertia);
    cfg.set_double(p + "volume_m3", f.volume);
    cfg.set_double(p + "area_max_m2", f.area_max);
    cfg.set_double(p + "moment_drag_m5", f.moment_drag);
    cfg.set_double(p + "moment_max_m5", f.moment_max);
    cfg.set_double(p + "viscous_radius_m", f.viscous_radius);
    cfg.set_vec3(p + "fluid_semi_axes_m", f.semi_axes);
  }

  for (int j = 0; j < m.num_joints(); ++j) {
    const auto& joint = m.joints[j];
    const std::string p = "joint." + std::to_string(j) + ".";
    cfg.set_string(p + "name", joint.name);
    cfg.set_int(p + "parent", joint.parent);
    cfg.set_int(p + "child", joint.child);
    cfg.set_vec3(p + "axis", joint.axis);
    cfg.set_vec3(p + "anchor_m", joint.anchor);
    cfg.set_double(p + "pos_lower_rad", joint.pos_lower);
    cfg.set_double(p + "pos_upper_rad", joint.pos_upper);
    cfg.set_double(p + "vel_limit_rad_s", joint.vel_limit);
    cfg.set_double(p + "damping_nms_rad", joint.damping);
    cfg.set_double(p + "torque_limit_nm", joint.torque_limit);
    cfg.set_double(p + "armature_kgm2", joint.armature);
  }
  return cfg.serialize();
}

RobotModel model_from_config(const std::string& text) {
  const KeyValueConfig cfg = KeyValueConfig::parse(text);
  if (cfg.get_string_or("schema", "") != "fwsim-model-v1") {
    throw std::runtime_error("model config: unknown or missing schema tag");
  }
  RobotModel m;
  const int nb = static_cast<int>(cfg.get_int("num_bodies"));
  const int nj = static_cast<int>(cfg.get_int("num_joints"));
  m.total_wingspan = cfg.get_double("total_wingspan_m");
  m.mean_chord = cfg.get_double("mean_chord_m");
  m.fixed_base = cfg.get_bool("fixed_base");
  m.design_lift_to_drag = cfg.get_double_or("design_lift_to_drag", 0.0);
  m.glide_pose = VecX::Zero(nj);
  for (int j = 0; j < nj; ++j) {
    m.glide_pose(j) = cfg.get_double_or("glide_pose_rad." + std::to_string(j), 0.0);
  }

  m.coefficients.c_d_blunt = cfg.get_double("coefficients.c_d_blunt");
  m.coefficients.c_d_slender = cfg.get_double("coefficients.c_d_slender");
  m.coefficients.c_d_angular = cfg.get_double("coefficients.c_d_angular");
  m.coefficients.c_kutta = cfg.get_double("coefficients.c_kutta");
  m.coefficients.c_magnus = cfg.get_double("coefficients.c_magnus");

  for (int i = 0; i < nb; ++i) {
    const std::string p = "body." + std::to_string(i) + ".";
    BodyDesc b;
    b.name = cfg.get_string(p + "name");
    b.mass = cfg.get_double(p + "mass_kg");
    const Vec3 d = cfg.get_vec3(p + "inertia_diag_kgm2");
    const Vec3 o = cfg.get_vec3(p + "inertia_offdiag_kgm2");
    b.inertia << d.x(), o.x(), o.y(), o.x(), d.y(), o.z(), o.y(), o.z(), d.z();
    b.com_offset = cfg.get_vec3(p + "com_offset_m");
    b.semi_axes = cfg.get_vec3(p + "semi_axes_m");
    b.fluid_model = tag_from_name(cfg.get_string(p + "fluid_model"));
    m.bodies.push_back(b);

    FluidBodyParams f;
    f.added_mass = cfg.get_vec3(p + "added_mass_kg");
    f.added_inertia = cfg.get_vec3(p + "added_inertia_kgm2");
    f.volume = cfg.get_double(p + "volume_m3");
    f.area_max = cfg.get_double(p + "area_max_m2");
    f.moment_drag = cfg.get_double(p + "moment_drag_m5");
    f.moment_max = cfg.get_double(p + "moment_max_m5");
    f.viscous_radius = cfg.get_double(p + "viscous_radius_m");
    f.semi_axes = cfg.get_vec3(p + "fluid_semi_axes_m");
    m.fluid_params.push_back(f);
  }

  for (int j = 0; j < nj; ++j) {
    const std::string p = "joint." + std::to_string(j) + ".";
    JointDesc joint;
    joint.name = cfg.get_string(p + "name");
    joint.parent = static_cast<int>(cfg.get_int(p + "parent"));
    joint.child = static_cast<int>(cfg.get_int(p + "child"));
    joint.axis = cfg.get_vec3(p + "axis");
    joint.anchor = cfg.get_vec3(p + "anchor_m");
    joint.pos_lower = cfg.get_double(p + "pos_lower_rad");
    joint.pos_upper = cfg.get_double(p + "pos_upper_rad");
    joint.vel_limit = cfg.get_double(p + "vel_limit_rad_s");
    joint.damping = cfg.get_double(p + "damping_nms_rad");
    joint.torque_limit = cfg.get_double(p + "torque_limit_nm");
    joint.armature = cfg.get_double_or(p + "armature_kgm2", 0.0);
    m.joints.push_back(joint);
  }
  return m;
}

void save_model_config(const RobotModel& model, const std::string& path) {
  write_text_file(path, model_to_config(model));
}

RobotModel load_model_config(const std::string& path) {
  return model_from_config(read_text_file(path));
}

}  // namespace fwsim
