#include "fwsim/training.hpp"

#include <cmath>

#include "fwsim/io.hpp"

namespace fwsim {

RewardBreakdown compute_reward(const SimState& state, const Vec3& target_position,
                               const VecX& previous_action, const VecX& torques,
                               const RewardScales& scales) {
  (void)previous_action;  // reserved for an action-rate term; Eq.-of-record has four parts
  RewardBreakdown r;
  const double pos_err2 = (state.base_position - target_position).squaredNorm();
  r.r_pos = std::exp(-pos_err2 / (scales.sigma_pos * scales.sigma_pos));

  const double rates2 = state.base_angular_velocity.squaredNorm();
  r.r_rates = std::exp(-rates2 / (scales.sigma_rates * scales.sigma_rates));

  const EulerZYX e = base_euler(state);
  r.r_level = std::exp(-(e.roll * e.roll + e.pitch * e.pitch) /
                       (scales.sigma_level * scales.sigma_level));

  double power = 0.0;
  const int nj = static_cast<int>(std::min(torques.size(), state.joint_velocities.size()));
  for (int j = 0; j < nj; ++j) power += std::abs(torques(j) * state.joint_velocities(j));
  r.r_energy = std::exp(-power / scales.sigma_energy);

  r.total = kRewardWeightPos * r.r_pos + kRewardWeightRates * r.r_rates +
            kRewardWeightLevel * r.r_level + kRewardWeightEnergy * r.r_energy;
  return r;
}

const char* termination_name(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::None: return "none";
    case TerminationReason::PositionError: return "position_error";
    case TerminationReason::Orientation: return "orientation";
    case TerminationReason::Timeout: return "timeout";
    case TerminationReason::NonFinite: return "non_finite";
  }
  return "unknown";
}

TerminationReason check_termination(const SimState& state, const Vec3& target_position,
                                    const EpisodeConfig& config) {
  if (!state.all_finite()) return TerminationReason::NonFinite;
  if ((state.base_position - target_position).norm() > config.position_tolerance) {
    return TerminationReason::PositionError;
  }
  if (config.orientation_termination_active()) {
    const EulerZYX e = base_euler(state);
    if (std::abs(e.roll) > config.orientation_limit || std::abs(e.pitch) > config.orientation_limit) {
      return TerminationReason::Orientation;
    }
  }
  const double step_time = 1.0 / kPolicyRateHz;
  if (state.time >= config.max_duration - 0.5 * step_time) return TerminationReason::Timeout;
  return TerminationReason::None;
}

RandomizationConfig RandomizationConfig::disabled() {
  RandomizationConfig c;
  c.damping_scale_lo = c.damping_scale_hi = 1.0;
  c.mass_scale_lo = c.mass_scale_hi = 1.0;
  c.inertia_scale_lo = c.inertia_scale_hi = 1.0;
  c.com_offset_lo = c.com_offset_hi = 0.0;
  c.aero_coeff_scale_lo = c.aero_coeff_scale_hi = 1.0;
  c.added_mass_scale_lo = c.added_mass_scale_hi = 1.0;
  c.added_inertia_scale_lo = c.added_inertia_scale_hi = 1.0;
  c.wind_lo = c.wind_hi = Vec3::Zero();
  c.init_position_range = 0.0;
  c.init_velocity_range = 0.0;
  return c;
}

RandomizedSetup sample_randomization(const RobotModel& base, const RandomizationConfig& config,
                                     std::uint64_t seed) {
  Rng rng(seed);
  RandomizedSetup setup;
  setup.model = base;

  // Sampling order is part of the determinism contract: joints, then bodies,
  // then coefficients, then per-body added terms, then wind, then the
  // initial-state offsets.
  for (auto& joint : setup.model.joints) {
    joint.damping *= rng.uniform(config.damping_scale_lo, config.damping_scale_hi);
  }
  for (auto& body : setup.model.bodies) {
    body.mass *= rng.uniform(config.mass_scale_lo, config.mass_scale_hi);
    body.inertia *= rng.uniform(config.inertia_scale_lo, config.inertia_scale_hi);
    body.com_offset += rng.uniform_vec(Vec3::Constant(config.com_offset_lo),
                                       Vec3::Constant(config.com_offset_hi));
  }
  auto& c = setup.model.coefficients;
  c.c_d_blunt *= rng.uniform(config.aero_coeff_scale_lo, config.aero_coeff_scale_hi);
  c.c_d_slender *= rng.uniform(config.aero_coeff_scale_lo, config.aero_coeff_scale_hi);
  c.c_d_angular *= rng.uniform(config.aero_coeff_scale_lo, config.aero_coeff_scale_hi);
  c.c_kutta *= rng.uniform(config.aero_coeff_scale_lo, config.aero_coeff_scale_hi);
  c.c_magnus *= rng.uniform(config.aero_coeff_scale_lo, config.aero_coeff_scale_hi);
  for (auto& params : setup.model.fluid_params) {
    params.added_mass *= rng.uniform(config.added_mass_scale_lo, config.added_mass_scale_hi);
    params.added_inertia *=
        rng.uniform(config.added_inertia_scale_lo, config.added_inertia_scale_hi);
  }
  setup.environment.wind_velocity = rng.uniform_vec(config.wind_lo, config.wind_hi);
  setup.init_position_offset = rng.uniform_vec(Vec3::Constant(-config.init_position_range),
                                               Vec3::Constant(config.init_position_range));
  setup.init_velocity_offset = rng.uniform_vec(Vec3::Constant(-config.init_velocity_range),
                                               Vec3::Constant(config.init_velocity_range));
  return setup;
}

FlightEnv::FlightEnv(RobotModel model, Trajectory trajectory, EnvOptions options)
    : base_model_(std::move(model)),
      active_model_(base_model_),
      trajectory_(std::move(trajectory)),
      options_(std::move(options)),
      active_env_(options_.environment),
      gains_(options_.gains ? *options_.gains : default_pd_gains(base_model_)),
      mapper_(base_model_),
      builder_(base_model_.num_joints()) {
  state_ = make_initial_state(base_model_);
  prev_action_ = VecX::Zero(base_model_.num_joints());
  last_torques_ = VecX::Zero(base_model_.num_joints());
  last_joint_targets_ = VecX::Zero(base_model_.num_joints());
}

void FlightEnv::set_trajectory(Trajectory trajectory) { trajectory_ = std::move(trajectory); }

Vec3 FlightEnv::current_target() const { return trajectory_.position_at(state_.time); }

VecX FlightEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  Vec3 pos_offset = Vec3::Zero();
  Vec3 vel_offset = Vec3::Zero();
  if (options_.randomize_dynamics) {
    const RandomizedSetup setup =
        sample_randomization(base_model_, options_.randomization, rng_.next_raw());
    active_model_ = setup.model;
    active_env_ = setup.environment;
    pos_offset = setup.init_position_offset;
    vel_offset = setup.init_velocity_offset;
  } else {
    active_model_ = base_model_;
    active_env_ = options_.environment;
    const double pr = options_.randomization.init_position_range;
    const double vr = options_.randomization.init_velocity_range;
    pos_offset = rng_.uniform_vec(Vec3::Constant(-pr), Vec3::Constant(pr));
    vel_offset = rng_.uniform_vec(Vec3::Constant(-vr), Vec3::Constant(vr));
  }

  state_ = make_initial_state(active_model_);
  const Vec3 p0 = trajectory_.position_at(0.0);
  const Vec3 p1 = trajectory_.position_at(trajectory_.dt());
  const Vec3 path_velocity = (p1 - p0) / trajectory_.dt();
  state_.base_position = p0 + pos_offset;
  state_.base_linear_velocity = path_velocity + vel_offset;
  double heading = 0.0;
  if (path_velocity.head<2>().norm() > 1e-9) {
    heading = std::atan2(path_velocity.y(), path_velocity.x());
  }
  state_.base_orientation = quat_from_euler_zyx({0.0, 0.0, heading});

  step_index_ = 0;
  prev_action_.setZero();
  last_torques_.setZero();
  last_joint_targets_.setZero();
  mapper_.reset();
  builder_.reset();
  builder_.push(state_, active_env_.wind_velocity, prev_action_);
  return builder_.assemble(trajectory_, 0.0, state_);
}

FlightEnv::StepOutput FlightEnv::step(const VecX& action) {
  StepOutput out;
  prev_action_ = action.cwiseMax(-1.0).cwiseMin(1.0);
  last_joint_targets_ = mapper_.target_positions(prev_action_);

  SimOptions sim_opts;
  sim_opts.aero_enabled = options_.aero_enabled;
  const double dt = 1.0 / kSimRateHz;
  bool blew_up = false;
  for (int sub = 0; sub < kSubstepsPerControl; ++sub) {
    last_torques_ = pd_torque(last_joint_targets_, state_, gains_, active_model_);
    try {
      state_ = fwsim::step(active_model_, state_, last_torques_, active_env_, dt, sim_opts);
    } catch (const PhysicsBlowup&) {
      blew_up = true;
      break;
    }
  }
  ++step_index_;

  const Vec3 target = trajectory_.position_at(state_.time);
  out.reward = compute_reward(state_, target, prev_action_, last_torques_, options_.reward_scales);
  if (blew_up) {
    out.done = true;
    out.reason = TerminationReason::NonFinite;
    out.reward = RewardBreakdown{};  // no reward from a diverged state
  } else {
    out.reason = check_termination(state_, target, options_.episode);
    out.done = out.reason != TerminationReason::None;
  }

  builder_.push(state_, active_env_.wind_velocity, prev_action_);
  out.observation = builder_.assemble(trajectory_, state_.time, state_);
  return out;
}

Rollout run_episode(const Policy& policy, const RobotModel& model, const Trajectory& trajectory,
                    const EnvOptions& options, std::uint64_t seed) {
  FlightEnv env(model, trajectory, options);
  VecX obs = env.reset(seed);

  Rollout rollout;
  rollout.seed = seed;
  const int max_steps = options.episode.max_steps();
  rollout.steps.reserve(static_cast<std::size_t>(max_steps));
  for (int k = 0; k < max_steps; ++k) {
    VecX action;
    if (options.stochastic) {
      action = policy.sample_action(obs, env.rng());
    } else {
      action = policy.forward(obs).mean;
    }
    const auto out = env.step(action);
    StepRecord rec;
    rec.time = env.state().time;
    rec.state = env.state();
    rec.action = action.cwiseMax(-1.0).cwiseMin(1.0);
    rec.joint_targets = env.last_joint_targets();
    rec.torques = env.last_torques();
    rec.target_position = env.current_target();
    rec.reward = out.reward;
    rollout.total_return += out.reward.total;
    rollout.steps.push_back(std::move(rec));
    obs = out.observation;
    if (out.done) {
      rollout.termination = out.reason;
      break;
    }
  }
  if (rollout.termination == TerminationReason::None) {
    rollout.termination = TerminationReason::Timeout;
  }
  return rollout;
}

std::string rollout_to_csv(const Rollout& rollout) {
  std::vector<std::string> cols = {
      "t_s",    "x_m",      "y_m",      "z_m",      "qw",        "qx",       "qy",
      "qz",     "vx_mps",   "vy_mps",   "vz_mps",   "p_rad_s",   "q_rad_s",  "r_rad_s",
      "tx_m",   "ty_m",     "tz_m",     "r_pos",    "r_rates",   "r_level",  "r_energy",
      "r_total"};
  const int nj = rollout.steps.empty() ? 0 : static_cast<int>(rollout.steps[0].action.size());
  for (int j = 0; j < nj; ++j) cols.push_back("qj" + std::to_string(j + 1) + "_rad");
  for (int j = 0; j < nj; ++j) cols.push_back("qjd" + std::to_string(j + 1) + "_rad_s");
  for (int j = 0; j < nj; ++j) cols.push_back("action" + std::to_string(j + 1));
  for (int j = 0; j < nj; ++j) cols.push_back("target" + std::to_string(j + 1) + "_rad");
  for (int j = 0; j < nj; ++j) cols.push_back("tau" + std::to_string(j + 1) + "_nm");
  CsvWriter csv(cols);
  for (const auto& s : rollout.steps) {
    std::vector<double> row = {
        s.time,
        s.state.base_position.x(), s.state.base_position.y(), s.state.base_position.z(),
        s.state.base_orientation.w(), s.state.base_orientation.x(), s.state.base_orientation.y(),
        s.state.base_orientation.z(),
        s.state.base_linear_velocity.x(), s.state.base_linear_velocity.y(),
        s.state.base_linear_velocity.z(),
        s.state.base_angular_velocity.x(), s.state.base_angular_velocity.y(),
        s.state.base_angular_velocity.z(),
        s.target_position.x(), s.target_position.y(), s.target_position.z(),
        s.reward.r_pos, s.reward.r_rates, s.reward.r_level, s.reward.r_energy, s.reward.total};
    for (int j = 0; j < nj; ++j) row.push_back(s.state.joint_positions(j));
    for (int j = 0; j < nj; ++j) row.push_back(s.state.joint_velocities(j));
    for (int j = 0; j < nj; ++j) row.push_back(s.action(j));
    for (int j = 0; j < nj; ++j) row.push_back(s.joint_targets(j));
    for (int j = 0; j < nj; ++j) row.push_back(s.torques(j));
    csv.append_row(row);
  }
  return csv.serialize();
}

TrajectorySpec sample_stage_trajectory(int stage, const StageConfig& config, Rng& rng) {
  TrajectorySpec spec;
  if (stage <= 1) {
    Command cmd;
    cmd.forward_speed = config.forward_speed;
    cmd.duration = 30.0;
    spec.segments.emplace_back(cmd);
    return spec;
  }
  for (int i = 0; i < config.segments; ++i) {
    if (stage >= 3 && rng.uniform01() < config.loop_probability) {
      LoopPrimitive loop;
      loop.radius = rng.uniform(1.5, 3.0);
      loop.entry_speed = rng.uniform(3.0, config.speed_hi);
      loop.kind = rng.uniform01() < 0.5 ? LoopKind::Full : LoopKind::HalfImmelmann;
      spec.segments.emplace_back(loop);
      continue;
    }
    Command cmd;
    cmd.forward_speed = rng.uniform(config.speed_lo, config.speed_hi);
    cmd.z_velocity = rng.uniform(config.climb_lo, config.climb_hi);
    cmd.yaw_rate = stage >= 3 ? rng.uniform(config.yaw_rate_lo, config.yaw_rate_hi) : 0.0;
    spec.segments.emplace_back(cmd);
  }
  return spec;
}

}  // namespace fwsim
