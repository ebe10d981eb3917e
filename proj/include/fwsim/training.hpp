#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fwsim/control.hpp"
#include "fwsim/dynamics.hpp"
#include "fwsim/model.hpp"
#include "fwsim/trajectory.hpp"

namespace fwsim {

/// Kernel scales for the four reward terms; the weights themselves are
/// fixed at 0.5 / 0.1 / 0.2 / 0.05.
struct RewardScales {
  double sigma_pos = 1.0;     // m
  double sigma_rates = 3.0;   // rad/s
  double sigma_level = 0.5;   // rad
  double sigma_energy = 5.0;  // W
};

struct RewardBreakdown {
  double r_pos = 0.0;
  double r_rates = 0.0;
  double r_level = 0.0;
  double r_energy = 0.0;
  double total = 0.0;
};

inline constexpr double kRewardWeightPos = 0.5;
inline constexpr double kRewardWeightRates = 0.1;
inline constexpr double kRewardWeightLevel = 0.2;
inline constexpr double kRewardWeightEnergy = 0.05;

/// Exponential kernels on position error, body rates, roll/pitch and
/// mechanical power, combined with the fixed weights.
RewardBreakdown compute_reward(const SimState& state, const Vec3& target_position,
                               const VecX& previous_action, const VecX& torques,
                               const RewardScales& scales = {});

enum class TerminationReason { None, PositionError, Orientation, Timeout, NonFinite };
const char* termination_name(TerminationReason reason);

struct EpisodeConfig {
  double max_duration = 30.0;          // s (1500 control steps at 50 Hz)
  double position_tolerance = 3.0;     // m
  double orientation_limit = M_PI / 2; // rad, applied in stages 1-2 only
  int curriculum_stage = 1;

  int max_steps() const { return static_cast<int>(std::lround(max_duration * kPolicyRateHz)); }
  bool orientation_termination_active() const { return curriculum_stage <= 2; }
};

TerminationReason check_termination(const SimState& state, const Vec3& target_position,
                                    const EpisodeConfig& config);

/// Table-driven domain randomization ranges. A degenerate range (lo == hi)
/// leaves the corresponding parameter untouched.
struct RandomizationConfig {
  double damping_scale_lo = 0.9, damping_scale_hi = 1.1;
  double mass_scale_lo = 0.9, mass_scale_hi = 1.1;
  double inertia_scale_lo = 0.9, inertia_scale_hi = 1.1;
  double com_offset_lo = -0.05, com_offset_hi = 0.05;  // m, additive
  double aero_coeff_scale_lo = 0.7, aero_coeff_scale_hi = 1.3;
  double added_mass_scale_lo = 0.9, added_mass_scale_hi = 1.1;
  double added_inertia_scale_lo = 0.9, added_inertia_scale_hi = 1.1;
  Vec3 wind_lo = Vec3(-2.0, -2.0, -1.5);  // m/s
  Vec3 wind_hi = Vec3(2.0, 2.0, 1.5);
  double init_position_range = 0.5;  // m, about the trajectory start
  double init_velocity_range = 0.5;  // m/s

  static RandomizationConfig disabled();
};

struct RandomizedSetup {
  RobotModel model;
  Environment environment;
  Vec3 init_position_offset = Vec3::Zero();
  Vec3 init_velocity_offset = Vec3::Zero();
};

/// Uniform sampling inside every configured range, applied multiplicatively
/// or additively as Table-style ranges dictate. Deterministic in the seed.
RandomizedSetup sample_randomization(const RobotModel& base, const RandomizationConfig& config,
                                     std::uint64_t seed);

struct StepRecord {
  double time = 0.0;
  SimState state;        // post-step state
  VecX action;           // clamped policy output
  VecX joint_targets;    // filtered + scaled
  VecX torques;          // final-substep PD torques
  Vec3 target_position = Vec3::Zero();
  RewardBreakdown reward;
};

struct Rollout {
  std::vector<StepRecord> steps;
  TerminationReason termination = TerminationReason::None;
  double total_return = 0.0;
  std::uint64_t seed = 0;

  double duration() const { return steps.empty() ? 0.0 : steps.back().time; }
};

/// Everything an episode needs besides model/trajectory/policy.
struct EnvOptions {
  Environment environment;
  EpisodeConfig episode;
  RewardScales reward_scales;
  std::optional<PDGains> gains;  // default_pd_gains(model) when unset
  bool aero_enabled = true;
  bool stochastic = false;     // sample actions instead of using the mean
  bool randomize_dynamics = false;
  RandomizationConfig randomization;
};

/// One environment: owns the (possibly randomized) model, filter state,
/// observation history and step bookkeeping. Single-writer; independent
/// instances may run on separate threads.
class FlightEnv {
 public:
  FlightEnv(RobotModel model, Trajectory trajectory, EnvOptions options);

  VecX reset(std::uint64_t seed);
  void set_trajectory(Trajectory trajectory);

  struct StepOutput {
    VecX observation;
    RewardBreakdown reward;
    bool done = false;
    TerminationReason reason = TerminationReason::None;
  };
  StepOutput step(const VecX& action);

  const SimState& state() const { return state_; }
  const RobotModel& active_model() const { return active_model_; }
  const Environment& active_environment() const { return active_env_; }
  const Trajectory& trajectory() const { return trajectory_; }
  double time() const { return state_.time; }
  int steps_taken() const { return step_index_; }
  int observation_dim() const { return builder_.observation_dim(); }
  Vec3 current_target() const;
  Rng& rng() { return rng_; }
  const VecX& last_torques() const { return last_torques_; }
  const VecX& last_joint_targets() const { return last_joint_targets_; }

 private:
  RobotModel base_model_;
  RobotModel active_model_;
  Trajectory trajectory_;
  EnvOptions options_;
  Environment active_env_;
  PDGains gains_;
  ActionMapper mapper_;
  ObservationBuilder builder_;
  SimState state_;
  Rng rng_{0};
  int step_index_ = 0;
  VecX prev_action_;
  VecX last_torques_;
  VecX last_joint_targets_;
};

/// Full-episode rollout with per-step reward breakdown and state history.
Rollout run_episode(const Policy& policy, const RobotModel& model, const Trajectory& trajectory,
                    const EnvOptions& options, std::uint64_t seed);

std::string rollout_to_csv(const Rollout& rollout);

/// Procedural per-stage trajectory sampling for the curriculum.
struct StageConfig {
  double forward_speed = 3.8;   // m/s, stage-1 cruise
  double speed_lo = 2.5, speed_hi = 5.0;
  double climb_lo = -1.0, climb_hi = 1.0;   // m/s
  double yaw_rate_lo = -0.5, yaw_rate_hi = 0.5;  // rad/s
  double loop_probability = 0.1;  // stage >= 3
  int segments = 10;
};
TrajectorySpec sample_stage_trajectory(int stage, const StageConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// PPO
// ---------------------------------------------------------------------------

struct PpoConfig {
  int num_envs = 16;
  int horizon = 256;       // control steps per env per update
  int epochs = 4;
  int minibatches = 4;
  double learning_rate = 3e-4;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  bool parallel = true;    // serial mode must be bit-identical
  std::int64_t total_steps = 400000;
  std::vector<int> hidden = {256, 256};
  std::uint64_t seed = 1;
};

struct CurriculumConfig {
  int start_stage = 1;
  int final_stage = 1;
  double advance_fraction = 0.7;  // of the per-step reward ceiling (0.85)
  int advance_window = 50;        // episodes
  StageConfig stage;
};

struct TrainSetup {
  RobotModel model;
  PpoConfig ppo;
  EnvOptions env;
  CurriculumConfig curriculum;
  std::string out_dir;  // empty: no artifacts written
  std::uint64_t config_hash = 0;
};

struct UpdateMetrics {
  int update = 0;
  std::int64_t steps = 0;
  int stage = 1;
  double mean_return = 0.0;
  double mean_length = 0.0;  // control steps
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_std = 0.0;
  double reward_pos = 0.0, reward_rates = 0.0, reward_level = 0.0, reward_energy = 0.0;
  int term_position = 0, term_orientation = 0, term_timeout = 0, term_nonfinite = 0;
  bool advantage_normalization = true;
};

struct TrainResult {
  Policy policy;
  std::vector<UpdateMetrics> curve;
  bool diverged = false;
  int final_stage = 1;
};

TrainResult ppo_train(const Policy& initial, const TrainSetup& setup);

// Frozen-minibatch pieces exposed for the analytic-vs-numeric gradient
// check. `observations` are already normalized.
struct PpoBatch {
  MatX observations;  // rows = samples
  MatX actions;
  VecX old_log_prob;
  VecX advantages;
  VecX returns;
};

/// Clipped-surrogate objective L = mean(min(r A, clip(r) A)) and, when
/// `grad` is non-null, its analytic gradient w.r.t. [actor params, log_std].
/// Returns the (non-negated) objective.
double ppo_clipped_surrogate(const Policy& policy, const PpoBatch& batch, double clip, VecX* grad);

/// Actor + log_std parameters as one flat vector (layout matches
/// ppo_clipped_surrogate's gradient).
VecX policy_actor_params(const Policy& policy);
void set_policy_actor_params(Policy& policy, const VecX& flat);

}  // namespace fwsim
