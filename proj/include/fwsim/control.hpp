#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "fwsim/math.hpp"
#include "fwsim/model.hpp"
#include "fwsim/trajectory.hpp"

namespace fwsim {

inline constexpr double kPolicyRateHz = 50.0;
inline constexpr double kSimRateHz = 250.0;
inline constexpr int kSubstepsPerControl = 5;  // 250 / 50
inline constexpr double kFilterCutoffHz = 7.0;
inline constexpr int kHistorySteps = 25;

/// Per-joint PD gains for the 250 Hz low-level loop.
struct PDGains {
  VecX kp;  // N m / rad
  VecX kd;  // N m s / rad
};

/// Gains sized to each joint's reflected inertia; tuned on the stage-1
/// training smoke test.
PDGains default_pd_gains(const RobotModel& model);

/// tau = kp (q_d - q_j) - kd qd_j, clamped to the model torque limits.
VecX pd_torque(const VecX& target_positions, const SimState& state, const PDGains& gains,
               const RobotModel& model);

/// First-order low-pass, exact zero-order-hold discretization of
/// 1/(s/wc + 1): y[k] = a y[k-1] + (1-a) u[k], a = exp(-wc T). Unit DC gain.
class LowPassFilter {
 public:
  LowPassFilter(int channels, double cutoff_hz, double sample_rate_hz);
  void reset();
  void reset_to(const VecX& value);
  VecX apply(const VecX& input);
  double smoothing() const { return alpha_; }
  const VecX& state() const { return state_; }

 private:
  double alpha_ = 0.0;
  VecX state_;
  bool primed_ = false;
};

/// Clamps the raw action to [-1, 1], low-passes it at the policy rate, then
/// affine-maps to joint position targets centered on the nominal pose.
class ActionMapper {
 public:
  explicit ActionMapper(const RobotModel& model,
                        double cutoff_hz = kFilterCutoffHz,
                        double sample_rate_hz = kPolicyRateHz);
  void reset();
  VecX target_positions(const VecX& raw_action);
  VecX map_only(const VecX& filtered_action) const;  // affine map without the filter

 private:
  LowPassFilter filter_;
  VecX center_;
  VecX half_range_;
};

/// Body-frame x velocity relative to the wind; the only velocity sensor.
double pitot_reading(const SimState& state, const Vec3& wind);

/// Rolling 25-frame sensor/action history plus the 30-point lookahead.
/// Frames are flattened oldest-first as (quaternion wxyz, p q r, joint
/// positions, pitot, previous action); missing frames at episode start stay
/// zero.
class ObservationBuilder {
 public:
  explicit ObservationBuilder(int num_joints);
  int frame_dim() const { return frame_dim_; }
  int observation_dim() const;
  void reset();
  void push(const SimState& state, const Vec3& wind, const VecX& prev_action);
  VecX assemble(const Trajectory& trajectory, double t, const SimState& state) const;

 private:
  int num_joints_;
  int frame_dim_;
  std::deque<VecX> frames_;
};

/// Running mean/std observation normalization (Welford), stored in
/// checkpoints so inference reproduces training exactly.
struct ObsNormalizer {
  VecX mean;
  VecX var;
  double count = 0.0;
  double clip = 10.0;

  explicit ObsNormalizer(int dim = 0)
      : mean(VecX::Zero(dim)), var(VecX::Ones(dim)) {}

  VecX normalize(const VecX& raw) const;
  VecX denormalize(const VecX& normalized) const;
  void update(const std::vector<VecX>& batch);
};

struct MlpLayer {
  MatX weight;
  VecX bias;
};

/// Fully connected network with tanh hidden activations and a linear output.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {input, hidden..., output}; final layer scaled by output_scale.
  Mlp(const std::vector<int>& sizes, Rng& rng, double output_scale = 1.0);

  VecX forward(const VecX& input) const;

  struct Workspace {
    std::vector<VecX> inputs;  // activation entering each layer
  };
  VecX forward_cached(const VecX& input, Workspace& ws) const;

  /// Backprop: accumulates parameter gradients into `grads` (same shapes,
  /// zero-initialized by caller) and returns the gradient w.r.t. the input.
  VecX backward(const Workspace& ws, const VecX& grad_output, Mlp& grads) const;

  /// Batched variants; samples are columns.
  struct BatchWorkspace {
    std::vector<MatX> inputs;
  };
  MatX forward_batch(const MatX& inputs) const;
  MatX forward_batch_cached(const MatX& inputs, BatchWorkspace& ws) const;
  MatX backward_batch(const BatchWorkspace& ws, const MatX& grad_outputs, Mlp& grads) const;

  static Mlp zeros_like(const Mlp& other);
  int parameter_count() const;
  void flatten_into(VecX& out, int& offset) const;
  void unflatten_from(const VecX& in, int& offset);

  std::vector<MlpLayer> layers;
};

struct PolicyOutput {
  VecX mean;    // squashed to [-1, 1]
  VecX std;     // exp(log_std)
  double value = 0.0;
};

/// Actor-critic MLP pair with a state-independent log-std vector.
class Policy {
 public:
  Policy() = default;
  Policy(int obs_dim, int action_dim, const std::vector<int>& hidden, std::uint64_t seed);

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }

  /// Deterministic map from a raw observation; throws on a dimension
  /// mismatch.
  PolicyOutput forward(const VecX& raw_observation) const;
  /// Gaussian sample around the squashed mean (exploration noise).
  VecX sample_action(const VecX& raw_observation, Rng& rng) const;

  Mlp actor;        // outputs pre-squash mean
  Mlp critic;       // outputs value
  VecX log_std;
  ObsNormalizer normalizer;
  std::uint64_t config_hash = 0;

 private:
  int obs_dim_ = 0;
  int action_dim_ = 0;
};

/// Versioned binary checkpoint: layer shapes, weights, normalizer
/// statistics and the training config hash.
void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);
std::string policy_to_json(const Policy& policy);

}  // namespace fwsim
