#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "fwsim/math.hpp"
#include "fwsim/training.hpp"

namespace fwsim {

/// Synchronized 50 Hz input/output series: u = commanded position deviation
/// from trim, y = measured position deviation, both world-frame.
struct IoSeries {
  double sample_rate = kPolicyRateHz;
  MatX input;   // N x 3
  MatX output;  // N x 3
};

struct ExcitationSpec {
  double segment_duration = 40.0;  // s per attempt
  int segments = 2;
  double settle_time = 4.0;        // s discarded at each segment start
  double amplitude = 1.0;          // m, peak multisine amplitude per axis
  double freq_lo = 0.05;           // Hz
  double freq_hi = 2.0;            // Hz
  int num_sines = 6;
  double trim_speed = 3.8;         // m/s straight trim path
  std::uint64_t seed = 0;
};

/// A closed loop that can track a commanded position path at 50 Hz.
class ClosedLoopSystem {
 public:
  virtual ~ClosedLoopSystem() = default;
  /// Runs the whole commanded path; fills one measured position row per
  /// sample. Returns false when the run terminated early after *steps_done
  /// completed steps.
  virtual bool run(const Trajectory& commanded, MatX* measured, int* steps_done) = 0;
};

/// Wraps policy + model into a ClosedLoopSystem on top of FlightEnv.
class PolicyClosedLoop : public ClosedLoopSystem {
 public:
  PolicyClosedLoop(Policy policy, RobotModel model, EnvOptions options, std::uint64_t seed);
  bool run(const Trajectory& commanded, MatX* measured, int* steps_done) override;

 private:
  Policy policy_;
  RobotModel model_;
  EnvOptions options_;
  std::uint64_t seed_;
  std::uint64_t episode_ = 0;
};

struct CollectResult {
  std::vector<IoSeries> segments;  // completed segments, deviations from trim
  int discarded_segments = 0;
};

/// Multisine excitation around a straight trim path; early-terminated
/// segments are discarded and counted.
CollectResult collect_io_pairs(ClosedLoopSystem& system, const ExcitationSpec& excitation);

/// Continuous-time fit Y_i(s) = (b2 s^2 + b1 s + b0) / (s^3 + a2 s^2 + a1 s + a0)
/// with the denominator shared across the three axes.
struct TransferFunctionFit {
  Eigen::Matrix3d numerators = Eigen::Matrix3d::Zero();  // row i: [b2 b1 b0] of axis i
  Eigen::Vector4d denominator = Eigen::Vector4d::Zero(); // [1 a2 a1 a0]
  double mse_raw = 0.0;         // held-out one-step prediction error
  double mse_normalized = 0.0;  // per-axis std-normalized variant
  double sample_rate = kPolicyRateHz;
  bool valid = false;
  bool rank_deficient = false;
  bool poor_fit = false;
};

struct FitOptions {
  double holdout_fraction = 0.3;
  bool common_denominator = true;  // per-axis denominators behind this flag
  double poor_fit_threshold = 1e-3;  // on normalized held-out MSE
};

/// Discrete-time least squares (output-error ARX regression, strictly
/// proper, per-axis intercept) followed by an exact bilinear map to
/// continuous time. Needs >= 30 s of data across the segments.
TransferFunctionFit fit_lti(const std::vector<IoSeries>& segments, const FitOptions& options = {});
TransferFunctionFit fit_lti(const IoSeries& series, const FitOptions& options = {});

struct PoleZeroReport {
  std::vector<std::complex<double>> poles;                 // rad/s
  std::array<std::vector<std::complex<double>>, 3> zeros;  // per axis
  bool bibo_stable = false;                                // all Re(p) < 0, strict
  std::array<bool, 3> minimum_phase = {false, false, false};
};

/// Companion-matrix roots of the fitted polynomials plus the strict
/// left-half-plane classification. Throws std::invalid_argument on an
/// invalid fit.
PoleZeroReport poles_zeros_classify(const TransferFunctionFit& fit);

/// Roots of a polynomial given descending coefficients (companion-matrix
/// eigenvalues). Throws on an all-zero polynomial.
std::vector<std::complex<double>> polynomial_roots(const VecX& coeffs_descending);
/// Monic expansion from roots; imaginary parts of the coefficients must
/// cancel (conjugate-closed root sets).
VecX polynomial_from_roots(const std::vector<std::complex<double>>& roots);

std::string fit_report_json(const TransferFunctionFit& fit, const PoleZeroReport& report);

struct SpectralResult {
  double fundamental_hz = 0.0;
  double energy_fraction = 0.0;  // power in the fundamental bin +-1 over AC power
  double band_power = 0.0;
  double total_ac_power = 0.0;
};

/// Hann-windowed DFT peak over 1-20 Hz with parabolic refinement. Throws
/// std::invalid_argument for series under 2 s or with no AC content.
SpectralResult spectral_analysis(const VecX& series, double sample_rate);

struct OrbitStats {
  double period = 0.0;          // s
  double position_min = 0.0, position_max = 0.0;
  double velocity_min = 0.0, velocity_max = 0.0;
  double closure_metric = 0.0;  // mean successive-cycle distance / orbit diameter
  int cycles = 0;
  bool periodic = false;
};

/// Cycle segmentation by refined mean-crossings, cubic-Hermite phase
/// resampling, and successive-cycle distances in range-normalized (q, qd)
/// coordinates. Throws when fewer than two full cycles are present.
OrbitStats phase_portrait(const VecX& position, const VecX& velocity, double sample_rate,
                          double closure_threshold = 0.05);
OrbitStats phase_portrait(const Rollout& rollout, int joint_id, double closure_threshold = 0.05);

struct SweepPoint {
  std::string parameter;  // coefficient name, "all", or "wind"
  double scale = 1.0;     // coefficient multiplier (1.0 for wind rows)
  Vec3 wind = Vec3::Zero();
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
};

struct SweepSpec {
  std::vector<std::string> coefficients;  // subset of the 5 names or "all"
  std::vector<double> scales;
  std::vector<Vec3> winds;
  int episodes_per_point = 100;
  std::uint64_t seed = 0;
};

/// Success = the episode reaches the end of the trajectory within the 3 m
/// radius. Episodes vary by their init-noise seed; the policy runs its mean
/// action.
std::vector<SweepPoint> success_sweep(const Policy& policy, const RobotModel& model,
                                      const TrajectorySpec& trajectory, const SweepSpec& sweep,
                                      const EnvOptions& options);

std::string sweep_to_csv(const std::vector<SweepPoint>& table);

}  // namespace fwsim
