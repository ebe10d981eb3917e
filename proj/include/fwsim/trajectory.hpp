#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fwsim/math.hpp"
#include "fwsim/model.hpp"

namespace fwsim {

/// One 3-second skill command: forward speed, climb rate, yaw rate.
struct Command {
  double forward_speed = 0.0;  // m/s, >= 0
  double z_velocity = 0.0;     // m/s
  double yaw_rate = 0.0;       // rad/s
  double duration = 3.0;       // s
};

enum class LoopKind { Full, HalfImmelmann };

/// Vertical circle in the plane containing the current heading. A half loop
/// flips the subsequent segment frame by 180 degrees of yaw (Immelmann).
/// `plane_roll` tilts the loop plane about the heading axis (0 = vertical).
struct LoopPrimitive {
  double radius = 1.0;       // m
  double entry_speed = 3.0;  // m/s
  double plane_roll = 0.0;   // rad
  LoopKind kind = LoopKind::Full;
};

using TrajectorySegment = std::variant<Command, LoopPrimitive>;

struct TrajectorySpec {
  std::vector<TrajectorySegment> segments;
  Vec3 start_position = Vec3::Zero();
  double start_heading = 0.0;  // rad, yaw about world z
};

/// Sampled target path at fixed dt, C0-continuous across segments.
class Trajectory {
 public:
  Trajectory(std::vector<Vec3> positions, double dt);

  double dt() const { return dt_; }
  double duration() const { return dt_ * static_cast<double>(positions_.size() - 1); }
  std::size_t size() const { return positions_.size(); }
  const std::vector<Vec3>& positions() const { return positions_; }

  /// Position at time t; holds the final sample beyond the end and the
  /// first sample before the start.
  Vec3 position_at(double t) const;

 private:
  std::vector<Vec3> positions_;
  double dt_ = 0.02;
};

/// Generates the target path by exact integration of each segment
/// (closed-form arcs and helices). Throws std::invalid_argument for an
/// empty spec. dt defaults to the 50 Hz policy period.
Trajectory generate(const TrajectorySpec& spec, double dt = 0.02);

inline constexpr int kLookaheadSteps = 30;
inline constexpr double kLookaheadDt = 0.02;

/// The 30 upcoming target positions relative to the robot, rotated into the
/// body frame: R^T (p_d(t + k dt) - p_robot), k = 1..30. Holds the final
/// point past the trajectory end.
std::vector<Vec3> lookahead_window(const Trajectory& trajectory, double t, const SimState& state);

/// Text round trip for specs plus CSV export of sampled paths (t, x, y, z).
std::string trajectory_spec_to_config(const TrajectorySpec& spec);
TrajectorySpec trajectory_spec_from_config(const std::string& text);
std::string trajectory_to_csv(const Trajectory& trajectory);

}  // namespace fwsim
