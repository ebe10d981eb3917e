#include "fwsim/trajectory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fwsim/io.hpp"

namespace fwsim {

namespace {

struct Cursor {
  Vec3 position;
  double heading;
};

/// Exact position of a constant-twist command at elapsed time s.
Vec3 command_position(const Command& cmd, const Cursor& start, double s) {
  Vec3 p = start.position;
  p.z() += cmd.z_velocity * s;
  if (std::abs(cmd.yaw_rate) < 1e-12) {
    p.x() += cmd.forward_speed * s * std::cos(start.heading);
    p.y() += cmd.forward_speed * s * std::sin(start.heading);
  } else {
    // Horizontal arc of radius v/omega (a helix when climbing).
    const double r = cmd.forward_speed / cmd.yaw_rate;
    const double h0 = start.heading;
    const double h = h0 + cmd.yaw_rate * s;
    p.x() += r * (std::sin(h) - std::sin(h0));
    p.y() += r * (std::cos(h0) - std::cos(h));
  }
  return p;
}

Vec3 loop_position(const LoopPrimitive& loop, const Cursor& start, double theta) {
  // Circle in the plane spanned by the heading and the (possibly rolled)
  // vertical; starts tangent to the heading, curving upward.
  const Vec3 forward(std::cos(start.heading), std::sin(start.heading), 0.0);
  const Vec3 left(-std::sin(start.heading), std::cos(start.heading), 0.0);
  const Vec3 up = std::cos(loop.plane_roll) * Vec3::UnitZ() + std::sin(loop.plane_roll) * left;
  return start.position + loop.radius * std::sin(theta) * forward +
         loop.radius * (1.0 - std::cos(theta)) * up;
}

}  // namespace

Trajectory::Trajectory(std::vector<Vec3> positions, double dt)
    : positions_(std::move(positions)), dt_(dt) {
  if (positions_.empty()) throw std::invalid_argument("trajectory: no samples");
  if (!(dt_ > 0.0)) throw std::invalid_argument("trajectory: dt must be positive");
}

Vec3 Trajectory::position_at(double t) const {
  if (t <= 0.0) return positions_.front();
  const double idx = t / dt_;
  const auto lo = static_cast<std::size_t>(idx);
  if (lo + 1 >= positions_.size()) return positions_.back();
  const double frac = idx - static_cast<double>(lo);
  return (1.0 - frac) * positions_[lo] + frac * positions_[lo + 1];
}

Trajectory generate(const TrajectorySpec& spec, double dt) {
  if (spec.segments.empty()) throw std::invalid_argument("generate: empty trajectory spec");
  if (!(dt > 0.0)) throw std::invalid_argument("generate: dt must be positive");

  // Segment start times and entry cursors, then the cursor after the whole
  // segment (closed forms keep the path C0 at every boundary).
  std::vector<double> seg_start;
  std::vector<Cursor> seg_cursor;
  std::vector<double> seg_duration;
  Cursor cursor{spec.start_position, spec.start_heading};
  double total = 0.0;
  for (const auto& segment : spec.segments) {
    seg_start.push_back(total);
    seg_cursor.push_back(cursor);
    if (const auto* cmd = std::get_if<Command>(&segment)) {
      if (!(cmd->duration > 0.0)) throw std::invalid_argument("generate: command duration <= 0");
      if (cmd->forward_speed < 0.0) throw std::invalid_argument("generate: negative speed");
      seg_duration.push_back(cmd->duration);
      cursor.position = command_position(*cmd, cursor, cmd->duration);
      cursor.heading += cmd->yaw_rate * cmd->duration;
      total += cmd->duration;
    } else {
      const auto& loop = std::get<LoopPrimitive>(segment);
      if (!(loop.radius > 0.0) || !(loop.entry_speed > 0.0)) {
        throw std::invalid_argument("generate: loop needs positive radius and entry speed");
      }
      const double total_angle = loop.kind == LoopKind::Full ? 2.0 * M_PI : M_PI;
      const double duration = loop.radius * total_angle / loop.entry_speed;
      seg_duration.push_back(duration);
      cursor.position = loop_position(loop, cursor, total_angle);
      if (loop.kind == LoopKind::HalfImmelmann) cursor.heading += M_PI;
      total += duration;
    }
  }

  const auto nsamples = static_cast<std::size_t>(std::floor(total / dt + 1e-9)) + 1;
  std::vector<Vec3> samples;
  samples.reserve(nsamples);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < nsamples; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (seg + 1 < spec.segments.size() && t >= seg_start[seg] + seg_duration[seg] - 1e-12) ++seg;
    const double s = std::min(t - seg_start[seg], seg_duration[seg]);
    if (const auto* cmd = std::get_if<Command>(&spec.segments[seg])) {
      samples.push_back(command_position(*cmd, seg_cursor[seg], s));
    } else {
      const auto& loop = std::get<LoopPrimitive>(spec.segments[seg]);
      samples.push_back(loop_position(loop, seg_cursor[seg], loop.entry_speed / loop.radius * s));
    }
  }
  return Trajectory(samples, dt);
}

std::vector<Vec3> lookahead_window(const Trajectory& trajectory, double t, const SimState& state) {
  std::vector<Vec3> points;
  points.reserve(kLookaheadSteps);
  const Mat3 rot_t = state.base_orientation.normalized().toRotationMatrix().transpose();
  for (int k = 1; k <= kLookaheadSteps; ++k) {
    const Vec3 target = trajectory.position_at(t + k * kLookaheadDt);
    points.push_back(rot_t * (target - state.base_position));
  }
  return points;
}

std::string trajectory_spec_to_config(const TrajectorySpec& spec) {
  KeyValueConfig cfg;
  cfg.set_string("schema", "fwsim-trajectory-v1");
  cfg.set_vec3("start_position_m", spec.start_position);
  cfg.set_double("start_heading_rad", spec.start_heading);
  cfg.set_int("num_segments", static_cast<std::int64_t>(spec.segments.size()));
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const std::string p = "segment." + std::to_string(i) + ".";
    if (const auto* cmd = std::get_if<Command>(&spec.segments[i])) {
      cfg.set_string(p + "type", "command");
      cfg.set_double(p + "forward_speed_mps", cmd->forward_speed);
      cfg.set_double(p + "z_velocity_mps", cmd->z_velocity);
      cfg.set_double(p + "yaw_rate_rad_s", cmd->yaw_rate);
      cfg.set_double(p + "duration_s", cmd->duration);
    } else {
      const auto& loop = std::get<LoopPrimitive>(spec.segments[i]);
      cfg.set_string(p + "type", loop.kind == LoopKind::Full ? "loop" : "immelmann");
      cfg.set_double(p + "radius_m", loop.radius);
      cfg.set_double(p + "entry_speed_mps", loop.entry_speed);
      cfg.set_double(p + "plane_roll_rad", loop.plane_roll);
    }
  }
  return cfg.serialize();
}

TrajectorySpec trajectory_spec_from_config(const std::string& text) {
  const KeyValueConfig cfg = KeyValueConfig::parse(text);
  if (cfg.get_string_or("schema", "") != "fwsim-trajectory-v1") {
    throw std::runtime_error("trajectory config: unknown or missing schema tag");
  }
  TrajectorySpec spec;
  spec.start_position = cfg.get_vec3_or("start_position_m", Vec3::Zero());
  spec.start_heading = cfg.get_double_or("start_heading_rad", 0.0);
  const int n = static_cast<int>(cfg.get_int("num_segments"));
  for (int i = 0; i < n; ++i) {
    const std::string p = "segment." + std::to_string(i) + ".";
    const std::string type = cfg.get_string(p + "type");
    if (type == "command") {
      Command cmd;
      cmd.forward_speed = cfg.get_double(p + "forward_speed_mps");
      cmd.z_velocity = cfg.get_double(p + "z_velocity_mps");
      cmd.yaw_rate = cfg.get_double(p + "yaw_rate_rad_s");
      cmd.duration = cfg.get_double(p + "duration_s");
      spec.segments.emplace_back(cmd);
    } else if (type == "loop" || type == "immelmann") {
      LoopPrimitive loop;
      loop.radius = cfg.get_double(p + "radius_m");
      loop.entry_speed = cfg.get_double(p + "entry_speed_mps");
      loop.plane_roll = cfg.get_double_or(p + "plane_roll_rad", 0.0);
      loop.kind = type == "loop" ? LoopKind::Full : LoopKind::HalfImmelmann;
      spec.segments.emplace_back(loop);
    } else {
      throw std::runtime_error("trajectory config: unknown segment type " + type);
    }
  }
  return spec;
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
  CsvWriter csv({"t_s", "x_m", "y_m", "z_m"});
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Vec3& p = trajectory.positions()[i];
    csv.append_row({static_cast<double>(i) * trajectory.dt(), p.x(), p.y(), p.z()});
  }
  return csv.serialize();
}

}  // namespace fwsim
