#pragma once

#include <string>
#include <vector>

#include "fwsim/math.hpp"

namespace fwsim {

struct RobotModel;
struct SimState;

/// Ambient fluid and wind. Wind is a constant world-frame vector; it is
/// resampled per episode by the randomization stage, never within one.
struct Environment {
  double fluid_density = 1.225;         // kg/m^3
  double kinematic_viscosity = 1.5e-5;  // m^2/s
  Vec3 wind_velocity = Vec3::Zero();    // m/s, world frame
};

/// Dimensionless fluid coefficients, shared by all bodies.
struct FluidCoefficients {
  double c_d_blunt = 0.2;
  double c_d_slender = 0.12;
  double c_d_angular = 1.5;
  double c_kutta = 3.14;
  double c_magnus = 1.0;
};

/// Per-body fluid constants. Defaults are derived from the body geometry
/// at model build time and are plain stored parameters afterwards, so the
/// randomization stage can scale them independently of the geometry.
struct FluidBodyParams {
  Vec3 added_mass = Vec3::Zero();       // kg, per body axis
  Vec3 added_inertia = Vec3::Zero();    // kg m^2, per body axis
  double volume = 0.0;                  // m^3
  double area_max = 0.0;                // m^2, max silhouette over directions
  double moment_drag = 0.0;             // m^5, angular-drag reference
  double moment_max = 0.0;              // m^5, >= moment_drag
  double viscous_radius = 0.0;          // m
  Vec3 semi_axes = Vec3::Zero();        // m, body-frame aligned
};

enum class WrenchFrame { BodyCom };

/// 6-D force/torque acting at a body's center of mass.
struct Wrench {
  Vec3 force = Vec3::Zero();   // N
  Vec3 torque = Vec3::Zero();  // N m
  WrenchFrame frame = WrenchFrame::BodyCom;

  Wrench& operator+=(const Wrench& o) {
    force += o.force;
    torque += o.torque;
    return *this;
  }
};

/// Instantaneous body kinematics relative to the airflow, all in the body
/// frame. Accelerations come from the previous step, which keeps the force
/// model itself stateless.
struct BodyAirKinematics {
  Vec3 velocity = Vec3::Zero();      // m/s, CoM velocity minus wind
  Vec3 omega = Vec3::Zero();         // rad/s
  Vec3 accel = Vec3::Zero();         // m/s^2, body-frame derivative of velocity
  Vec3 omega_dot = Vec3::Zero();     // rad/s^2
};

/// Individual force/torque contributions, retrievable per term.
struct AeroTerms {
  Vec3 f_added = Vec3::Zero();
  Vec3 f_drag = Vec3::Zero();
  Vec3 f_magnus = Vec3::Zero();
  Vec3 f_kutta = Vec3::Zero();
  Vec3 f_viscous = Vec3::Zero();
  Vec3 tau_added = Vec3::Zero();
  Vec3 tau_drag = Vec3::Zero();
  Vec3 tau_viscous = Vec3::Zero();

  Wrench total() const {
    Wrench w;
    w.force = f_added + f_drag + f_magnus + f_kutta + f_viscous;
    w.torque = tau_added + tau_drag + tau_viscous;
    return w;
  }
};

/// Silhouette area of an ellipsoid normal to a unit direction:
/// pi * sqrt((b c u_x)^2 + (a c u_y)^2 + (a b u_z)^2).
/// Throws std::invalid_argument on a zero direction.
double projected_area(const Vec3& semi_axes, const Vec3& unit_direction);

/// Velocity component lying in the plane of the two largest semi-axes.
Vec3 surface_parallel_velocity(const Vec3& semi_axes, const Vec3& velocity);

/// Full five-term ellipsoid model (added mass, drag, Magnus, Kutta,
/// viscous resistance). Throws std::invalid_argument on non-finite input.
AeroTerms ellipsoid_wrench(const BodyAirKinematics& kin, const FluidBodyParams& params,
                           const FluidCoefficients& coeffs, const Environment& env);

/// Reduced model for non-lifting bodies: added mass + viscous resistance only.
AeroTerms inertia_box_wrench(const BodyAirKinematics& kin, const FluidBodyParams& params,
                             const Environment& env);

/// Lamb added-mass vector (kg) and added rotational inertia (kg m^2) of a
/// solid ellipsoid in fluid of density rho; used for the stored defaults.
Vec3 ellipsoid_added_mass(const Vec3& semi_axes, double rho);
Vec3 ellipsoid_added_inertia(const Vec3& semi_axes, double rho);

/// Derives the full stored parameter set from geometry.
FluidBodyParams make_fluid_params(const Vec3& semi_axes, double rho);

/// Air-relative kinematics for every body, body frame, using the previous
/// step's generalized acceleration held in the state.
std::vector<BodyAirKinematics> body_air_kinematics(const RobotModel& model, const SimState& state,
                                                   const Environment& env);

/// Per-body Cartesian wrenches according to each body's fluid-model tag.
std::vector<Wrench> compute_aero_wrenches(const RobotModel& model, const SimState& state,
                                          const Environment& env);

/// u_aero = sum_i J_i^T F_i, with body-frame wrenches rotated to the world
/// frame before the Jacobian-transpose mapping. Throws on a size mismatch.
VecX generalized_aero_force(const RobotModel& model, const SimState& state,
                            const std::vector<Wrench>& wrenches);

/// CSV dump of the per-term breakdown for every fluid body at one state.
std::string aero_breakdown_csv(const RobotModel& model, const SimState& state,
                               const Environment& env);

}  // namespace fwsim
