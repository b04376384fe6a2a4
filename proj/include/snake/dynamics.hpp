#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace snake {

using Vec2 = Eigen::Vector2d;

// Thrown by step() when the constraint solver blows up and produces
// non-finite state. Callers should reduce the substep size.
class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One rigid module of the snake. Headings are stored unwrapped; all
// consumers go through sin/cos or wrapped differences.
struct LinkState {
  Vec2 position = Vec2::Zero();  // center of mass, m
  double heading = 0.0;          // body-axis angle in world frame, rad
  Vec2 lin_vel = Vec2::Zero();   // m/s
  double ang_vel = 0.0;          // rad/s
  double mass = 0.1;             // kg
  double inertia = 0.0;          // kg*m^2 about the center
  double half_len = 0.125;       // m, center to either joint pin

  Vec2 axis() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 normal() const { return {-std::sin(heading), std::cos(heading)}; }
  Vec2 front_pin() const { return position + half_len * axis(); }
  Vec2 rear_pin() const { return position - half_len * axis(); }
};

// Full planar state of the robot: K+1 links (head first) plus the clock.
struct RobotState {
  std::vector<LinkState> links;
  double time = 0.0;

  int joint_count() const { return static_cast<int>(links.size()) - 1; }
};

// PD position servo with hard torque saturation.
struct ServoGains {
  double kp = 20.0;      // N*m/rad
  double kd = 0.5;       // N*m*s/rad
  double tau_max = 10.0; // N*m
};

// Viscous ground friction, anisotropic between the body axis and its normal.
struct FrictionModel {
  double c_n = 8.0;     // N*s/m, resisting motion normal to the body axis
  double c_t = 0.08;    // N*s/m, along the body axis
  double c_rot = 0.05;  // N*m*s/rad
};

struct DynamicsConfig {
  double dt_control = 1.0 / 30.0;
  int substeps = 8;
  int solver_iters = 16;
  double baumgarte_beta = 0.2;
  double gravity = 9.8;  // informational; motion is strictly planar
};

// Signed difference wrapped to (-pi, pi].
double wrap_angle(double angle);

// Straight chain along the y axis, head link centered at the origin facing
// +y and the body trailing down the -y half-axis. Velocities zero.
RobotState build_robot(int n_joints, double link_length, double mass);

// Relative angle / rate of joint j (0-based), between links j and j+1.
double joint_angle(const RobotState& state, int joint);
double joint_rate(const RobotState& state, int joint);
Eigen::VectorXd joint_angles(const RobotState& state);
Eigen::VectorXd joint_rates(const RobotState& state);

// clamp(kp*(target - angle) - kd*rate, -tau_max, +tau_max)
double servo_torque(double joint_angle, double joint_rate, double target,
                    const ServoGains& gains);

// Viscous friction wrench on one link: force and torque about its center.
struct FrictionWrench {
  Vec2 force;
  double torque;
};
FrictionWrench friction_force(const LinkState& link, const FrictionModel& model);

// Advances exactly dt_control seconds. Deterministic; equal inputs give
// bit-identical outputs. If applied_torques is non-null it receives the
// clamped servo torque of the first substep for each joint, which is the
// per-step torque sample used by the energy metrics.
RobotState step(const RobotState& state, const Eigen::VectorXd& joint_targets,
                const ServoGains& gains, const FrictionModel& friction,
                const DynamicsConfig& config,
                Eigen::VectorXd* applied_torques = nullptr);

// Aggregates used by the observation builder and by tests.
double total_mass(const RobotState& state);
Vec2 centroid(const RobotState& state);
Vec2 centroid_velocity(const RobotState& state);
double mean_heading(const RobotState& state);  // atan2 of mean sin/cos
Vec2 linear_momentum(const RobotState& state);
double kinetic_energy(const RobotState& state);

// Largest joint-pin gap, for constraint-coherence checks.
double max_joint_gap(const RobotState& state);

}  // namespace snake
