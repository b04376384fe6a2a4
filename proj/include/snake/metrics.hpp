#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "snake/dynamics.hpp"

namespace snake {

// Per-step record of one rollout, the unit the energy metrics and the trace
// CSV are computed from. One row per control step, written after the step.
struct RolloutTrace {
  double dt = 1.0 / 30.0;
  Vec2 target = Vec2(0.0, -10.0);
  double goal_radius = 0.5;
  Vec2 initial_centroid = Vec2::Zero();

  std::vector<double> time;       // s, simulation clock after the step
  std::vector<Vec2> head;         // head link position
  std::vector<Vec2> centroid_pos; // mass-weighted centroid
  std::vector<double> reward;
  std::vector<char> done;
  std::vector<Eigen::VectorXd> angles;   // per joint, rad
  std::vector<Eigen::VectorXd> rates;    // per joint, rad/s
  std::vector<Eigen::VectorXd> torques;  // per joint, N*m (clamped servo output)

  int n_steps() const { return static_cast<int>(time.size()); }
  int n_joints() const { return time.empty() ? 0 : static_cast<int>(torques.front().size()); }
};

// Energy and locomotion summary of one rollout.
struct EnergyReport {
  Eigen::VectorXd per_joint_power;      // W, q_k
  double total_power = 0.0;             // W, q
  double average_power = 0.0;           // W, q_average
  std::optional<double> time_to_goal;   // s, absent if the goal was never reached
  double mean_forward_velocity = 0.0;   // m/s
  int n_joints = 0;
  int n_steps = 0;
};

// Time-averaged mechanical power of one joint: (1/T) * sum |tau * rate| * dt.
// Actuators cannot harvest negative work, so the default integrates the
// absolute value; the signed variant is kept for sensitivity analysis.
double joint_energy_rate(const std::vector<double>& torques,
                         const std::vector<double>& rates, double dt,
                         bool signed_power = false);

// Sum of per-joint powers over all joints.
double total_power(const Eigen::VectorXd& per_joint);

// total_power / K.
double average_power(const Eigen::VectorXd& per_joint);

EnergyReport run_summary(const RolloutTrace& trace, bool signed_power = false);

}  // namespace snake
