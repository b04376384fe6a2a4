#pragma once

#include <Eigen/Core>

namespace snake {

// Serpenoid wave parameters: theta_i(t) = A * sin(omega * t - (i - 1) * phi).
struct GaitParams {
  double amplitude = 0.6;     // rad
  double omega = 3.0;         // rad/s
  double phase_offset = 0.0;  // rad between adjacent joints; 0 means "2*pi/K"

  // Joint-to-joint offset actually used for a K-joint robot.
  double resolved_phase_offset(int n_joints) const;
};

// Target angles from per-joint wave phases: theta_i = A * sin(phase_i - (i-1)*phi).
// The environment drives this with accumulated phases so that speed changes
// never teleport the targets; with phase_i = omega * t it is the textbook wave.
Eigen::VectorXd serpenoid_targets_at(const Eigen::VectorXd& phases,
                                     double amplitude, double phase_offset);

// Scripted controller: evaluate the wave at absolute time t for all joints.
Eigen::VectorXd serpenoid_targets(double t, const GaitParams& params,
                                  int n_joints);

}  // namespace snake
