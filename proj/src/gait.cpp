#include "snake/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace snake {

double GaitParams::resolved_phase_offset(int n_joints) const {
  if (phase_offset != 0.0) return phase_offset;
  return 2.0 * M_PI / static_cast<double>(n_joints);
}

Eigen::VectorXd serpenoid_targets_at(const Eigen::VectorXd& phases,
                                     double amplitude, double phase_offset) {
  Eigen::VectorXd targets(phases.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    targets[i] =
        amplitude * std::sin(phases[i] - static_cast<double>(i) * phase_offset);
  }
  return targets;
}

Eigen::VectorXd serpenoid_targets(double t, const GaitParams& params,
                                  int n_joints) {
  if (n_joints < 1) throw std::invalid_argument("serpenoid_targets: n_joints must be >= 1");
  const double phi = params.resolved_phase_offset(n_joints);
  Eigen::VectorXd phases =
      Eigen::VectorXd::Constant(n_joints, params.omega * t);
  return serpenoid_targets_at(phases, params.amplitude, phi);
}

}  // namespace snake
