#include "snake/metrics.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace snake {

double joint_energy_rate(const std::vector<double>& torques,
                         const std::vector<double>& rates, double dt,
                         bool signed_power) {
  if (torques.empty() || torques.size() != rates.size()) {
    throw std::invalid_argument("joint_energy_rate: empty or mismatched series");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("joint_energy_rate: dt must be positive");
  }
  // (1/T) * sum p_i * dt with T = n*dt collapses to the plain mean of p_i,
  // which keeps the result invariant under dt as long as the sampled
  // trajectory is the same.
  double acc = 0.0;
  for (std::size_t i = 0; i < torques.size(); ++i) {
    const double p = torques[i] * rates[i];
    acc += signed_power ? p : std::abs(p);
  }
  return acc / static_cast<double>(torques.size());
}

double total_power(const Eigen::VectorXd& per_joint) {
  if (per_joint.size() == 0) {
    throw std::invalid_argument("total_power: no joints");
  }
  return per_joint.sum();
}

double average_power(const Eigen::VectorXd& per_joint) {
  return total_power(per_joint) / static_cast<double>(per_joint.size());
}

EnergyReport run_summary(const RolloutTrace& trace, bool signed_power) {
  const int n = trace.n_steps();
  if (n == 0) {
    throw std::invalid_argument("run_summary: empty trace");
  }
  const std::size_t un = static_cast<std::size_t>(n);
  if (trace.centroid_pos.size() != un || trace.torques.size() != un ||
      trace.rates.size() != un) {
    throw std::invalid_argument("run_summary: trace columns have mismatched lengths");
  }
  const int k = trace.n_joints();
  if (k == 0) {
    throw std::invalid_argument("run_summary: trace has no joints");
  }
  for (int i = 0; i < n; ++i) {
    if (trace.torques[i].size() != k || trace.rates[i].size() != k) {
      throw std::invalid_argument("run_summary: ragged torque/rate rows");
    }
  }

  EnergyReport report;
  report.n_joints = k;
  report.n_steps = n;
  report.per_joint_power.resize(k);
  for (int j = 0; j < k; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = trace.torques[i][j] * trace.rates[i][j];
      acc += signed_power ? p : std::abs(p);
    }
    report.per_joint_power[j] = acc / static_cast<double>(n);
  }
  report.total_power = total_power(report.per_joint_power);
  report.average_power = average_power(report.per_joint_power);

  // First sample inside the goal disc marks arrival. Rows are logged after
  // the step, so the reported time is the clock at the end of that step.
  int goal_index = -1;
  for (int i = 0; i < n; ++i) {
    if ((trace.centroid_pos[i] - trace.target).norm() <= trace.goal_radius) {
      goal_index = i;
      break;
    }
  }
  if (goal_index >= 0) {
    report.time_to_goal = trace.time[static_cast<std::size_t>(goal_index)];
  }

  const int last = (goal_index >= 0) ? goal_index : n - 1;
  const double elapsed = trace.time[static_cast<std::size_t>(last)];
  const double d0 = (trace.initial_centroid - trace.target).norm();
  const double d1 = (trace.centroid_pos[static_cast<std::size_t>(last)] - trace.target).norm();
  report.mean_forward_velocity = elapsed > 0.0 ? (d0 - d1) / elapsed : 0.0;
  return report;
}

}  // namespace snake
