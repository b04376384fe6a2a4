#include "snake/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace snake {

Eigen::VectorXd observe(const RobotState& state, const EpisodeConfig& episode) {
  const LinkState& head = state.links.front();
  const Vec2 nose = head.front_pin();
  const Vec2 com = centroid(state);
  const double com_heading = mean_heading(state);
  const Vec2 com_vel = centroid_velocity(state);

  Vec2 to_target = episode.target - com;
  const double dist = to_target.norm();
  const double forward = dist > 0.0 ? com_vel.dot(to_target / dist) : 0.0;

  Eigen::VectorXd obs(SnakeEnv::kObsDim);
  obs << nose.x(), nose.y(), std::sin(head.heading), std::cos(head.heading),
      com.x(), com.y(), std::sin(com_heading), std::cos(com_heading), forward;
  return obs;
}

double reward(double progress, double forward_velocity, bool reached_goal,
              double goal_reward) {
  if (reached_goal) {
    return goal_reward;
  }
  return std::max(progress, 0.0) + forward_velocity - 1.0;
}

SnakeEnv::SnakeEnv(int n_joints, EpisodeConfig episode, DynamicsConfig dynamics,
                   GaitParams gait, ServoGains gains, FrictionModel friction,
                   ActionMode mode, int action_dim, double link_length,
                   double link_mass)
    : episode_(episode),
      dynamics_(dynamics),
      gait_(gait),
      gains_(gains),
      friction_(friction),
      mode_(mode),
      n_joints_(n_joints),
      action_dim_(action_dim),
      link_length_(link_length),
      link_mass_(link_mass) {
  if (n_joints_ < 1) {
    throw std::invalid_argument("env: need at least one joint");
  }
  if (!(episode_.goal_radius > 0.0) || episode_.max_steps < 1 ||
      !(episode_.lateral_bound > 0.0)) {
    throw std::invalid_argument("env: malformed episode config");
  }
  if (!(episode_.omega_min > 0.0) || !(episode_.omega_min < episode_.omega_max)) {
    throw std::invalid_argument("env: malformed omega range");
  }
  if (mode_ == ActionMode::SharedSpeed && action_dim_ != 1) {
    throw std::invalid_argument("env: shared-speed mode takes a single action value");
  }
  if (action_dim_ < 1 || action_dim_ > n_joints_) {
    throw std::invalid_argument("env: action_dim out of range");
  }
}

Eigen::VectorXd SnakeEnv::reset(std::uint64_t seed) {
  (void)seed;  // the start pose is fixed; exploration noise lives in the policy
  state_ = build_robot(n_joints_, link_length_, link_mass_);
  // Face the target: nose at the origin, body trailing along +y behind it.
  const double half_len = 0.5 * link_length_;
  for (int i = 0; i <= n_joints_; ++i) {
    state_.links[i].position = Vec2(0.0, half_len + i * link_length_);
    state_.links[i].heading = -0.5 * M_PI;
  }
  // Start the wave with the commanded posture antisymmetric about the body
  // center (a pure time shift of the gait); together with the soft-start
  // amplitude ramp in step() this keeps the start transient from kicking the
  // robot into a permanent heading tilt.
  start_phase_ = 0.5 * (n_joints_ - 1) * gait_.resolved_phase_offset(n_joints_);
  phases_ = Eigen::VectorXd::Constant(n_joints_, start_phase_);
  prev_distance_ = (centroid(state_) - episode_.target).norm();
  steps_ = 0;
  needs_reset_ = false;
  return observe(state_, episode_);
}

Eigen::VectorXd SnakeEnv::commanded_omegas(const Eigen::VectorXd& action) const {
  if (action.size() != action_dim_) {
    throw std::invalid_argument("env: action dimension mismatch");
  }
  const double mid = 0.5 * (episode_.omega_min + episode_.omega_max);
  const double half = 0.5 * (episode_.omega_max - episode_.omega_min);
  const auto to_omega = [&](double u) {
    return mid + half * std::clamp(u, -1.0, 1.0);
  };

  Eigen::VectorXd omegas(n_joints_);
  if (mode_ == ActionMode::SharedSpeed || action_dim_ == 1) {
    omegas.setConstant(to_omega(action[0]));
    return omegas;
  }
  // Spread the action entries evenly along the body and interpolate between
  // neighbouring entries for the joints in between.
  for (int j = 0; j < n_joints_; ++j) {
    const double x = n_joints_ == 1
                         ? 0.0
                         : static_cast<double>(j) * (action_dim_ - 1) / (n_joints_ - 1);
    const int lo = std::min(static_cast<int>(x), action_dim_ - 2);
    const double frac = x - lo;
    omegas[j] = to_omega((1.0 - frac) * action[lo] + frac * action[lo + 1]);
  }
  return omegas;
}

SnakeEnv::StepResult SnakeEnv::step(const Eigen::VectorXd& action) {
  if (needs_reset_) {
    throw std::logic_error("env: step called before reset");
  }
  if (!action.allFinite()) {
    throw std::invalid_argument("env: non-finite action");
  }

  const Eigen::VectorXd omegas = commanded_omegas(action);
  phases_ += omegas * dynamics_.dt_control;
  Eigen::VectorXd targets = serpenoid_targets_at(
      phases_, gait_.amplitude, gait_.resolved_phase_offset(n_joints_));
  // Soft start: fade the commanded amplitude in over the first two wave
  // cycles so the straight robot eases into the steady gait instead of being
  // kicked into a permanent heading offset.
  constexpr double kRampCycles = 2.0;
  for (int j = 0; j < n_joints_; ++j) {
    const double progress =
        (phases_[j] - start_phase_) / (2.0 * M_PI * kRampCycles);
    targets[j] *= std::min(1.0, progress);
  }

  StepResult result;
  result.angles = joint_angles(state_);
  result.rates = joint_rates(state_);
  state_ = snake::step(state_, targets, gains_, friction_, dynamics_,
                       &result.torques);
  ++steps_;

  result.obs = observe(state_, episode_);
  const double dist = (centroid(state_) - episode_.target).norm();
  const double progress = prev_distance_ - dist;
  prev_distance_ = dist;

  result.reached_goal = dist <= episode_.goal_radius;
  result.out_of_bounds =
      !result.reached_goal && std::abs(result.obs[4]) > episode_.lateral_bound;
  result.timed_out =
      !result.reached_goal && !result.out_of_bounds && steps_ >= episode_.max_steps;

  result.reward =
      reward(progress, result.obs[8], result.reached_goal, episode_.goal_reward);
  if (result.out_of_bounds) {
    result.reward += episode_.lateral_penalty;
  }
  result.done = result.reached_goal || result.out_of_bounds || result.timed_out;
  if (result.done) {
    needs_reset_ = true;
  }
  return result;
}

void SnakeEnv::init_trace(RolloutTrace& trace) const {
  trace = RolloutTrace{};
  trace.dt = dynamics_.dt_control;
  trace.target = episode_.target;
  trace.goal_radius = episode_.goal_radius;
  trace.initial_centroid = centroid(state_);
}

void SnakeEnv::append_trace_row(RolloutTrace& trace, const StepResult& result) const {
  trace.time.push_back(state_.time);
  trace.head.push_back(state_.links.front().front_pin());
  trace.centroid_pos.push_back(centroid(state_));
  trace.reward.push_back(result.reward);
  trace.done.push_back(result.done ? 1 : 0);
  trace.angles.push_back(result.angles);
  trace.rates.push_back(result.rates);
  trace.torques.push_back(result.torques);
}

}  // namespace snake
