#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "snake/dynamics.hpp"
#include "snake/gait.hpp"
#include "snake/metrics.hpp"

namespace snake {

// How raw policy outputs map to serpenoid speeds: one shared omega for the
// whole body, or a handful of values interpolated across the joints.
enum class ActionMode { SharedSpeed, PerGroup };

struct EpisodeConfig {
  Vec2 target = Vec2(0.0, -10.0);
  double goal_radius = 0.5;
  int max_steps = 3000;
  double lateral_bound = 1.5;
  double lateral_penalty = -100.0;
  double goal_reward = 100.0;
  double omega_min = 0.1;
  double omega_max = 6.0;
};

// 9-dim observation: head x/y, sin/cos of head heading, centroid x/y,
// sin/cos of centroid heading, centroid speed toward the target. The head
// position is the nose (front pin of the first link).
Eigen::VectorXd observe(const RobotState& state, const EpisodeConfig& episode);

// progress = previous minus current centroid-to-target distance (signed).
// Backward motion earns no progress credit but the velocity term still bites.
double reward(double progress, double forward_velocity, bool reached_goal,
              double goal_reward = 100.0);

class SnakeEnv {
 public:
  static constexpr int kObsDim = 9;

  SnakeEnv(int n_joints = 17, EpisodeConfig episode = {},
           DynamicsConfig dynamics = {}, GaitParams gait = {},
           ServoGains gains = {}, FrictionModel friction = {},
           ActionMode mode = ActionMode::SharedSpeed, int action_dim = 1,
           double link_length = 0.25, double link_mass = 0.1);

  struct StepResult {
    Eigen::VectorXd obs;
    double reward = 0.0;
    bool done = false;
    bool reached_goal = false;
    bool out_of_bounds = false;
    bool timed_out = false;
    // Sampled at the start of the control step, the instant the recorded
    // torques act; this is what the energy metrics integrate.
    Eigen::VectorXd angles;
    Eigen::VectorXd rates;
    Eigen::VectorXd torques;
  };

  // The start pose is fixed (nose at the origin, body trailing along +y,
  // target straight ahead); the seed exists for interface symmetry only.
  Eigen::VectorXd reset(std::uint64_t seed = 0);
  StepResult step(const Eigen::VectorXd& action);

  // Commanded per-joint speeds for a raw action in [-1, 1]^action_dim.
  Eigen::VectorXd commanded_omegas(const Eigen::VectorXd& action) const;

  Eigen::VectorXd observation() const { return observe(state_, episode_); }
  const RobotState& state() const { return state_; }
  const EpisodeConfig& episode() const { return episode_; }
  const DynamicsConfig& dynamics() const { return dynamics_; }
  const GaitParams& gait() const { return gait_; }
  int n_joints() const { return n_joints_; }
  int action_dim() const { return action_dim_; }
  int steps_taken() const { return steps_; }
  bool needs_reset() const { return needs_reset_; }

  void init_trace(RolloutTrace& trace) const;
  void append_trace_row(RolloutTrace& trace, const StepResult& result) const;

 private:
  EpisodeConfig episode_;
  DynamicsConfig dynamics_;
  GaitParams gait_;
  ServoGains gains_;
  FrictionModel friction_;
  ActionMode mode_;
  int n_joints_;
  int action_dim_;
  double link_length_;
  double link_mass_;

  RobotState state_;
  Eigen::VectorXd phases_;  // per-joint accumulated gait phase
  double start_phase_ = 0.0;
  double prev_distance_ = 0.0;
  int steps_ = 0;
  bool needs_reset_ = true;
};

}  // namespace snake
