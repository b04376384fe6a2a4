#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "snake/env.hpp"
#include "snake/nn.hpp"
#include "snake/rng.hpp"

namespace snake {

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;  // raw (unclipped) policy sample
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;  // critic estimate at collection time
  bool done = false;
};

// Fixed-horizon rollout storage. finalize() computes GAE advantages/returns
// and normalizes the advantages to zero mean, unit std.
class RolloutBuffer {
 public:
  RolloutBuffer(int capacity, int obs_dim, int act_dim);

  void add(const Transition& t);
  void set_bootstrap_value(double v) { bootstrap_value_ = v; }
  void finalize(double gamma, double lambda);

  int size() const { return count_; }
  bool finalized() const { return finalized_; }
  double bootstrap_value() const { return bootstrap_value_; }

  const Eigen::MatrixXd& obs() const { return obs_; }
  const Eigen::MatrixXd& actions() const { return actions_; }
  const Eigen::VectorXd& log_probs() const { return log_probs_; }
  const Eigen::VectorXd& rewards() const { return rewards_; }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<char>& dones() const { return dones_; }
  const Eigen::VectorXd& advantages() const;
  const Eigen::VectorXd& returns() const;

 private:
  Eigen::MatrixXd obs_, actions_;
  Eigen::VectorXd log_probs_, rewards_, values_;
  std::vector<char> dones_;
  Eigen::VectorXd advantages_, returns_;
  double bootstrap_value_ = 0.0;
  int count_ = 0;
  bool finalized_ = false;
};

struct PpoConfig {
  int rollout_horizon = 20000;
  double gamma = 0.95;
  double clip_eps = 0.2;
  double gae_lambda = 0.95;
  double vf_coef = 0.5;
  int epochs = 20;
  int minibatch = 4096;
  double learning_rate = 2e-4;
  double entropy_coef = 0.0;
  long total_steps = 150000;

  void validate() const;
};

struct TrpoConfig {
  int batch = 2000;
  double gamma = 0.99;
  double gae_lambda = 0.98;
  double kl_delta = 0.01;
  int epochs = 20;  // critic fitting passes
  int cg_iters = 10;
  double cg_damping = 0.1;
  int backtracks = 10;
  double critic_lr = 2e-4;
  int critic_minibatch = 256;
  long total_steps = 100000;

  void validate() const;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t, advantages are the
// (gamma*lambda)-discounted delta sums cut at episode ends; the tail past the
// horizon is bootstrapped with `bootstrap_value`.
GaeResult compute_gae(const Eigen::VectorXd& rewards,
                      const Eigen::VectorXd& values,
                      const std::vector<char>& dones, double bootstrap_value,
                      double gamma, double lambda);

// Clipped surrogate contribution of one sample, to be maximized.
double ppo_surrogate(double log_prob_new, double log_prob_old,
                     double advantage, double clip_eps);

struct UpdateStats {
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double surrogate_improvement = 0.0;
  int backtracks = 0;     // TRPO: halvings taken by the accepted step
  bool accepted = true;   // TRPO: false when the line search exhausted
};

RolloutBuffer collect_rollout(const GaussianPolicy& policy, const Mlp& critic,
                              SnakeEnv& env, int horizon, Rng& rng);

UpdateStats ppo_update(GaussianPolicy& policy, Mlp& critic,
                       const RolloutBuffer& buffer, const PpoConfig& cfg,
                       FlatAdam& policy_adam, FlatAdam& critic_adam, Rng& rng);

UpdateStats trpo_update(GaussianPolicy& policy, Mlp& critic,
                        const RolloutBuffer& buffer, const TrpoConfig& cfg,
                        FlatAdam& critic_adam, Rng& rng);

// Solves A x = b for symmetric positive-definite A given only matrix-vector
// products, the standard inner loop of the natural-gradient step.
Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& mvp,
    const Eigen::VectorXd& b, int iters, double residual_tol = 1e-10);

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  double mean_time_to_goal = 0.0;  // NaN when no episode reached the goal
  int episodes = 0;
};

// Deterministic (mean-action) evaluation episodes.
EvalResult evaluate_policy(const GaussianPolicy& policy, SnakeEnv& env,
                           int episodes, std::uint64_t seed);

}  // namespace snake
