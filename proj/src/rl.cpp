#include "snake/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace snake {

RolloutBuffer::RolloutBuffer(int capacity, int obs_dim, int act_dim)
    : obs_(capacity, obs_dim),
      actions_(capacity, act_dim),
      log_probs_(capacity),
      rewards_(capacity),
      values_(capacity) {
  if (capacity < 1 || obs_dim < 1 || act_dim < 1) {
    throw std::invalid_argument("RolloutBuffer: bad dimensions");
  }
  dones_.reserve(static_cast<std::size_t>(capacity));
}

void RolloutBuffer::add(const Transition& t) {
  if (finalized_) {
    throw std::logic_error("RolloutBuffer: add after finalize");
  }
  if (count_ >= obs_.rows()) {
    throw std::length_error("RolloutBuffer: capacity exceeded");
  }
  if (t.obs.size() != obs_.cols() || t.action.size() != actions_.cols()) {
    throw std::invalid_argument("RolloutBuffer: transition shape mismatch");
  }
  obs_.row(count_) = t.obs.transpose();
  actions_.row(count_) = t.action.transpose();
  log_probs_[count_] = t.log_prob;
  rewards_[count_] = t.reward;
  values_[count_] = t.value;
  dones_.push_back(t.done ? 1 : 0);
  ++count_;
}

void RolloutBuffer::finalize(double gamma, double lambda) {
  if (count_ == 0) {
    throw std::logic_error("RolloutBuffer: finalize on empty buffer");
  }
  if (finalized_) {
    throw std::logic_error("RolloutBuffer: already finalized");
  }
  obs_.conservativeResize(count_, Eigen::NoChange);
  actions_.conservativeResize(count_, Eigen::NoChange);
  log_probs_.conservativeResize(count_);
  rewards_.conservativeResize(count_);
  values_.conservativeResize(count_);

  GaeResult gae = compute_gae(rewards_, values_, dones_, bootstrap_value_, gamma, lambda);
  returns_ = gae.returns;
  const double mean = gae.advantages.mean();
  const double var =
      (gae.advantages.array() - mean).square().sum() / static_cast<double>(count_);
  advantages_ = (gae.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  finalized_ = true;
}

const Eigen::VectorXd& RolloutBuffer::advantages() const {
  if (!finalized_) {
    throw std::logic_error("RolloutBuffer: advantages before finalize");
  }
  return advantages_;
}

const Eigen::VectorXd& RolloutBuffer::returns() const {
  if (!finalized_) {
    throw std::logic_error("RolloutBuffer: returns before finalize");
  }
  return returns_;
}

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) || !(clip_eps > 0.0 && clip_eps < 1.0) ||
      !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("PpoConfig: gamma/clip/lambda out of range");
  }
  if (rollout_horizon < 1 || minibatch < 1 || minibatch > rollout_horizon ||
      epochs < 1) {
    throw std::invalid_argument("PpoConfig: bad horizon/minibatch/epochs");
  }
  if (!(learning_rate > 0.0) || vf_coef < 0.0 || entropy_coef < 0.0 ||
      total_steps < 0) {
    throw std::invalid_argument("PpoConfig: bad learning parameters");
  }
}

void TrpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) ||
      !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("TrpoConfig: gamma/lambda out of range");
  }
  if (!(kl_delta > 0.0) || cg_iters < 1 || cg_damping < 0.0 || backtracks < 1) {
    throw std::invalid_argument("TrpoConfig: bad trust-region parameters");
  }
  if (batch < 1 || epochs < 1 || critic_minibatch < 1 || !(critic_lr > 0.0) ||
      total_steps < 0) {
    throw std::invalid_argument("TrpoConfig: bad batch/critic parameters");
  }
}

GaeResult compute_gae(const Eigen::VectorXd& rewards,
                      const Eigen::VectorXd& values,
                      const std::vector<char>& dones, double bootstrap_value,
                      double gamma, double lambda) {
  const int n = static_cast<int>(rewards.size());
  if (values.size() != n || static_cast<int>(dones.size()) != n) {
    throw std::invalid_argument("compute_gae: length mismatch");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("compute_gae: gamma/lambda out of range");
  }
  GaeResult out;
  out.advantages.resize(n);
  double gae = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double nonterminal = dones[t] ? 0.0 : 1.0;
    const double next_value = (t == n - 1) ? bootstrap_value : values[t + 1];
    const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
    gae = delta + gamma * lambda * nonterminal * gae;
    out.advantages[t] = gae;
  }
  out.returns = out.advantages + values;
  return out;
}

double ppo_surrogate(double log_prob_new, double log_prob_old, double advantage,
                     double clip_eps) {
  const double ratio = std::exp(log_prob_new - log_prob_old);
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

// Flat-parameter gradient of sum_i w_i * log pi(a_i | s_i). The mean-net part
// flows through backward with d(logp)/d(mu) = (a - mu)/sigma^2; the log_std
// part is w_i * (z^2 - 1) summed over samples.
Eigen::VectorXd weighted_logp_grad(const GaussianPolicy& policy,
                                   const ForwardCache& cache,
                                   const Eigen::MatrixXd& means,
                                   const Eigen::MatrixXd& actions,
                                   const Eigen::VectorXd& weights) {
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
  const Eigen::MatrixXd diff = actions - means;

  Eigen::MatrixXd upstream = diff;
  for (int j = 0; j < upstream.cols(); ++j) {
    upstream.col(j) = upstream.col(j).cwiseProduct(weights) * inv_var[j];
  }
  const MlpGrads net_grads = backward(policy.mean_net, cache, upstream);

  Eigen::MatrixXd z2 = diff.cwiseProduct(diff);
  for (int j = 0; j < z2.cols(); ++j) {
    z2.col(j) *= inv_var[j];
  }
  Eigen::VectorXd ls_grad = z2.transpose() * weights;
  ls_grad.array() -= weights.sum();

  Eigen::VectorXd flat(policy_flat_size(policy));
  flat.head(flat_size(policy.mean_net)) = grads_to_flat(policy.mean_net, net_grads);
  flat.tail(policy.log_std.size()) = ls_grad;
  return flat;
}

// KL(old || new) for diagonal Gaussians, averaged over the batch rows.
double mean_gaussian_kl(const Eigen::MatrixXd& mu_old,
                        const Eigen::VectorXd& ls_old,
                        const Eigen::MatrixXd& mu_new,
                        const Eigen::VectorXd& ls_new) {
  const int n = static_cast<int>(mu_old.rows());
  const Eigen::ArrayXd var_old = (2.0 * ls_old.array()).exp();
  const Eigen::ArrayXd inv_var_new = (-2.0 * ls_new.array()).exp();
  double quad = 0.0;
  for (int j = 0; j < mu_old.cols(); ++j) {
    quad += (mu_old.col(j) - mu_new.col(j)).squaredNorm() * inv_var_new[j];
  }
  const double base = (ls_new - ls_old).sum() -
                      0.5 * static_cast<double>(ls_old.size()) +
                      0.5 * (var_old * inv_var_new).sum();
  return base + 0.5 * quad / static_cast<double>(n);
}

void check_params_finite(const GaussianPolicy& policy, const Mlp& critic,
                         const char* who) {
  if (!policy_to_flat(policy).allFinite() || !to_flat(critic).allFinite()) {
    throw std::runtime_error(std::string(who) + ": update failed, parameters diverged");
  }
}

}  // namespace

RolloutBuffer collect_rollout(const GaussianPolicy& policy, const Mlp& critic,
                              SnakeEnv& env, int horizon, Rng& rng) {
  if (horizon < 1) {
    throw std::invalid_argument("collect_rollout: horizon must be >= 1");
  }
  RolloutBuffer buffer(horizon, SnakeEnv::kObsDim,
                       static_cast<int>(policy.log_std.size()));
  Eigen::VectorXd obs = env.needs_reset() ? env.reset() : env.observation();
  bool last_done = false;
  Transition t;
  for (int i = 0; i < horizon; ++i) {
    t.obs = obs;
    auto [action, log_prob] = policy_sample(policy, obs, rng);
    t.action = action;
    t.log_prob = log_prob;
    t.value = forward_one(critic, obs)[0];
    const SnakeEnv::StepResult result = env.step(action);
    t.reward = result.reward;
    t.done = result.done;
    buffer.add(t);
    last_done = result.done;
    obs = result.done ? env.reset() : result.obs;
  }
  buffer.set_bootstrap_value(last_done ? 0.0 : forward_one(critic, obs)[0]);
  return buffer;
}

UpdateStats ppo_update(GaussianPolicy& policy, Mlp& critic,
                       const RolloutBuffer& buffer, const PpoConfig& cfg,
                       FlatAdam& policy_adam, FlatAdam& critic_adam, Rng& rng) {
  cfg.validate();
  if (!buffer.finalized()) {
    throw std::logic_error("ppo_update: buffer not finalized");
  }
  const int n = buffer.size();
  const int mb = std::min(cfg.minibatch, n);
  const int act_dim = static_cast<int>(buffer.actions().cols());

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double sum_ratio = 0.0;
  double sum_clip = 0.0;
  double sum_vloss = 0.0;
  long batches = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += mb) {
      const int b = std::min(mb, n - start);
      Eigen::MatrixXd obs_b(b, buffer.obs().cols());
      Eigen::MatrixXd act_b(b, act_dim);
      Eigen::VectorXd lp_old(b);
      Eigen::VectorXd adv(b);
      Eigen::VectorXd ret(b);
      for (int k = 0; k < b; ++k) {
        const int idx = order[static_cast<std::size_t>(start + k)];
        obs_b.row(k) = buffer.obs().row(idx);
        act_b.row(k) = buffer.actions().row(idx);
        lp_old[k] = buffer.log_probs()[idx];
        adv[k] = buffer.advantages()[idx];
        ret[k] = buffer.returns()[idx];
      }

      ForwardCache cache;
      const Eigen::MatrixXd means = forward(policy.mean_net, obs_b, &cache);
      const Eigen::VectorXd lp_new = gaussian_log_prob(means, policy.log_std, act_b);
      const Eigen::ArrayXd ratio = (lp_new - lp_old).array().exp();

      // The clipped surrogate is flat wherever the clipped branch wins;
      // elsewhere its log-prob derivative is advantage * ratio.
      Eigen::VectorXd coeff(b);
      int clipped = 0;
      for (int k = 0; k < b; ++k) {
        const double r = ratio[k];
        const double unclipped = r * adv[k];
        const double clamped = std::clamp(r, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        coeff[k] = (unclipped <= clamped * adv[k]) ? unclipped : 0.0;
        if (r < 1.0 - cfg.clip_eps || r > 1.0 + cfg.clip_eps) {
          ++clipped;
        }
      }
      coeff /= -static_cast<double>(b);  // descend on the negated surrogate
      Eigen::VectorXd policy_grad = weighted_logp_grad(policy, cache, means, act_b, coeff);
      policy_grad.tail(policy.log_std.size()).array() -= cfg.entropy_coef;

      Eigen::VectorXd policy_params = policy_to_flat(policy);
      policy_adam.update(policy_params, policy_grad);
      policy_from_flat(policy, policy_params);

      ForwardCache vcache;
      const Eigen::VectorXd v = forward(critic, obs_b, &vcache).col(0);
      const Eigen::VectorXd err = v - ret;
      const Eigen::MatrixXd upstream_v =
          (2.0 * cfg.vf_coef / static_cast<double>(b)) * err;
      const MlpGrads critic_grads = backward(critic, vcache, upstream_v);
      Eigen::VectorXd critic_params = to_flat(critic);
      critic_adam.update(critic_params, grads_to_flat(critic, critic_grads));
      from_flat(critic, critic_params);

      sum_ratio += ratio.mean();
      sum_clip += static_cast<double>(clipped) / b;
      sum_vloss += err.squaredNorm() / b;
      ++batches;
    }
  }
  check_params_finite(policy, critic, "ppo_update");

  UpdateStats stats;
  stats.mean_ratio = sum_ratio / static_cast<double>(batches);
  stats.clip_fraction = sum_clip / static_cast<double>(batches);
  stats.value_loss = sum_vloss / static_cast<double>(batches);
  stats.entropy = gaussian_entropy(policy.log_std);
  return stats;
}

UpdateStats trpo_update(GaussianPolicy& policy, Mlp& critic,
                        const RolloutBuffer& buffer, const TrpoConfig& cfg,
                        FlatAdam& critic_adam, Rng& rng) {
  cfg.validate();
  if (!buffer.finalized()) {
    throw std::logic_error("trpo_update: buffer not finalized");
  }
  const int n = buffer.size();
  const Eigen::MatrixXd& obs = buffer.obs();
  const Eigen::MatrixXd& act = buffer.actions();
  const Eigen::VectorXd& adv = buffer.advantages();

  ForwardCache cache;
  const Eigen::MatrixXd means_old = forward(policy.mean_net, obs, &cache);
  const Eigen::VectorXd ls_old = policy.log_std;
  const Eigen::VectorXd lp_old = gaussian_log_prob(means_old, ls_old, act);

  UpdateStats stats;
  stats.accepted = false;
  stats.entropy = gaussian_entropy(policy.log_std);

  const Eigen::VectorXd g =
      weighted_logp_grad(policy, cache, means_old, act, adv / static_cast<double>(n));

  const int net_size = flat_size(policy.mean_net);
  const int ls_size = static_cast<int>(ls_old.size());
  const Eigen::ArrayXd inv_var = (-2.0 * ls_old.array()).exp();

  // Damped Fisher-vector product of the mean KL: J^T diag(1/sigma^2) J / n on
  // the mean-net block, 2 I on the log_std block.
  const auto fvp = [&](const Eigen::VectorXd& v) {
    const MlpGrads dir = grads_from_flat(policy.mean_net, v.head(net_size));
    Eigen::MatrixXd dmu = forward_jvp(policy.mean_net, cache, dir);
    for (int j = 0; j < dmu.cols(); ++j) {
      dmu.col(j) *= inv_var[j] / static_cast<double>(n);
    }
    const MlpGrads back = backward(policy.mean_net, cache, dmu);
    Eigen::VectorXd out(v.size());
    out.head(net_size) = grads_to_flat(policy.mean_net, back);
    out.tail(ls_size) = 2.0 * v.tail(ls_size);
    return Eigen::VectorXd(out + cfg.cg_damping * v);
  };

  if (g.norm() > 1e-12) {
    const Eigen::VectorXd x = conjugate_gradient(fvp, g, cfg.cg_iters);
    const double shs = x.dot(fvp(x));
    if (shs > 1e-12) {
      const Eigen::VectorXd full_step = std::sqrt(2.0 * cfg.kl_delta / shs) * x;
      const Eigen::VectorXd old_flat = policy_to_flat(policy);
      const double surr_old = adv.mean();  // all ratios are 1 at theta_old
      double scale = 1.0;
      for (int k = 0; k < cfg.backtracks; ++k) {
        policy_from_flat(policy, old_flat + scale * full_step);
        const Eigen::MatrixXd means_new = forward(policy.mean_net, obs);
        const Eigen::VectorXd lp_new =
            gaussian_log_prob(means_new, policy.log_std, act);
        const Eigen::ArrayXd ratio = (lp_new - lp_old).array().exp();
        const double surr = (ratio * adv.array()).mean();
        const double kl = mean_gaussian_kl(means_old, ls_old, means_new, policy.log_std);
        if (surr > surr_old && kl <= cfg.kl_delta && std::isfinite(surr)) {
          stats.accepted = true;
          stats.kl = kl;
          stats.surrogate_improvement = surr - surr_old;
          stats.backtracks = k;
          stats.mean_ratio = ratio.mean();
          break;
        }
        scale *= 0.5;
      }
      if (!stats.accepted) {
        policy_from_flat(policy, old_flat);  // line search exhausted; keep theta_old
      }
    }
  }

  // Critic regression toward the empirical returns.
  const Eigen::VectorXd& ret = buffer.returns();
  const int mb = std::min(cfg.critic_minibatch, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  double sum_vloss = 0.0;
  long batches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += mb) {
      const int b = std::min(mb, n - start);
      Eigen::MatrixXd obs_b(b, obs.cols());
      Eigen::VectorXd ret_b(b);
      for (int k = 0; k < b; ++k) {
        const int idx = order[static_cast<std::size_t>(start + k)];
        obs_b.row(k) = obs.row(idx);
        ret_b[k] = ret[idx];
      }
      ForwardCache vcache;
      const Eigen::VectorXd v = forward(critic, obs_b, &vcache).col(0);
      const Eigen::VectorXd err = v - ret_b;
      const Eigen::MatrixXd upstream_v = (2.0 / static_cast<double>(b)) * err;
      const MlpGrads critic_grads = backward(critic, vcache, upstream_v);
      Eigen::VectorXd critic_params = to_flat(critic);
      critic_adam.update(critic_params, grads_to_flat(critic, critic_grads));
      from_flat(critic, critic_params);
      sum_vloss += err.squaredNorm() / b;
      ++batches;
    }
  }
  stats.value_loss = sum_vloss / static_cast<double>(batches);
  check_params_finite(policy, critic, "trpo_update");
  return stats;
}

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& mvp,
    const Eigen::VectorXd& b, int iters, double residual_tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rs_old = r.squaredNorm();
  if (rs_old < residual_tol) {
    return x;
  }
  for (int i = 0; i < iters; ++i) {
    const Eigen::VectorXd ap = mvp(p);
    const double alpha = rs_old / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    if (rs_new < residual_tol) {
      break;
    }
    p = r + (rs_new / rs_old) * p;
    rs_old = rs_new;
  }
  return x;
}

EvalResult evaluate_policy(const GaussianPolicy& policy, SnakeEnv& env,
                           int episodes, std::uint64_t seed) {
  if (episodes < 1) {
    throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  }
  EvalResult result;
  result.episodes = episodes;
  double sum_return = 0.0;
  double sum_goal_time = 0.0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd obs = env.reset(seed + static_cast<std::uint64_t>(e));
    double ep_return = 0.0;
    while (true) {
      const SnakeEnv::StepResult step = env.step(policy_mean(policy, obs));
      ep_return += step.reward;
      obs = step.obs;
      if (step.done) {
        if (step.reached_goal) {
          ++successes;
          sum_goal_time += env.state().time;
        }
        break;
      }
    }
    sum_return += ep_return;
  }
  result.mean_return = sum_return / episodes;
  result.success_rate = static_cast<double>(successes) / episodes;
  result.mean_time_to_goal = successes > 0
                                 ? sum_goal_time / successes
                                 : std::numeric_limits<double>::quiet_NaN();
  return result;
}

}  // namespace snake
