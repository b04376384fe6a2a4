#include "snake/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace snake {

namespace {

void record_finished_episodes(const RolloutBuffer& buffer, long step_offset,
                              double& running_return, int& running_length,
                              std::vector<EpisodeRecord>& out) {
  for (int i = 0; i < buffer.size(); ++i) {
    running_return += buffer.rewards()[i];
    ++running_length;
    if (buffer.dones()[static_cast<std::size_t>(i)]) {
      out.push_back({step_offset + i + 1, running_return, running_length});
      running_return = 0.0;
      running_length = 0;
    }
  }
}

void write_checkpoint_file(const std::string& dir, const std::string& name,
                           const GaussianPolicy& policy, const Mlp& critic) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir + "/" + name, policy, critic);
}

}  // namespace

TrainResult train_agent(const RunConfig& cfg, GaussianPolicy& policy,
                        Mlp& critic, const std::string& checkpoint_dir) {
  validate_config(cfg);
  if (cfg.algo != "ppo" && cfg.algo != "trpo") {
    throw std::invalid_argument("train_agent: algo must be ppo or trpo");
  }
  const bool is_ppo = cfg.algo == "ppo";

  SnakeEnv env = make_env(cfg);
  Rng init_rng(Rng::fork_seed(cfg.seed, 0));
  policy = make_policy(SnakeEnv::kObsDim, cfg.action_dim, init_rng);
  critic = make_mlp(SnakeEnv::kObsDim, 1, OutputActivation::Linear, init_rng, 1.0);
  Rng rollout_rng(Rng::fork_seed(cfg.seed, 1));
  Rng update_rng(Rng::fork_seed(cfg.seed, 2));

  AdamConfig policy_adam_cfg;
  policy_adam_cfg.alpha = cfg.ppo.learning_rate;
  AdamConfig critic_adam_cfg;
  critic_adam_cfg.alpha = is_ppo ? cfg.ppo.learning_rate : cfg.trpo.critic_lr;
  FlatAdam policy_adam(policy_flat_size(policy), policy_adam_cfg);
  FlatAdam critic_adam(flat_size(critic), critic_adam_cfg);

  const long total = is_ppo ? cfg.ppo.total_steps : cfg.trpo.total_steps;
  const int horizon = is_ppo ? cfg.ppo.rollout_horizon : cfg.trpo.batch;

  TrainResult result;
  double running_return = 0.0;
  int running_length = 0;
  while (result.steps < total) {
    const int h = static_cast<int>(std::min<long>(horizon, total - result.steps));
    RolloutBuffer buffer = collect_rollout(policy, critic, env, h, rollout_rng);
    record_finished_episodes(buffer, result.steps, running_return, running_length,
                             result.episodes);
    result.steps += buffer.size();
    if (is_ppo) {
      buffer.finalize(cfg.ppo.gamma, cfg.ppo.gae_lambda);
      ppo_update(policy, critic, buffer, cfg.ppo, policy_adam, critic_adam,
                 update_rng);
    } else {
      buffer.finalize(cfg.trpo.gamma, cfg.trpo.gae_lambda);
      trpo_update(policy, critic, buffer, cfg.trpo, critic_adam, update_rng);
    }
    ++result.updates;
    if (!checkpoint_dir.empty() && result.updates % cfg.checkpoint_every == 0) {
      write_checkpoint_file(checkpoint_dir,
                            "checkpoint_" + std::to_string(result.updates) + ".ckpt",
                            policy, critic);
    }
  }
  if (!checkpoint_dir.empty()) {
    write_checkpoint_file(checkpoint_dir, "final.ckpt", policy, critic);
  }
  return result;
}

}  // namespace snake
