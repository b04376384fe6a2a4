#pragma once

#include <string>
#include <vector>

#include "snake/config.hpp"

namespace snake {

struct EpisodeRecord {
  long timestep = 0;  // env steps consumed when the episode finished
  double episode_return = 0.0;
  int episode_length = 0;
};

struct TrainResult {
  std::vector<EpisodeRecord> episodes;
  long steps = 0;
  int updates = 0;
};

// Runs the full training loop for cfg.algo ("ppo" or "trpo"), initializing
// policy and critic from cfg.seed. A nonempty checkpoint_dir gets periodic
// checkpoints plus final.ckpt.
TrainResult train_agent(const RunConfig& cfg, GaussianPolicy& policy,
                        Mlp& critic, const std::string& checkpoint_dir = "");

}  // namespace snake
