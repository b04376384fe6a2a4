#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snake/env.hpp"
#include "snake/rl.hpp"

namespace snake {

// Everything one experiment needs, assembled from defaults, an optional
// config file, SNAKELAB_* environment variables, and command-line flags —
// in that order of precedence.
struct RunConfig {
  int n_joints = 17;
  double link_length = 0.25;
  double link_mass = 0.1;
  DynamicsConfig dynamics;
  FrictionModel friction;
  ServoGains gains;
  GaitParams gait;
  EpisodeConfig episode;
  ActionMode action_mode = ActionMode::SharedSpeed;
  int action_dim = 1;
  std::string algo = "ppo";  // ppo | trpo | serpenoid
  PpoConfig ppo;
  TrpoConfig trpo;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  int checkpoint_every = 5;  // updates between periodic checkpoints
};

// Applies one `section.key` setting; unknown keys and unparsable values are
// hard errors so typos cannot silently fall back to defaults.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a line-oriented `section.key = value` file ('#' starts a comment).
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// SNAKELAB_SECTION_KEY=value environment variables override file settings.
void apply_env_overrides(RunConfig& cfg);

// All recognized setting names, for help text and exhaustive tests.
std::vector<std::string> config_keys();

void validate_config(const RunConfig& cfg);

SnakeEnv make_env(const RunConfig& cfg);

// Full resolved config as `key = value` lines, reloadable by load_run_config.
std::string dump_config(const RunConfig& cfg);

// The physics-relevant subset (robot/dynamics/friction/servo/gait/episode/
// env). Two runs are comparable iff their signatures are identical.
std::string physics_signature(const RunConfig& cfg);

}  // namespace snake
