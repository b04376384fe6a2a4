#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "snake/config.hpp"
#include "snake/rng.hpp"
#include "snake/text.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

using namespace snake;

namespace {

std::string write_temp_config(const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / "snakelab_cfg_test.txt";
  std::ofstream out(path);
  out << body;
  return path.string();
}

}  // namespace

TEST_CASE("apply_setting reaches every section") {
  RunConfig cfg;
  apply_setting(cfg, "robot.n_joints", "9");
  apply_setting(cfg, "friction.c_n", "5.5");
  apply_setting(cfg, "servo.kp", "18");
  apply_setting(cfg, "gait.omega", "2.5");
  apply_setting(cfg, "episode.max_steps", "111");
  apply_setting(cfg, "env.action_mode", "per_group");
  apply_setting(cfg, "env.action_dim", "9");
  apply_setting(cfg, "run.algo", "trpo");
  apply_setting(cfg, "run.seed", "42");
  apply_setting(cfg, "ppo.learning_rate", "0.001");
  apply_setting(cfg, "trpo.kl_delta", "0.02");
  apply_setting(cfg, "dynamics.substeps", "4");

  CHECK(cfg.n_joints == 9);
  CHECK(cfg.friction.c_n == 5.5);
  CHECK(cfg.gains.kp == 18.0);
  CHECK(cfg.gait.omega == 2.5);
  CHECK(cfg.episode.max_steps == 111);
  CHECK(cfg.action_mode == ActionMode::PerGroup);
  CHECK(cfg.action_dim == 9);
  CHECK(cfg.algo == "trpo");
  CHECK(cfg.seed == 42);
  CHECK(cfg.ppo.learning_rate == 0.001);
  CHECK(cfg.trpo.kl_delta == 0.02);
  CHECK(cfg.dynamics.substeps == 4);
}

TEST_CASE("unknown keys and garbage values are hard errors") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_setting(cfg, "robot.njoints", "9"), std::invalid_argument);
  CHECK_THROWS_AS(apply_setting(cfg, "nonsense.key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_setting(cfg, "robot.n_joints", "pony"), std::invalid_argument);
  CHECK_THROWS_AS(apply_setting(cfg, "run.algo", "dqn"), std::invalid_argument);
  CHECK_THROWS_AS(apply_setting(cfg, "env.action_mode", "psychic"), std::invalid_argument);
}

TEST_CASE("config files layer over the defaults") {
  const std::string path = write_temp_config(
      "# comment line\n"
      "robot.n_joints = 11\n"
      "gait.amplitude = 0.45\n"
      "\n"
      "ppo.total_steps = 4000\n");
  const RunConfig cfg = load_run_config(path);
  std::filesystem::remove(path);
  CHECK(cfg.n_joints == 11);
  CHECK(cfg.gait.amplitude == 0.45);
  CHECK(cfg.ppo.total_steps == 4000);
  // Untouched keys keep their defaults.
  CHECK(cfg.link_length == 0.25);
  CHECK(cfg.algo == "ppo");
}

TEST_CASE("malformed config files are rejected") {
  const std::string path = write_temp_config("robot.n_joints 11\n");
  CHECK_THROWS_AS(load_run_config(path), std::invalid_argument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_run_config("/nonexistent/snakelab.cfg"), std::runtime_error);
}

TEST_CASE("environment variables override file settings") {
  const std::string path = write_temp_config("gait.omega = 2.0\n");
  RunConfig cfg = load_run_config(path);
  std::filesystem::remove(path);
  CHECK(cfg.gait.omega == 2.0);

  ::setenv("SNAKELAB_GAIT_OMEGA", "4.25", 1);
  ::setenv("SNAKELAB_RUN_SEED", "77", 1);
  apply_env_overrides(cfg);
  ::unsetenv("SNAKELAB_GAIT_OMEGA");
  ::unsetenv("SNAKELAB_RUN_SEED");
  CHECK(cfg.gait.omega == 4.25);
  CHECK(cfg.seed == 77);

  ::setenv("SNAKELAB_GAIT_OMEGA", "zebra", 1);
  CHECK_THROWS_AS(apply_env_overrides(cfg), std::invalid_argument);
  ::unsetenv("SNAKELAB_GAIT_OMEGA");
}

TEST_CASE("every advertised key is settable and dumped") {
  RunConfig cfg;
  const std::string dump = dump_config(cfg);
  for (const std::string& key : config_keys()) {
    CHECK(dump.find(key + " = ") != std::string::npos);
  }
  // The dump reloads into an identical configuration.
  const std::string path = write_temp_config(dump);
  const RunConfig reloaded = load_run_config(path);
  std::filesystem::remove(path);
  CHECK(dump_config(reloaded) == dump);
}

TEST_CASE("dump/reload keeps awkward floating-point values exact") {
  RunConfig cfg;
  cfg.gait.amplitude = 1.0 / 3.0;
  cfg.friction.c_t = 1e-7;
  cfg.ppo.learning_rate = 2.0000000000000002e-4;
  const std::string path = write_temp_config(dump_config(cfg));
  const RunConfig reloaded = load_run_config(path);
  std::filesystem::remove(path);
  CHECK(reloaded.gait.amplitude == cfg.gait.amplitude);
  CHECK(reloaded.friction.c_t == cfg.friction.c_t);
  CHECK(reloaded.ppo.learning_rate == cfg.ppo.learning_rate);
}

TEST_CASE("validation catches out-of-range combinations") {
  RunConfig cfg;
  CHECK_NOTHROW(validate_config(cfg));
  cfg.n_joints = 0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = RunConfig{};
  cfg.action_mode = ActionMode::PerGroup;
  cfg.action_dim = 99;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = RunConfig{};
  cfg.ppo.minibatch = cfg.ppo.rollout_horizon * 2;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}

TEST_CASE("physics signature separates comparable from incomparable runs") {
  RunConfig a;
  RunConfig b;
  b.seed = 999;              // bookkeeping only
  b.algo = "trpo";           // different learner, same world
  b.ppo.total_steps = 1;     // training budget is not physics
  CHECK(physics_signature(a) == physics_signature(b));

  RunConfig c;
  c.friction.c_n = 7.9;  // different world
  CHECK(physics_signature(a) != physics_signature(c));
  RunConfig d;
  d.gait.amplitude = 0.59;
  CHECK(physics_signature(a) != physics_signature(d));
}

TEST_CASE("make_env realizes the configured world") {
  RunConfig cfg;
  cfg.n_joints = 7;
  cfg.episode.max_steps = 55;
  SnakeEnv env = make_env(cfg);
  CHECK(env.n_joints() == 7);
  CHECK(env.episode().max_steps == 55);
  const Eigen::VectorXd obs = env.reset();
  CHECK(obs.size() == SnakeEnv::kObsDim);
}

TEST_CASE("format_number round-trips doubles through text") {
  Rng rng(60);
  for (int i = 0; i < 2000; ++i) {
    double v;
    switch (i % 4) {
      case 0: v = rng.normal(); break;
      case 1: v = rng.normal() * 1e12; break;
      case 2: v = rng.normal() * 1e-12; break;
      default: v = static_cast<double>(rng.integer(1000)); break;
    }
    const std::string text = format_number(v);
    CHECK(std::stod(text) == v);
  }
  CHECK(format_number(0.0) == "0");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(std::stod(format_number(std::numeric_limits<double>::min())) ==
        std::numeric_limits<double>::min());
}
