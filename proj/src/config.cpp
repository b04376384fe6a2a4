#include "snake/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "snake/text.hpp"

namespace snake {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": '" + value + "'");
  }
  return v;
}

template <typename T>
T to_integer(const std::string& key, const std::string& value) {
  T v{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: bad integer value for " + key + ": '" + value + "'");
  }
  return v;
}

struct KeyHandler {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeyHandler>& key_table() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    const auto add = [&t](const char* key,
                          std::function<void(RunConfig&, const std::string&)> set) {
      t.push_back({key, std::move(set)});
    };

    add("robot.n_joints", [](RunConfig& c, const std::string& v) {
      c.n_joints = to_integer<int>("robot.n_joints", v);
    });
    add("robot.link_length", [](RunConfig& c, const std::string& v) {
      c.link_length = to_double("robot.link_length", v);
    });
    add("robot.link_mass", [](RunConfig& c, const std::string& v) {
      c.link_mass = to_double("robot.link_mass", v);
    });

    add("dynamics.dt_control", [](RunConfig& c, const std::string& v) {
      c.dynamics.dt_control = to_double("dynamics.dt_control", v);
    });
    add("dynamics.substeps", [](RunConfig& c, const std::string& v) {
      c.dynamics.substeps = to_integer<int>("dynamics.substeps", v);
    });
    add("dynamics.solver_iters", [](RunConfig& c, const std::string& v) {
      c.dynamics.solver_iters = to_integer<int>("dynamics.solver_iters", v);
    });
    add("dynamics.baumgarte_beta", [](RunConfig& c, const std::string& v) {
      c.dynamics.baumgarte_beta = to_double("dynamics.baumgarte_beta", v);
    });
    add("dynamics.gravity", [](RunConfig& c, const std::string& v) {
      c.dynamics.gravity = to_double("dynamics.gravity", v);
    });

    add("friction.c_n", [](RunConfig& c, const std::string& v) {
      c.friction.c_n = to_double("friction.c_n", v);
    });
    add("friction.c_t", [](RunConfig& c, const std::string& v) {
      c.friction.c_t = to_double("friction.c_t", v);
    });
    add("friction.c_rot", [](RunConfig& c, const std::string& v) {
      c.friction.c_rot = to_double("friction.c_rot", v);
    });

    add("servo.kp", [](RunConfig& c, const std::string& v) {
      c.gains.kp = to_double("servo.kp", v);
    });
    add("servo.kd", [](RunConfig& c, const std::string& v) {
      c.gains.kd = to_double("servo.kd", v);
    });
    add("servo.tau_max", [](RunConfig& c, const std::string& v) {
      c.gains.tau_max = to_double("servo.tau_max", v);
    });

    add("gait.amplitude", [](RunConfig& c, const std::string& v) {
      c.gait.amplitude = to_double("gait.amplitude", v);
    });
    add("gait.omega", [](RunConfig& c, const std::string& v) {
      c.gait.omega = to_double("gait.omega", v);
    });
    add("gait.phase_offset", [](RunConfig& c, const std::string& v) {
      c.gait.phase_offset = to_double("gait.phase_offset", v);
    });

    add("episode.target_x", [](RunConfig& c, const std::string& v) {
      c.episode.target.x() = to_double("episode.target_x", v);
    });
    add("episode.target_y", [](RunConfig& c, const std::string& v) {
      c.episode.target.y() = to_double("episode.target_y", v);
    });
    add("episode.goal_radius", [](RunConfig& c, const std::string& v) {
      c.episode.goal_radius = to_double("episode.goal_radius", v);
    });
    add("episode.max_steps", [](RunConfig& c, const std::string& v) {
      c.episode.max_steps = to_integer<int>("episode.max_steps", v);
    });
    add("episode.lateral_bound", [](RunConfig& c, const std::string& v) {
      c.episode.lateral_bound = to_double("episode.lateral_bound", v);
    });
    add("episode.lateral_penalty", [](RunConfig& c, const std::string& v) {
      c.episode.lateral_penalty = to_double("episode.lateral_penalty", v);
    });
    add("episode.goal_reward", [](RunConfig& c, const std::string& v) {
      c.episode.goal_reward = to_double("episode.goal_reward", v);
    });
    add("episode.omega_min", [](RunConfig& c, const std::string& v) {
      c.episode.omega_min = to_double("episode.omega_min", v);
    });
    add("episode.omega_max", [](RunConfig& c, const std::string& v) {
      c.episode.omega_max = to_double("episode.omega_max", v);
    });

    add("env.action_mode", [](RunConfig& c, const std::string& v) {
      if (v == "shared") {
        c.action_mode = ActionMode::SharedSpeed;
      } else if (v == "per_group") {
        c.action_mode = ActionMode::PerGroup;
      } else {
        throw std::invalid_argument("config: env.action_mode must be shared or per_group");
      }
    });
    add("env.action_dim", [](RunConfig& c, const std::string& v) {
      c.action_dim = to_integer<int>("env.action_dim", v);
    });

    add("run.algo", [](RunConfig& c, const std::string& v) {
      if (v != "ppo" && v != "trpo" && v != "serpenoid") {
        throw std::invalid_argument("config: run.algo must be ppo, trpo, or serpenoid");
      }
      c.algo = v;
    });
    add("run.seed", [](RunConfig& c, const std::string& v) {
      c.seed = to_integer<std::uint64_t>("run.seed", v);
    });
    add("run.out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; });
    add("run.checkpoint_every", [](RunConfig& c, const std::string& v) {
      c.checkpoint_every = to_integer<int>("run.checkpoint_every", v);
    });

    add("ppo.rollout_horizon", [](RunConfig& c, const std::string& v) {
      c.ppo.rollout_horizon = to_integer<int>("ppo.rollout_horizon", v);
    });
    add("ppo.gamma", [](RunConfig& c, const std::string& v) {
      c.ppo.gamma = to_double("ppo.gamma", v);
    });
    add("ppo.clip_eps", [](RunConfig& c, const std::string& v) {
      c.ppo.clip_eps = to_double("ppo.clip_eps", v);
    });
    add("ppo.gae_lambda", [](RunConfig& c, const std::string& v) {
      c.ppo.gae_lambda = to_double("ppo.gae_lambda", v);
    });
    add("ppo.vf_coef", [](RunConfig& c, const std::string& v) {
      c.ppo.vf_coef = to_double("ppo.vf_coef", v);
    });
    add("ppo.epochs", [](RunConfig& c, const std::string& v) {
      c.ppo.epochs = to_integer<int>("ppo.epochs", v);
    });
    add("ppo.minibatch", [](RunConfig& c, const std::string& v) {
      c.ppo.minibatch = to_integer<int>("ppo.minibatch", v);
    });
    add("ppo.learning_rate", [](RunConfig& c, const std::string& v) {
      c.ppo.learning_rate = to_double("ppo.learning_rate", v);
    });
    add("ppo.entropy_coef", [](RunConfig& c, const std::string& v) {
      c.ppo.entropy_coef = to_double("ppo.entropy_coef", v);
    });
    add("ppo.total_steps", [](RunConfig& c, const std::string& v) {
      c.ppo.total_steps = to_integer<long>("ppo.total_steps", v);
    });

    add("trpo.batch", [](RunConfig& c, const std::string& v) {
      c.trpo.batch = to_integer<int>("trpo.batch", v);
    });
    add("trpo.gamma", [](RunConfig& c, const std::string& v) {
      c.trpo.gamma = to_double("trpo.gamma", v);
    });
    add("trpo.gae_lambda", [](RunConfig& c, const std::string& v) {
      c.trpo.gae_lambda = to_double("trpo.gae_lambda", v);
    });
    add("trpo.kl_delta", [](RunConfig& c, const std::string& v) {
      c.trpo.kl_delta = to_double("trpo.kl_delta", v);
    });
    add("trpo.epochs", [](RunConfig& c, const std::string& v) {
      c.trpo.epochs = to_integer<int>("trpo.epochs", v);
    });
    add("trpo.cg_iters", [](RunConfig& c, const std::string& v) {
      c.trpo.cg_iters = to_integer<int>("trpo.cg_iters", v);
    });
    add("trpo.cg_damping", [](RunConfig& c, const std::string& v) {
      c.trpo.cg_damping = to_double("trpo.cg_damping", v);
    });
    add("trpo.backtracks", [](RunConfig& c, const std::string& v) {
      c.trpo.backtracks = to_integer<int>("trpo.backtracks", v);
    });
    add("trpo.critic_lr", [](RunConfig& c, const std::string& v) {
      c.trpo.critic_lr = to_double("trpo.critic_lr", v);
    });
    add("trpo.critic_minibatch", [](RunConfig& c, const std::string& v) {
      c.trpo.critic_minibatch = to_integer<int>("trpo.critic_minibatch", v);
    });
    add("trpo.total_steps", [](RunConfig& c, const std::string& v) {
      c.trpo.total_steps = to_integer<long>("trpo.total_steps", v);
    });
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeyHandler& handler : key_table()) {
    if (key == handler.key) {
      handler.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream file(path);
  if (!file) {
    throw std::runtime_error("config: cannot open " + path);
  }
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + path + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      apply_setting(base, key, value);
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return base;
}

void apply_env_overrides(RunConfig& cfg) {
  for (const KeyHandler& handler : key_table()) {
    std::string name = "SNAKELAB_";
    for (const char* p = handler.key; *p != '\0'; ++p) {
      name += (*p == '.') ? '_' : static_cast<char>(std::toupper(*p));
    }
    if (const char* value = std::getenv(name.c_str())) {
      handler.set(cfg, value);
    }
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  keys.reserve(key_table().size());
  for (const KeyHandler& handler : key_table()) {
    keys.emplace_back(handler.key);
  }
  return keys;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.algo != "ppo" && cfg.algo != "trpo" && cfg.algo != "serpenoid") {
    throw std::invalid_argument("config: run.algo must be ppo, trpo, or serpenoid");
  }
  if (cfg.checkpoint_every < 1) {
    throw std::invalid_argument("config: run.checkpoint_every must be >= 1");
  }
  cfg.ppo.validate();
  cfg.trpo.validate();
  make_env(cfg);  // constructor enforces the robot/episode invariants
}

SnakeEnv make_env(const RunConfig& cfg) {
  return SnakeEnv(cfg.n_joints, cfg.episode, cfg.dynamics, cfg.gait, cfg.gains,
                  cfg.friction, cfg.action_mode, cfg.action_dim, cfg.link_length,
                  cfg.link_mass);
}

std::string physics_signature(const RunConfig& cfg) {
  std::string out;
  const auto line = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("robot.n_joints", std::to_string(cfg.n_joints));
  line("robot.link_length", format_number(cfg.link_length));
  line("robot.link_mass", format_number(cfg.link_mass));
  line("dynamics.dt_control", format_number(cfg.dynamics.dt_control));
  line("dynamics.substeps", std::to_string(cfg.dynamics.substeps));
  line("dynamics.solver_iters", std::to_string(cfg.dynamics.solver_iters));
  line("dynamics.baumgarte_beta", format_number(cfg.dynamics.baumgarte_beta));
  line("dynamics.gravity", format_number(cfg.dynamics.gravity));
  line("friction.c_n", format_number(cfg.friction.c_n));
  line("friction.c_t", format_number(cfg.friction.c_t));
  line("friction.c_rot", format_number(cfg.friction.c_rot));
  line("servo.kp", format_number(cfg.gains.kp));
  line("servo.kd", format_number(cfg.gains.kd));
  line("servo.tau_max", format_number(cfg.gains.tau_max));
  line("gait.amplitude", format_number(cfg.gait.amplitude));
  line("gait.omega", format_number(cfg.gait.omega));
  line("gait.phase_offset", format_number(cfg.gait.phase_offset));
  line("episode.target_x", format_number(cfg.episode.target.x()));
  line("episode.target_y", format_number(cfg.episode.target.y()));
  line("episode.goal_radius", format_number(cfg.episode.goal_radius));
  line("episode.max_steps", std::to_string(cfg.episode.max_steps));
  line("episode.lateral_bound", format_number(cfg.episode.lateral_bound));
  line("episode.lateral_penalty", format_number(cfg.episode.lateral_penalty));
  line("episode.goal_reward", format_number(cfg.episode.goal_reward));
  line("episode.omega_min", format_number(cfg.episode.omega_min));
  line("episode.omega_max", format_number(cfg.episode.omega_max));
  line("env.action_mode",
       cfg.action_mode == ActionMode::SharedSpeed ? "shared" : "per_group");
  line("env.action_dim", std::to_string(cfg.action_dim));
  return out;
}

std::string dump_config(const RunConfig& cfg) {
  std::string out = physics_signature(cfg);
  const auto line = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("run.algo", cfg.algo);
  line("run.seed", std::to_string(cfg.seed));
  line("run.out_dir", cfg.out_dir);
  line("run.checkpoint_every", std::to_string(cfg.checkpoint_every));
  line("ppo.rollout_horizon", std::to_string(cfg.ppo.rollout_horizon));
  line("ppo.gamma", format_number(cfg.ppo.gamma));
  line("ppo.clip_eps", format_number(cfg.ppo.clip_eps));
  line("ppo.gae_lambda", format_number(cfg.ppo.gae_lambda));
  line("ppo.vf_coef", format_number(cfg.ppo.vf_coef));
  line("ppo.epochs", std::to_string(cfg.ppo.epochs));
  line("ppo.minibatch", std::to_string(cfg.ppo.minibatch));
  line("ppo.learning_rate", format_number(cfg.ppo.learning_rate));
  line("ppo.entropy_coef", format_number(cfg.ppo.entropy_coef));
  line("ppo.total_steps", std::to_string(cfg.ppo.total_steps));
  line("trpo.batch", std::to_string(cfg.trpo.batch));
  line("trpo.gamma", format_number(cfg.trpo.gamma));
  line("trpo.gae_lambda", format_number(cfg.trpo.gae_lambda));
  line("trpo.kl_delta", format_number(cfg.trpo.kl_delta));
  line("trpo.epochs", std::to_string(cfg.trpo.epochs));
  line("trpo.cg_iters", std::to_string(cfg.trpo.cg_iters));
  line("trpo.cg_damping", format_number(cfg.trpo.cg_damping));
  line("trpo.backtracks", std::to_string(cfg.trpo.backtracks));
  line("trpo.critic_lr", format_number(cfg.trpo.critic_lr));
  line("trpo.critic_minibatch", std::to_string(cfg.trpo.critic_minibatch));
  line("trpo.total_steps", std::to_string(cfg.trpo.total_steps));
  return out;
}

}  // namespace snake
