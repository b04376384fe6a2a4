#include "CLI11.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snake/config.hpp"
#include "snake/io.hpp"
#include "snake/rl.hpp"
#include "snake/text.hpp"
#include "snake/trainer.hpp"

namespace {

using namespace snake;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string algo;
};

// defaults < config file < SNAKELAB_* environment < explicit flags
RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = load_run_config(opts.config_path);
  }
  apply_env_overrides(cfg);
  if (opts.seed) {
    cfg.seed = *opts.seed;
  }
  if (!opts.out_dir.empty()) {
    cfg.out_dir = opts.out_dir;
  }
  if (!opts.algo.empty()) {
    apply_setting(cfg, "run.algo", opts.algo);
  }
  validate_config(cfg);
  return cfg;
}

void run_indexed(int tasks, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || tasks <= 1) {
    for (int i = 0; i < tasks; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= tasks) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, tasks);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back(worker);
  }
  for (std::thread& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

// A controller is either the scripted serpenoid baseline ("serpenoid") or a
// checkpoint path; both reduce to a deterministic obs -> action map.
struct Controller {
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> act;
};

Controller make_controller(const RunConfig& cfg, const std::string& spec) {
  if (spec == "serpenoid") {
    const double mid = 0.5 * (cfg.episode.omega_min + cfg.episode.omega_max);
    const double half = 0.5 * (cfg.episode.omega_max - cfg.episode.omega_min);
    const double u = (cfg.gait.omega - mid) / half;
    if (u < -1.0 || u > 1.0) {
      throw std::invalid_argument(
          "serpenoid controller: gait.omega lies outside episode.omega_min..max");
    }
    const Eigen::VectorXd action = Eigen::VectorXd::Constant(cfg.action_dim, u);
    return {"serpenoid", [action](const Eigen::VectorXd&) { return action; }};
  }
  Rng rng(0);
  auto policy = std::make_shared<GaussianPolicy>(
      make_policy(SnakeEnv::kObsDim, cfg.action_dim, rng));
  Mlp critic = make_mlp(SnakeEnv::kObsDim, 1, OutputActivation::Linear, rng, 1.0);
  load_checkpoint(spec, *policy, critic);
  return {spec, [policy](const Eigen::VectorXd& obs) {
            return policy_mean(*policy, obs);
          }};
}

// Sibling config.txt written by cmd_train; used to refuse unfair comparisons.
std::optional<std::string> sibling_config_path(const std::string& checkpoint) {
  const auto slash = checkpoint.find_last_of('/');
  const std::string dir =
      slash == std::string::npos ? std::string(".") : checkpoint.substr(0, slash);
  const std::string candidate = dir + "/config.txt";
  std::ifstream probe(candidate);
  if (probe) {
    return candidate;
  }
  return std::nullopt;
}

RolloutTrace run_episode(const RunConfig& cfg, const Controller& controller) {
  SnakeEnv env = make_env(cfg);
  Eigen::VectorXd obs = env.reset(cfg.seed);
  RolloutTrace trace;
  env.init_trace(trace);
  while (true) {
    const SnakeEnv::StepResult result = env.step(controller.act(obs));
    env.append_trace_row(trace, result);
    obs = result.obs;
    if (result.done) {
      break;
    }
  }
  return trace;
}

int cmd_train(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  if (cfg.algo != "ppo" && cfg.algo != "trpo") {
    throw std::invalid_argument("train: --algo must be ppo or trpo");
  }
  GaussianPolicy policy;
  Mlp critic;
  const TrainResult result = train_agent(cfg, policy, critic, cfg.out_dir);
  write_text_file(cfg.out_dir + "/rewards.csv", rewards_csv(result.episodes));
  write_text_file(cfg.out_dir + "/config.txt", dump_config(cfg));
  std::cout << "trained " << cfg.algo << " for " << result.steps << " steps ("
            << result.updates << " updates, " << result.episodes.size()
            << " episodes); outputs in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_rollout(const CommonOpts& opts, const std::string& checkpoint) {
  RunConfig cfg = resolve_config(opts);
  const std::string spec = checkpoint.empty() ? "serpenoid" : checkpoint;
  const Controller controller = make_controller(cfg, spec);
  const RolloutTrace trace = run_episode(cfg, controller);
  const EnergyReport report = run_summary(trace);
  write_text_file(cfg.out_dir + "/trace.csv", trace_csv(trace));
  write_text_file(cfg.out_dir + "/energy.csv",
                  energy_csv_header() + energy_csv_row(controller.name, report));
  std::cout << energy_summary_text(controller.name, report);
  return 0;
}

int cmd_compare(const CommonOpts& opts, const std::vector<std::string>& specs) {
  const RunConfig cfg = resolve_config(opts);
  if (specs.size() < 2) {
    throw std::invalid_argument("compare: need at least two --controller entries");
  }
  const std::string base_signature = physics_signature(cfg);
  std::string csv =
      "controller,time_to_goal_s,total_power_W,average_power_W,mean_velocity_mps\n";
  for (const std::string& spec : specs) {
    if (spec != "serpenoid") {
      if (const auto config_path = sibling_config_path(spec)) {
        const RunConfig trained = load_run_config(*config_path);
        if (physics_signature(trained) != base_signature) {
          throw std::invalid_argument(
              "compare: " + spec + " was trained under a different physical config (" +
              *config_path + "); comparison would be unfair");
        }
      }
    }
    const Controller controller = make_controller(cfg, spec);
    const RolloutTrace trace = run_episode(cfg, controller);
    const EnergyReport report = run_summary(trace);
    csv += controller.name;
    csv += ',' + format_number(report.time_to_goal
                                   ? *report.time_to_goal
                                   : std::numeric_limits<double>::quiet_NaN());
    csv += ',' + format_number(report.total_power);
    csv += ',' + format_number(report.average_power);
    csv += ',' + format_number(report.mean_forward_velocity);
    csv += '\n';
  }
  write_text_file(cfg.out_dir + "/compare.csv", csv);
  std::cout << csv;
  return 0;
}

std::pair<int, int> parse_joint_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    throw std::invalid_argument("--joints expects a range like 5..18");
  }
  const int lo = std::stoi(text.substr(0, dots));
  const int hi = std::stoi(text.substr(dots + 2));
  if (lo < 1 || hi < lo) {
    throw std::invalid_argument("--joints range is empty or invalid");
  }
  return {lo, hi};
}

int cmd_sweep(const CommonOpts& opts, const std::string& joints, int trials,
              int workers) {
  const RunConfig base = resolve_config(opts);
  const auto [lo, hi] = parse_joint_range(joints);
  if (trials < 1) {
    throw std::invalid_argument("sweep: --trials must be >= 1");
  }
  const int n_counts = hi - lo + 1;

  // Baseline power per joint count: deterministic, one rollout each.
  std::vector<double> baseline(static_cast<std::size_t>(n_counts));
  for (int i = 0; i < n_counts; ++i) {
    RunConfig cfg = base;
    cfg.n_joints = lo + i;
    baseline[static_cast<std::size_t>(i)] =
        run_summary(run_episode(cfg, make_controller(cfg, "serpenoid"))).average_power;
  }

  // One fresh PPO training per (joint count, trial).
  std::vector<double> learned(static_cast<std::size_t>(n_counts * trials));
  run_indexed(n_counts * trials, workers, [&](int task) {
    const int i = task / trials;
    const int trial = task % trials;
    RunConfig cfg = base;
    cfg.n_joints = lo + i;
    cfg.algo = "ppo";
    cfg.seed = base.seed + static_cast<std::uint64_t>(trial);
    GaussianPolicy policy;
    Mlp critic;
    train_agent(cfg, policy, critic);
    SnakeEnv env = make_env(cfg);
    Eigen::VectorXd obs = env.reset(cfg.seed);
    RolloutTrace trace;
    env.init_trace(trace);
    while (true) {
      const SnakeEnv::StepResult result = env.step(policy_mean(policy, obs));
      env.append_trace_row(trace, result);
      obs = result.obs;
      if (result.done) {
        break;
      }
    }
    learned[static_cast<std::size_t>(task)] = run_summary(trace).average_power;
  });

  std::string csv = "n_joints,controller,trial,average_power_W\n";
  for (int i = 0; i < n_counts; ++i) {
    for (int trial = 0; trial < trials; ++trial) {
      const std::string k = std::to_string(lo + i);
      csv += k + ",ppo," + std::to_string(trial) + ',' +
             format_number(learned[static_cast<std::size_t>(i * trials + trial)]) + '\n';
      csv += k + ",serpenoid," + std::to_string(trial) + ',' +
             format_number(baseline[static_cast<std::size_t>(i)]) + '\n';
    }
  }
  write_text_file(base.out_dir + "/sweep.csv", csv);

  double base_mean = 0.0;
  for (double value : baseline) {
    base_mean += value;
  }
  base_mean /= n_counts;
  double base_var = 0.0;
  for (double value : baseline) {
    base_var += (value - base_mean) * (value - base_mean);
  }
  base_var /= n_counts;
  const double base_cov = base_mean > 0.0 ? std::sqrt(base_var) / base_mean : 0.0;

  int argmin = 0;
  double best = std::numeric_limits<double>::infinity();
  std::cout << "n_joints  ppo_mean_W  serpenoid_W\n";
  for (int i = 0; i < n_counts; ++i) {
    double mean = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      mean += learned[static_cast<std::size_t>(i * trials + trial)];
    }
    mean /= trials;
    if (mean < best) {
      best = mean;
      argmin = lo + i;
    }
    std::cout << lo + i << "  " << format_number(mean) << "  "
              << format_number(baseline[static_cast<std::size_t>(i)]) << "\n";
  }
  std::cout << "baseline coefficient of variation: " << format_number(base_cov)
            << "\nlearned average power minimized at " << argmin << " joints\n";
  return 0;
}

int cmd_curves(const CommonOpts& opts, int trials, int workers) {
  const RunConfig base = resolve_config(opts);
  if (base.algo != "ppo" && base.algo != "trpo") {
    throw std::invalid_argument("curves: --algo must be ppo or trpo");
  }
  if (trials < 1) {
    throw std::invalid_argument("curves: --trials must be >= 1");
  }
  const long total =
      base.algo == "ppo" ? base.ppo.total_steps : base.trpo.total_steps;
  if (total < 1) {
    throw std::invalid_argument("curves: step budget must be positive");
  }
  const long bin = std::max<long>(total / 50, 1);
  const int n_bins = static_cast<int>((total + bin - 1) / bin);

  std::vector<std::vector<EpisodeRecord>> per_trial(
      static_cast<std::size_t>(trials));
  run_indexed(trials, workers, [&](int trial) {
    RunConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(trial);
    GaussianPolicy policy;
    Mlp critic;
    per_trial[static_cast<std::size_t>(trial)] =
        train_agent(cfg, policy, critic).episodes;
  });

  // Bin each trial's episode returns onto the common grid, carrying the last
  // seen value across bins where no episode finished.
  Eigen::MatrixXd binned(trials, n_bins);
  for (int trial = 0; trial < trials; ++trial) {
    const auto& episodes = per_trial[static_cast<std::size_t>(trial)];
    std::size_t next = 0;
    double carry = 0.0;
    bool seen_any = false;
    int first_filled = -1;
    for (int b = 0; b < n_bins; ++b) {
      const long edge = std::min<long>((b + 1) * bin, total);
      double sum = 0.0;
      int count = 0;
      while (next < episodes.size() && episodes[next].timestep <= edge) {
        sum += episodes[next].episode_return;
        ++count;
        ++next;
      }
      if (count > 0) {
        carry = sum / count;
        if (!seen_any) {
          first_filled = b;
          seen_any = true;
        }
      }
      binned(trial, b) = carry;
    }
    // Backfill the leading bins so early empty bins show the first real value.
    if (seen_any) {
      for (int b = 0; b < first_filled; ++b) {
        binned(trial, b) = binned(trial, first_filled);
      }
    }
  }

  std::string csv = "timestep,mean_return,std_return\n";
  for (int b = 0; b < n_bins; ++b) {
    const long edge = std::min<long>((b + 1) * bin, total);
    const double mean = binned.col(b).mean();
    const double var = (binned.col(b).array() - mean).square().sum() / trials;
    csv += std::to_string(edge);
    csv += ',' + format_number(mean);
    csv += ',' + format_number(std::sqrt(var));
    csv += '\n';
  }
  write_text_file(base.out_dir + "/curves.csv", csv);
  std::cout << "wrote " << base.out_dir << "/curves.csv (" << trials
            << " trials, bin " << bin << " steps)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "snakelab: planar snake-robot locomotion experiments.\n"
      "Config precedence: defaults < --config file < SNAKELAB_* environment "
      "variables < flags.\n"
      "Environment overrides use the key with '.' replaced by '_', uppercased: "
      "SNAKELAB_PPO_GAMMA=0.9"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string checkpoint;
  std::vector<std::string> controllers;
  std::string joints = "5..18";
  int trials = 10;
  int workers = 1;

  const auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "config file (section.key = value)");
    sub->add_option("--seed", opts.seed, "master RNG seed");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--algo", opts.algo, "ppo | trpo | serpenoid");
  };

  CLI::App* train = app.add_subcommand("train", "train an agent, emit rewards.csv and checkpoints");
  add_common(train);

  CLI::App* rollout = app.add_subcommand("rollout", "one deterministic episode: trace.csv + energy report");
  add_common(rollout);
  rollout->add_option("--checkpoint", checkpoint, "policy checkpoint (omit for the serpenoid baseline)");

  CLI::App* compare = app.add_subcommand("compare", "run several controllers under one physical config");
  add_common(compare);
  compare->add_option("--controller", controllers, "'serpenoid' or checkpoint path (repeatable)")
      ->expected(-1);

  CLI::App* sweep = app.add_subcommand("sweep", "train/measure across joint counts");
  add_common(sweep);
  sweep->add_option("--joints", joints, "joint-count range A..B");
  sweep->add_option("--trials", trials, "independent trainings per joint count");
  sweep->add_option("--workers", workers, "parallel worker threads");

  CLI::App* curves = app.add_subcommand("curves", "aggregate reward curves over repeated trainings");
  add_common(curves);
  curves->add_option("--trials", trials, "number of seeds");
  curves->add_option("--workers", workers, "parallel worker threads");

  try {
    app.parse(argc, argv);
    if (train->parsed()) {
      return cmd_train(opts);
    }
    if (rollout->parsed()) {
      return cmd_rollout(opts, checkpoint);
    }
    if (compare->parsed()) {
      return cmd_compare(opts, controllers);
    }
    if (sweep->parsed()) {
      return cmd_sweep(opts, joints, trials, workers);
    }
    if (curves->parsed()) {
      return cmd_curves(opts, trials, workers);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
