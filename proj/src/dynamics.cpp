#include "snake/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace snake {

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * M_PI);
  if (wrapped <= -M_PI) wrapped += 2.0 * M_PI;
  return wrapped;
}

RobotState build_robot(int n_joints, double link_length, double mass) {
  if (n_joints < 1) throw std::invalid_argument("build_robot: n_joints must be >= 1");
  if (link_length <= 0.0) throw std::invalid_argument("build_robot: link_length must be > 0");
  if (mass <= 0.0) throw std::invalid_argument("build_robot: mass must be > 0");

  RobotState state;
  state.time = 0.0;
  state.links.resize(n_joints + 1);
  const double half_len = 0.5 * link_length;
  const double inertia = mass * link_length * link_length / 12.0;
  for (int i = 0; i <= n_joints; ++i) {
    LinkState& link = state.links[i];
    // Head centered at the origin facing +y, the body trailing behind it
    // down the -y half of the axis.
    link.position = Vec2(0.0, -i * link_length);
    link.heading = 0.5 * M_PI;
    link.lin_vel = Vec2::Zero();
    link.ang_vel = 0.0;
    link.mass = mass;
    link.inertia = inertia;
    link.half_len = half_len;
  }
  return state;
}

double joint_angle(const RobotState& state, int joint) {
  return wrap_angle(state.links[joint + 1].heading - state.links[joint].heading);
}

double joint_rate(const RobotState& state, int joint) {
  return state.links[joint + 1].ang_vel - state.links[joint].ang_vel;
}

Eigen::VectorXd joint_angles(const RobotState& state) {
  Eigen::VectorXd angles(state.joint_count());
  for (int j = 0; j < state.joint_count(); ++j) angles[j] = joint_angle(state, j);
  return angles;
}

Eigen::VectorXd joint_rates(const RobotState& state) {
  Eigen::VectorXd rates(state.joint_count());
  for (int j = 0; j < state.joint_count(); ++j) rates[j] = joint_rate(state, j);
  return rates;
}

double servo_torque(double joint_angle, double joint_rate, double target,
                    const ServoGains& gains) {
  const double torque = gains.kp * (target - joint_angle) - gains.kd * joint_rate;
  return std::clamp(torque, -gains.tau_max, gains.tau_max);
}

FrictionWrench friction_force(const LinkState& link, const FrictionModel& model) {
  const Vec2 axis = link.axis();
  const Vec2 normal = link.normal();
  const double v_t = link.lin_vel.dot(axis);
  const double v_n = link.lin_vel.dot(normal);
  FrictionWrench wrench;
  wrench.force = -model.c_t * v_t * axis - model.c_n * v_n * normal;
  wrench.torque = -model.c_rot * link.ang_vel;
  return wrench;
}

namespace {

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

// Precomputed per-joint data valid for one substep (positions are frozen
// during the velocity iterations).
struct JointSolveData {
  Vec2 arm_a;    // parent rear pin, relative to parent center
  Vec2 arm_b;    // child front pin, relative to child center
  Vec2 bias;     // Baumgarte velocity bias, (beta/dt) * position error
  double k11, k12, k22;  // effective mass matrix
  double det;
  // Servo motor row: the PD law tau = clamp(kp*err - kd*rate) solved
  // implicitly against the end-of-substep rate, as a clamped accumulated
  // angular impulse. kappa is the angular effective inverse mass.
  double err;            // target - joint angle, at substep start
  double kappa;          // 1/I_a + 1/I_b
  double motor_impulse;  // accumulated, clamped to +-tau_max*dt
  Vec2 pin_impulse;      // accumulated over the substep, warm-started
};

void apply_pin_impulse(LinkState& a, LinkState& b, const JointSolveData& d,
                       const Vec2& impulse) {
  a.lin_vel -= impulse / a.mass;
  a.ang_vel -= cross2(d.arm_a, impulse) / a.inertia;
  b.lin_vel += impulse / b.mass;
  b.ang_vel += cross2(d.arm_b, impulse) / b.inertia;
}

void solve_joint(LinkState& a, LinkState& b, JointSolveData& d) {
  const Vec2 v_rel = b.lin_vel + b.ang_vel * perp(d.arm_b) -
                     a.lin_vel - a.ang_vel * perp(d.arm_a);
  const Vec2 rhs = -(v_rel + d.bias);
  const double px = (d.k22 * rhs.x() - d.k12 * rhs.y()) / d.det;
  const double py = (d.k11 * rhs.y() - d.k12 * rhs.x()) / d.det;
  const Vec2 impulse(px, py);
  d.pin_impulse += impulse;
  apply_pin_impulse(a, b, d, impulse);
}

// One Gauss-Seidel pass of the servo row: find the total impulse P such that
// P/dt = clamp(kp*err - kd*rate_end, +-tau_max), where rate_end is the joint
// rate after P is applied. Solving the damping term against the updated rate
// keeps the servo stable at any kd*dt/I ratio.
void solve_servo(LinkState& a, LinkState& b, JointSolveData& d,
                 const ServoGains& gains, double dt) {
  const double rate = b.ang_vel - a.ang_vel;
  const double residual =
      dt * (gains.kp * d.err - gains.kd * rate) - d.motor_impulse;
  const double delta = residual / (1.0 + dt * gains.kd * d.kappa);
  const double bound = gains.tau_max * dt;
  const double total = std::clamp(d.motor_impulse + delta, -bound, bound);
  const double applied = total - d.motor_impulse;
  d.motor_impulse = total;
  a.ang_vel -= applied / a.inertia;
  b.ang_vel += applied / b.inertia;
}

}  // namespace

RobotState step(const RobotState& state, const Eigen::VectorXd& joint_targets,
                const ServoGains& gains, const FrictionModel& friction,
                const DynamicsConfig& config, Eigen::VectorXd* applied_torques) {
  const int n_joints = state.joint_count();
  if (joint_targets.size() != n_joints) {
    throw std::invalid_argument("step: joint_targets length must equal the joint count");
  }

  RobotState next = state;
  auto& links = next.links;
  const double dt = config.dt_control / config.substeps;
  std::vector<JointSolveData> joints(n_joints);
  // Consecutive substeps need nearly the same pin impulses, so each substep
  // starts from the previous one's accumulated values; the fixed iteration
  // budget then only has to solve for the change.
  std::vector<Vec2> warm_start(static_cast<std::size_t>(n_joints), Vec2::Zero());
  std::vector<double> warm_motor(static_cast<std::size_t>(n_joints), 0.0);
  if (applied_torques != nullptr) applied_torques->resize(n_joints);

  for (int sub = 0; sub < config.substeps; ++sub) {
    // Viscous friction, integrated exactly over the substep in the body
    // frame: each velocity component decays by exp(-c*dt/m). The exact
    // update keeps the single-link decay and the anisotropy ratio on the
    // closed form at any substep size.
    for (LinkState& link : links) {
      const Vec2 axis = link.axis();
      const Vec2 normal = link.normal();
      const double v_t = link.lin_vel.dot(axis) * std::exp(-friction.c_t * dt / link.mass);
      const double v_n = link.lin_vel.dot(normal) * std::exp(-friction.c_n * dt / link.mass);
      link.lin_vel = v_t * axis + v_n * normal;
      link.ang_vel *= std::exp(-friction.c_rot * dt / link.inertia);
    }

    // Per-joint rows for this substep: the pin constraint (with Baumgarte
    // bias bleeding off position drift) and the servo motor (PD torque
    // clamped at tau_max, damping term implicit in the end-of-substep rate;
    // the explicit form is unstable at the default kd*dt/I ratio).
    for (int j = 0; j < n_joints; ++j) {
      JointSolveData& d = joints[j];
      const LinkState& a = links[j];
      const LinkState& b = links[j + 1];
      d.arm_a = -a.half_len * a.axis();
      d.arm_b = b.half_len * b.axis();
      const Vec2 error = (b.position + d.arm_b) - (a.position + d.arm_a);
      d.bias = (config.baumgarte_beta / dt) * error;
      const double im = 1.0 / a.mass + 1.0 / b.mass;
      const double ia = 1.0 / a.inertia;
      const double ib = 1.0 / b.inertia;
      d.k11 = im + ia * d.arm_a.y() * d.arm_a.y() + ib * d.arm_b.y() * d.arm_b.y();
      d.k12 = -ia * d.arm_a.x() * d.arm_a.y() - ib * d.arm_b.x() * d.arm_b.y();
      d.k22 = im + ia * d.arm_a.x() * d.arm_a.x() + ib * d.arm_b.x() * d.arm_b.x();
      d.det = d.k11 * d.k22 - d.k12 * d.k12;
      d.err = wrap_angle(joint_targets[j] - (b.heading - a.heading));
      d.kappa = ia + ib;
      d.motor_impulse = warm_motor[static_cast<std::size_t>(j)];
      const double bound = gains.tau_max * dt;
      d.motor_impulse = std::clamp(d.motor_impulse, -bound, bound);
      links[j].ang_vel -= d.motor_impulse / links[j].inertia;
      links[j + 1].ang_vel += d.motor_impulse / links[j + 1].inertia;
      d.pin_impulse = warm_start[static_cast<std::size_t>(j)];
      apply_pin_impulse(links[j], links[j + 1], d, d.pin_impulse);
    }
    for (int iter = 0; iter < config.solver_iters; ++iter) {
      // Alternating sweep direction propagates corrections along the chain
      // in both directions.
      if (iter % 2 == 0) {
        for (int j = 0; j < n_joints; ++j) {
          solve_servo(links[j], links[j + 1], joints[j], gains, dt);
          solve_joint(links[j], links[j + 1], joints[j]);
        }
      } else {
        for (int j = n_joints - 1; j >= 0; --j) {
          solve_servo(links[j], links[j + 1], joints[j], gains, dt);
          solve_joint(links[j], links[j + 1], joints[j]);
        }
      }
    }
    if (sub == 0 && applied_torques != nullptr) {
      for (int j = 0; j < n_joints; ++j) {
        (*applied_torques)[j] = joints[j].motor_impulse / dt;
      }
    }
    for (int j = 0; j < n_joints; ++j) {
      warm_start[static_cast<std::size_t>(j)] = joints[j].pin_impulse;
      warm_motor[static_cast<std::size_t>(j)] = joints[j].motor_impulse;
    }

    // Semi-implicit Euler: positions advance with the corrected velocities.
    for (LinkState& link : links) {
      link.position += dt * link.lin_vel;
      link.heading += dt * link.ang_vel;
    }
  }

  next.time += config.dt_control;

  for (const LinkState& link : links) {
    const bool finite = std::isfinite(link.position.x()) && std::isfinite(link.position.y()) &&
                        std::isfinite(link.heading) && std::isfinite(link.lin_vel.x()) &&
                        std::isfinite(link.lin_vel.y()) && std::isfinite(link.ang_vel);
    if (!finite) {
      throw SimulationDiverged("step: state diverged; reduce the substep size");
    }
  }
  return next;
}

double total_mass(const RobotState& state) {
  double mass = 0.0;
  for (const LinkState& link : state.links) mass += link.mass;
  return mass;
}

Vec2 centroid(const RobotState& state) {
  Vec2 weighted = Vec2::Zero();
  for (const LinkState& link : state.links) weighted += link.mass * link.position;
  return weighted / total_mass(state);
}

Vec2 centroid_velocity(const RobotState& state) {
  Vec2 weighted = Vec2::Zero();
  for (const LinkState& link : state.links) weighted += link.mass * link.lin_vel;
  return weighted / total_mass(state);
}

double mean_heading(const RobotState& state) {
  double s = 0.0, c = 0.0;
  for (const LinkState& link : state.links) {
    s += std::sin(link.heading);
    c += std::cos(link.heading);
  }
  const double n = static_cast<double>(state.links.size());
  return std::atan2(s / n, c / n);
}

Vec2 linear_momentum(const RobotState& state) {
  Vec2 momentum = Vec2::Zero();
  for (const LinkState& link : state.links) momentum += link.mass * link.lin_vel;
  return momentum;
}

double kinetic_energy(const RobotState& state) {
  double energy = 0.0;
  for (const LinkState& link : state.links) {
    energy += 0.5 * link.mass * link.lin_vel.squaredNorm() +
              0.5 * link.inertia * link.ang_vel * link.ang_vel;
  }
  return energy;
}

double max_joint_gap(const RobotState& state) {
  double gap = 0.0;
  for (int j = 0; j < state.joint_count(); ++j) {
    const Vec2 error = state.links[j + 1].front_pin() - state.links[j].rear_pin();
    gap = std::max(gap, error.norm());
  }
  return gap;
}

}  // namespace snake
