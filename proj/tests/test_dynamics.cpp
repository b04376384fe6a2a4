#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "snake/dynamics.hpp"
#include "snake/gait.hpp"
#include "snake/rng.hpp"

#include <cmath>
#include <limits>

using namespace snake;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Zero-gain servo: pure passive chain.
ServoGains passive_gains() {
  ServoGains g;
  g.kp = 0.0;
  g.kd = 0.0;
  return g;
}

FrictionModel no_friction() {
  FrictionModel f;
  f.c_n = 0.0;
  f.c_t = 0.0;
  f.c_rot = 0.0;
  return f;
}

RobotState single_link(double heading, Vec2 lin_vel, double ang_vel) {
  RobotState state;
  LinkState link;
  link.heading = heading;
  link.lin_vel = lin_vel;
  link.ang_vel = ang_vel;
  link.mass = 0.1;
  link.half_len = 0.125;
  link.inertia = 0.1 * 0.25 * 0.25 / 12.0;
  state.links.push_back(link);
  return state;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi + 0.1) == doctest::Approx(-kPi + 0.1));
  CHECK(wrap_angle(-kPi - 0.1) == doctest::Approx(kPi - 0.1));
  CHECK(wrap_angle(7.0 * kPi + 0.3) == doctest::Approx(kPi + 0.3 - 2.0 * kPi));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
}

TEST_CASE("build_robot lays a straight chain along -y") {
  RobotState state = build_robot(17, 0.25, 0.1);
  REQUIRE(state.links.size() == 18);
  CHECK(state.joint_count() == 17);
  CHECK(state.links[0].position.x() == 0.0);
  CHECK(state.links[0].position.y() == 0.0);
  for (int i = 0; i < 18; ++i) {
    const LinkState& link = state.links[static_cast<std::size_t>(i)];
    CHECK(link.position.y() == doctest::Approx(-0.25 * i));
    CHECK(link.heading == doctest::Approx(kPi / 2.0));
    CHECK(link.mass == 0.1);
    CHECK(link.half_len == doctest::Approx(0.125));
    CHECK(link.inertia == doctest::Approx(0.1 * 0.25 * 0.25 / 12.0));
    CHECK(link.lin_vel.norm() == 0.0);
    CHECK(link.ang_vel == 0.0);
  }
  // Nose to tail tip spans 18 links' worth of body.
  const double span =
      state.links.front().front_pin().y() - state.links.back().rear_pin().y();
  CHECK(span == doctest::Approx(4.5));
  CHECK(total_mass(state) == doctest::Approx(1.8));
  CHECK(centroid(state).y() == doctest::Approx(-2.125));
  CHECK(mean_heading(state) == doctest::Approx(kPi / 2.0));
}

TEST_CASE("adjacent links share their pin") {
  RobotState state = build_robot(1, 1.0, 1.0);
  REQUIRE(state.links.size() == 2);
  const Vec2 rear = state.links[0].rear_pin();
  const Vec2 front = state.links[1].front_pin();
  CHECK(rear.x() == doctest::Approx(0.0));
  CHECK(rear.y() == doctest::Approx(-0.5));
  CHECK((rear - front).norm() == doctest::Approx(0.0));
  CHECK(max_joint_gap(state) <= 1e-12);
}

TEST_CASE("build_robot rejects bad arguments") {
  CHECK_THROWS_AS(build_robot(0, 0.25, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(build_robot(17, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(build_robot(17, 0.25, -1.0), std::invalid_argument);
}

TEST_CASE("joint angles and rates are relative link quantities") {
  RobotState state = build_robot(3, 0.25, 0.1);
  CHECK(joint_angles(state).norm() == doctest::Approx(0.0));
  state.links[1].heading += 0.3;
  state.links[1].ang_vel = 0.7;
  CHECK(joint_angle(state, 0) == doctest::Approx(0.3));
  CHECK(joint_angle(state, 1) == doctest::Approx(-0.3));
  CHECK(joint_rate(state, 0) == doctest::Approx(0.7));
  CHECK(joint_rate(state, 1) == doctest::Approx(-0.7));
  Eigen::VectorXd rates = joint_rates(state);
  REQUIRE(rates.size() == 3);
  CHECK(rates[2] == 0.0);
}

TEST_CASE("servo torque is a clamped PD law") {
  ServoGains g;  // kp 20, kd 0.5, tau_max 10
  CHECK(servo_torque(0.2, 0.0, 0.2, g) == 0.0);
  CHECK(servo_torque(0.0, 0.0, 0.1, g) == doctest::Approx(2.0));
  CHECK(servo_torque(0.0, 1.0, 0.0, g) == doctest::Approx(-0.5));
  // Ten radians of error wants 200 N*m; the limit wins exactly.
  CHECK(servo_torque(0.0, 0.0, 10.0, g) == 10.0);
  CHECK(servo_torque(10.0, 0.0, 0.0, g) == -10.0);
}

TEST_CASE("friction wrench: anisotropic viscous law") {
  FrictionModel f;
  f.c_n = 3.0;
  f.c_t = 0.03;
  f.c_rot = 0.05;

  LinkState rest;  // heading 0, axis +x
  FrictionWrench w0 = friction_force(rest, f);
  CHECK(w0.force.norm() == 0.0);
  CHECK(w0.torque == 0.0);

  LinkState slide = rest;
  slide.lin_vel = Vec2(1.0, 0.0);  // along the body axis
  FrictionWrench wt = friction_force(slide, f);
  CHECK(wt.force.x() == doctest::Approx(-0.03));
  CHECK(wt.force.y() == doctest::Approx(0.0));

  slide.lin_vel = Vec2(0.0, 1.0);  // broadside
  FrictionWrench wn = friction_force(slide, f);
  CHECK(wn.force.y() == doctest::Approx(-3.0));
  CHECK(wn.force.x() == doctest::Approx(0.0));
  CHECK(wn.force.norm() / wt.force.norm() == doctest::Approx(100.0));

  LinkState spin = rest;
  spin.ang_vel = 2.0;
  FrictionWrench wr = friction_force(spin, f);
  CHECK(wr.torque == doctest::Approx(-0.1));
}

TEST_CASE("default friction keeps the tangential/normal ratio at 1:100") {
  FrictionModel f;
  CHECK(f.c_t / f.c_n == doctest::Approx(0.01));
}

TEST_CASE("equilibrium: zero velocity and matched targets hold the pose") {
  RobotState state = build_robot(17, 0.25, 0.1);
  const Eigen::VectorXd targets = joint_angles(state);
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  RobotState s = state;
  for (int k = 0; k < 10; ++k) {
    s = step(s, targets, gains, friction, config);
  }
  CHECK(s.time == doctest::Approx(10.0 / 30.0));
  for (std::size_t i = 0; i < s.links.size(); ++i) {
    CHECK(std::abs(s.links[i].position.x() - state.links[i].position.x()) <= 1e-12);
    CHECK(std::abs(s.links[i].position.y() - state.links[i].position.y()) <= 1e-12);
    CHECK(std::abs(s.links[i].heading - state.links[i].heading) <= 1e-12);
    CHECK(s.links[i].lin_vel.norm() <= 1e-12);
    CHECK(std::abs(s.links[i].ang_vel) <= 1e-12);
  }
}

TEST_CASE("zero friction, zero torque: momentum is conserved") {
  RobotState state = build_robot(17, 0.25, 0.1);
  Rng rng(42);
  for (LinkState& link : state.links) {
    link.lin_vel = Vec2(0.3 + 0.05 * rng.normal(), -0.2 + 0.05 * rng.normal());
    link.ang_vel = 0.1 * rng.normal();
  }
  const ServoGains gains = passive_gains();
  const FrictionModel friction = no_friction();
  DynamicsConfig config;
  const Eigen::VectorXd targets = Eigen::VectorXd::Zero(17);

  Vec2 p_prev = linear_momentum(state);
  for (int k = 0; k < 100; ++k) {
    state = step(state, targets, gains, friction, config);
    const Vec2 p = linear_momentum(state);
    CHECK((p - p_prev).norm() <= 1e-6 * std::max(1.0, p_prev.norm()));
    p_prev = p;
  }
  // And with uniform velocity the centroid translates exactly at that rate.
  RobotState uniform = build_robot(5, 0.25, 0.1);
  for (LinkState& link : uniform.links) {
    link.lin_vel = Vec2(0.4, -0.1);
  }
  const Vec2 before = centroid(uniform);
  uniform = step(uniform, Eigen::VectorXd::Zero(5), gains, friction, config);
  const Vec2 after = centroid(uniform);
  CHECK((after - before - Vec2(0.4, -0.1) / 30.0).norm() <= 1e-9);
}

TEST_CASE("single link slides out with the viscous decay law") {
  FrictionModel f;
  f.c_n = 3.0;
  f.c_t = 0.03;
  f.c_rot = 0.0;
  DynamicsConfig config;
  const ServoGains gains = passive_gains();
  const Eigen::VectorXd no_targets(0);

  // Tangential launch: v(t) = v0 * exp(-c_t * t / m).
  RobotState tan_state = single_link(kPi / 2.0, Vec2(0.0, 1.0), 0.0);
  for (int k = 0; k < 30; ++k) {
    tan_state = step(tan_state, no_targets, gains, f, config);
  }
  const double v_tan = tan_state.links[0].lin_vel.norm();
  const double expected_tan = std::exp(-0.03 * 1.0 / 0.1);
  CHECK(std::abs(v_tan - expected_tan) / expected_tan <= 0.01);

  // Broadside launch decays with c_n instead; the decay-constant ratio
  // recovers c_n / c_t.
  RobotState norm_state = single_link(kPi / 2.0, Vec2(1.0, 0.0), 0.0);
  const double t_short = 4.0 / 30.0;
  for (int k = 0; k < 4; ++k) {
    norm_state = step(norm_state, no_targets, gains, f, config);
  }
  const double v_norm = norm_state.links[0].lin_vel.norm();
  RobotState tan_short = single_link(kPi / 2.0, Vec2(0.0, 1.0), 0.0);
  for (int k = 0; k < 4; ++k) {
    tan_short = step(tan_short, no_targets, gains, f, config);
  }
  const double v_tan_short = tan_short.links[0].lin_vel.norm();
  const double rate_norm = -std::log(v_norm) / t_short;
  const double rate_tan = -std::log(v_tan_short) / t_short;
  CHECK(rate_norm / rate_tan == doctest::Approx(100.0).epsilon(0.05));
}

TEST_CASE("joint pins stay closed under a full-amplitude driven wave") {
  RobotState state = build_robot(17, 0.25, 0.1);
  GaitParams gait;
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd targets = serpenoid_targets(state.time, gait, 17);
    state = step(state, targets, gains, friction, config);
    worst = std::max(worst, max_joint_gap(state));
  }
  CHECK(worst <= 1e-3);
  // The wave actually moves the robot (forward is +y for build_robot poses);
  // this is not a static fixture.
  CHECK(centroid(state).y() > 2.5);
}

TEST_CASE("passive chain only ever loses kinetic energy") {
  // Kick the robot with two driven steps, then let it coast.
  RobotState state = build_robot(9, 0.25, 0.1);
  GaitParams gait;
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  for (int k = 0; k < 2; ++k) {
    state = step(state, serpenoid_targets(state.time, gait, 9), gains, friction, config);
  }
  const ServoGains off = passive_gains();
  const Eigen::VectorXd hold = Eigen::VectorXd::Zero(9);
  double ke_prev = kinetic_energy(state);
  CHECK(ke_prev > 0.0);
  for (int k = 0; k < 300; ++k) {
    state = step(state, hold, off, friction, config);
    const double ke = kinetic_energy(state);
    CHECK(ke <= ke_prev + 1e-9);
    ke_prev = ke;
  }
}

TEST_CASE("applied torque saturates at the servo limit") {
  RobotState state = build_robot(17, 0.25, 0.1);
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  Eigen::VectorXd targets(17);
  bool hit_limit = false;
  Eigen::VectorXd torques(17);
  for (int k = 0; k < 60; ++k) {
    for (int j = 0; j < 17; ++j) {
      targets[j] = ((k + j) % 2 == 0) ? 1.2 : -1.2;  // violent step commands
    }
    state = step(state, targets, gains, friction, config, &torques);
    for (int j = 0; j < 17; ++j) {
      CHECK(std::abs(torques[j]) <= 10.0 + 1e-9);
      if (std::abs(torques[j]) >= 10.0 - 1e-9) hit_limit = true;
    }
  }
  CHECK(hit_limit);
}

TEST_CASE("stepping is bit-deterministic") {
  GaitParams gait;
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  RobotState a = build_robot(17, 0.25, 0.1);
  RobotState b = build_robot(17, 0.25, 0.1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd ta = serpenoid_targets(a.time, gait, 17);
    a = step(a, ta, gains, friction, config);
    const Eigen::VectorXd tb = serpenoid_targets(b.time, gait, 17);
    b = step(b, tb, gains, friction, config);
  }
  for (std::size_t i = 0; i < a.links.size(); ++i) {
    CHECK(a.links[i].position.x() == b.links[i].position.x());
    CHECK(a.links[i].position.y() == b.links[i].position.y());
    CHECK(a.links[i].heading == b.links[i].heading);
    CHECK(a.links[i].lin_vel.x() == b.links[i].lin_vel.x());
    CHECK(a.links[i].lin_vel.y() == b.links[i].lin_vel.y());
    CHECK(a.links[i].ang_vel == b.links[i].ang_vel);
  }
}

TEST_CASE("step validates inputs and flags divergence") {
  RobotState state = build_robot(3, 0.25, 0.1);
  ServoGains gains;
  FrictionModel friction;
  DynamicsConfig config;
  CHECK_THROWS_AS(step(state, Eigen::VectorXd::Zero(2), gains, friction, config),
                  std::invalid_argument);
  state.links[1].position.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step(state, Eigen::VectorXd::Zero(3), gains, friction, config),
                  SimulationDiverged);
}

TEST_CASE("aggregate quantities under uniform motion") {
  RobotState state = build_robot(4, 0.25, 0.1);
  for (LinkState& link : state.links) {
    link.lin_vel = Vec2(0.2, -0.6);
  }
  const double mass = total_mass(state);
  CHECK(mass == doctest::Approx(0.5));
  CHECK((linear_momentum(state) - mass * Vec2(0.2, -0.6)).norm() <= 1e-12);
  CHECK((centroid_velocity(state) - Vec2(0.2, -0.6)).norm() <= 1e-12);
  const double expected_ke = 0.5 * mass * Vec2(0.2, -0.6).squaredNorm();
  CHECK(kinetic_energy(state) == doctest::Approx(expected_ke));
}
