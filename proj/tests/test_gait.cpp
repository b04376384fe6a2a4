#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "snake/gait.hpp"
#include "snake/rng.hpp"

#include <cmath>

using namespace snake;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("serpenoid closed-form spot checks") {
  // theta_i = A * sin(omega*t - (i-1)*phi), joints indexed from 1.
  GaitParams p;

  p.amplitude = 0.8;
  p.omega = 2.0;
  p.phase_offset = 0.5;
  Eigen::VectorXd t0 = serpenoid_targets(0.0, p, 5);
  CHECK(t0[0] == doctest::Approx(0.0).epsilon(1e-15));

  p.amplitude = 1.0;
  p.omega = 2.0;
  p.phase_offset = kPi / 2.0;
  Eigen::VectorXd t1 = serpenoid_targets(0.0, p, 5);
  // Joint 2: sin(-pi/2) = -1.
  CHECK(t1[1] == doctest::Approx(-1.0).epsilon(1e-12));

  p.amplitude = 0.5;
  p.omega = kPi;
  p.phase_offset = kPi / 4.0;
  Eigen::VectorXd t2 = serpenoid_targets(1.0, p, 5);
  // Joint 3: 0.5 * sin(pi - pi/2) = 0.5.
  CHECK(t2[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("targets bounded by amplitude") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    GaitParams p;
    p.amplitude = 0.05 + 2.0 * rng.uniform();
    p.omega = 0.1 + 6.0 * rng.uniform();
    p.phase_offset = 2.0 * kPi * rng.uniform();
    const double t = 20.0 * rng.uniform();
    const int n = 1 + static_cast<int>(rng.integer(20));
    Eigen::VectorXd targets = serpenoid_targets(t, p, n);
    REQUIRE(targets.size() == n);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(targets[i]) <= p.amplitude + 1e-12);
    }
  }
}

TEST_CASE("wave travels down the body: joint i+1 lags by phi/omega") {
  GaitParams p;
  p.amplitude = 0.6;
  p.omega = 3.0;
  p.phase_offset = 0.7;
  const double lag = p.phase_offset / p.omega;
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = 10.0 * rng.uniform();
    Eigen::VectorXd now = serpenoid_targets(t, p, 8);
    Eigen::VectorXd earlier = serpenoid_targets(t - lag, p, 8);
    for (int i = 0; i + 1 < 8; ++i) {
      CHECK(now[i + 1] == doctest::Approx(earlier[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("periodic in t with period 2*pi/omega") {
  GaitParams p;
  p.amplitude = 0.6;
  p.omega = 3.0;
  p.phase_offset = 2.0 * kPi / 17.0;
  const double period = 2.0 * kPi / p.omega;
  for (double t : {0.0, 0.37, 1.9, 12.345}) {
    Eigen::VectorXd a = serpenoid_targets(t, p, 17);
    Eigen::VectorXd b = serpenoid_targets(t + period, p, 17);
    for (int i = 0; i < 17; ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("phase offset zero resolves to 2*pi/K") {
  GaitParams p;  // default phase_offset = 0 means "pick one full wave"
  CHECK(p.resolved_phase_offset(17) == doctest::Approx(2.0 * kPi / 17.0));
  CHECK(p.resolved_phase_offset(5) == doctest::Approx(2.0 * kPi / 5.0));
  p.phase_offset = 0.9;
  CHECK(p.resolved_phase_offset(17) == doctest::Approx(0.9));
}

TEST_CASE("phase-vector form agrees with the time form") {
  GaitParams p;
  p.amplitude = 0.6;
  p.omega = 3.0;
  p.phase_offset = 0.0;
  const int n = 17;
  const double phi = p.resolved_phase_offset(n);
  for (double t : {0.0, 0.5, 2.25}) {
    Eigen::VectorXd phases = Eigen::VectorXd::Constant(n, p.omega * t);
    Eigen::VectorXd a = serpenoid_targets_at(phases, p.amplitude, phi);
    Eigen::VectorXd b = serpenoid_targets(t, p, n);
    for (int i = 0; i < n; ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("joint count must be positive") {
  GaitParams p;
  CHECK_THROWS_AS(serpenoid_targets(0.0, p, 0), std::invalid_argument);
  CHECK_THROWS_AS(serpenoid_targets(0.0, p, -3), std::invalid_argument);
}
