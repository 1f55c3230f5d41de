#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "liveclock/spacetime.hpp"

using namespace liveclock;

namespace {

/// Plain bisection on |x_r(t_e + tau) - e| - c tau over a generous bracket.
double bisection_arrival(const Vec3& emit, double emit_t, const Worldline& w, double c) {
  const auto g = [&](double tau) { return (position_at(w, emit_t + tau) - emit).norm() - c * tau; };
  double lo = 0.0;
  double hi = 1.0;
  while (g(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 400 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return emit_t + 0.5 * (lo + hi);
}

Worldline random_worldline(std::mt19937_64& rng, double c) {
  std::uniform_real_distribution<double> pos(-1e3, 1e3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 0.95);
  switch (rng() % 3) {
    case 0: return StaticWorldline{Vec3(pos(rng), pos(rng), pos(rng))};
    case 1: {
      Vec3 dir(unit(rng), unit(rng), unit(rng));
      if (dir.norm() < 1e-3) dir = Vec3(1, 0, 0);
      return UniformVelocityWorldline{Vec3(pos(rng), pos(rng), pos(rng)), dir.normalized() * frac(rng) * c};
    }
    default: {
      const double radius = 1.0 + std::fabs(pos(rng));
      return CircularWorldline{Vec3(pos(rng), pos(rng), pos(rng)), radius, frac(rng) * c / radius * unit(rng),
                               unit(rng) * std::numbers::pi};
    }
  }
}

}  // namespace

TEST(PositionAt, Examples) {
  const Worldline s = StaticWorldline{Vec3(1, 2, 3)};
  EXPECT_EQ(position_at(s, 0.0), Vec3(1, 2, 3));
  EXPECT_EQ(position_at(s, 1e6), Vec3(1, 2, 3));
  EXPECT_EQ(position_at(UniformVelocityWorldline{Vec3::Zero(), Vec3(1, 0, 0)}, 5.0), Vec3(5, 0, 0));
  const Vec3 quarter = position_at(CircularWorldline{Vec3::Zero(), 1.0, std::numbers::pi / 2, 0.0}, 1.0);
  EXPECT_NEAR(quarter.x(), 0.0, 1e-15);
  EXPECT_NEAR(quarter.y(), 1.0, 1e-15);
  EXPECT_EQ(quarter.z(), 0.0);
}

TEST(KinematicRateFactor, Examples) {
  PropagationModel rel{1.0, std::nullopt, true};
  EXPECT_EQ(kinematic_rate_factor(StaticWorldline{}, 3.0, rel), 1.0);
  EXPECT_NEAR(kinematic_rate_factor(UniformVelocityWorldline{Vec3::Zero(), Vec3(0.6, 0, 0)}, 0.0, rel), 0.8, 1e-15);
  PropagationModel off{1.0, std::nullopt, false};
  EXPECT_EQ(kinematic_rate_factor(UniformVelocityWorldline{Vec3::Zero(), Vec3(0.6, 0, 0)}, 0.0, off), 1.0);
  EXPECT_EQ(kinematic_rate_factor(CircularWorldline{Vec3::Zero(), 1.0, 0.9, 0.0}, 2.0, off), 1.0);
}

TEST(ArrivalTime, StaticReceiverAtOneLightSecond) {
  const PropagationModel m{3e8};
  EXPECT_DOUBLE_EQ(arrival_time(Vec3::Zero(), 0.0, StaticWorldline{Vec3(3e8, 0, 0)}, m), 1.0);
}

TEST(ArrivalTime, RecedingAtHalfLightSpeed) {
  const double c = 3e8;
  const double d = 1.5e8;
  const Worldline w = UniformVelocityWorldline{Vec3(d, 0, 0), Vec3(0.5 * c, 0, 0)};
  EXPECT_NEAR(arrival_time(Vec3::Zero(), 0.0, w, PropagationModel{c}), 2.0 * d / c, 1e-15);
}

TEST(ArrivalTime, CircularReceiverMatchesBisection) {
  const double c = 3e8;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 1000; ++i) {
    const Worldline w = CircularWorldline{Vec3::Zero(), 100.0, 1e3, angle(rng)};
    const double emit_t = 1e-3 * angle(rng);
    const Vec3 emit = position_at(CircularWorldline{Vec3::Zero(), 100.0, 1e3, angle(rng)}, emit_t);
    if ((position_at(w, emit_t) - emit).norm() < 1e-3) continue;
    const double t = arrival_time(emit, emit_t, w, PropagationModel{c});
    ASSERT_NEAR(t, bisection_arrival(emit, emit_t, w, c), 1e-12);
  }
}

TEST(ArrivalTime, RandomCasesSatisfyLightCone) {
  const double c = 299792458.0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(-1e3, 1e3);
  std::uniform_real_distribution<double> time(-1e-3, 1e-3);
  for (int i = 0; i < 10'000; ++i) {
    const Worldline w = random_worldline(rng, c);
    const Vec3 emit(pos(rng), pos(rng), pos(rng));
    const double emit_t = time(rng);
    const double t = arrival_time(emit, emit_t, w, PropagationModel{c});
    ASSERT_GT(t, emit_t);
    const double delay = t - emit_t;
    const double dist = (position_at(w, t) - emit).norm();
    ASSERT_LT(std::fabs(dist - c * delay), 1e-9 * c * delay + 1e-15 * c) << i;
  }
}

TEST(ArrivalTime, StaticSwapSymmetry) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a(pos(rng), pos(rng), pos(rng));
    const Vec3 b(pos(rng), pos(rng), pos(rng));
    const PropagationModel m;
    ASSERT_EQ(arrival_time(a, 0.0, StaticWorldline{b}, m), arrival_time(b, 0.0, StaticWorldline{a}, m));
  }
}

TEST(ArrivalTime, MonotoneInEmissionTime) {
  const double c = 1.0;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> step(1e-6, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const Worldline w = random_worldline(rng, c);
    const Vec3 emit(5e3, -2e3, 1e3);
    double t_emit = 0.0;
    double last = arrival_time(emit, t_emit, w, PropagationModel{c});
    for (int k = 0; k < 20; ++k) {
      t_emit += step(rng);
      const double t = arrival_time(emit, t_emit, w, PropagationModel{c});
      ASSERT_GT(t, last);
      last = t;
    }
  }
}

TEST(ArrivalTime, ConformalFactorScalesDelays) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 emit(pos(rng), pos(rng), pos(rng));
    const Worldline a = StaticWorldline{Vec3(pos(rng), pos(rng), pos(rng))};
    const Worldline b = StaticWorldline{Vec3(pos(rng), pos(rng), pos(rng))};
    const double da1 = arrival_time(emit, 0.0, a, PropagationModel{1.0, 1.0});
    const double da2 = arrival_time(emit, 0.0, a, PropagationModel{1.0, 2.0});
    const double db1 = arrival_time(emit, 0.0, b, PropagationModel{1.0, 1.0});
    const double db2 = arrival_time(emit, 0.0, b, PropagationModel{1.0, 2.0});
    ASSERT_EQ(da2, 2.0 * da1);
    ASSERT_NEAR(da2 / db2, da1 / db1, 1e-15 * da1 / db1);
  }
}

TEST(ArrivalTime, UnsetConformalFactorMeansUnit) {
  const Worldline w = StaticWorldline{Vec3(7, 0, 0)};
  EXPECT_EQ(arrival_time(Vec3::Zero(), 0.0, w, PropagationModel{1.0}),
            arrival_time(Vec3::Zero(), 0.0, w, PropagationModel{1.0, 1.0}));
}

TEST(ArrivalTime, Errors) {
  const PropagationModel m{1.0};
  try {
    (void)arrival_time(Vec3::Zero(), 0.0, UniformVelocityWorldline{Vec3(1, 0, 0), Vec3(1.0, 0, 0)}, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::propagation);
  }
  try {
    (void)arrival_time(Vec3(1, 0, 0), 0.0, StaticWorldline{Vec3(1, 0, 0)}, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::propagation);
  }
  try {
    (void)arrival_time(Vec3(5, 0, 0), 0.0, CircularWorldline{Vec3::Zero(), 1.0, 0.5, 0.3}, m, SolverOptions{0.0, 0.0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::solver);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}
