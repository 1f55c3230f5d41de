#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "liveclock/analysis.hpp"
#include "liveclock/engine.hpp"

using namespace liveclock;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ControllerState unbounded(double kp, double ki) {
  ControllerState c;
  c.kp = kp;
  c.ki = ki;
  c.command_bound = kInf;
  c.output_bound = kInf;
  c.integral_bound = kInf;
  return c;
}

/// Scalar phase loop: the correction issued after observing e_k is held for one
/// cycle, so e_{k+1} = e_k + u_k with u_k = -(kp e_k + ki sum e).
std::vector<double> recurrence(double e0, double kp, double ki, int steps) {
  std::vector<double> e{e0};
  double integral = 0.0;
  for (int k = 0; k < steps; ++k) {
    integral += e.back();
    const double u = -(kp * e.back() + ki * integral);
    e.push_back(e.back() + u);
  }
  return e;
}

/// First index after which every |e| stays below tol.
std::size_t settle_index(const std::vector<double>& e, double tol) {
  std::size_t last_bad = 0;
  bool any_bad = false;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (std::fabs(e[i]) >= tol) {
      last_bad = i;
      any_bad = true;
    }
  }
  return any_bad ? last_bad + 1 : 0;
}

Scenario echo_scenario(double delay) {
  Scenario s;
  s.horizon = 30;
  s.propagation.c = 1.0;
  NodeSpec a;
  a.id = "A";
  a.eta = 0.01;
  a.control.enabled = false;
  NodeSpec b = a;
  b.id = "B";
  b.worldline = StaticWorldline{Vec3(delay, 0, 0)};
  s.nodes = {a, b};
  s.channels = {ChannelSpec{"A", "B", {AimingPoint{AimKind::echo, 0.0, 0.0}}}, ChannelSpec{"B", "A", {}}};
  return s;
}

/// Enumerates the transmit/receive schedule of two aligned ideal clocks that
/// both transmit at every integer reading: first B transmission at or after
/// the reception of A's signal m, then its arrival back at A.
double enumerate_echo(std::int64_t m, double delay) {
  const double b_receives = static_cast<double>(m) + delay;
  for (std::int64_t k = 0;; ++k) {
    if (static_cast<double>(k) >= b_receives) return static_cast<double>(k) + delay - static_cast<double>(m);
  }
}

}  // namespace

TEST(PhaseDeviation, Examples) {
  EXPECT_NEAR(phase_deviation({3, 0.1}, 0.0), 0.1, 1e-15);
  EXPECT_NEAR(phase_deviation({3, -0.45}, 0.45), 0.1, 1e-12);
  EXPECT_EQ(phase_deviation({3, 0.2}, 0.2), 0.0);
}

TEST(PhaseDeviation, AlwaysWrapped) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> p(-0.4999, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const double d = phase_deviation({0, p(rng)}, p(rng));
    ASSERT_GT(d, -0.5);
    ASSERT_LE(d, 0.5);
  }
}

TEST(EinsteinResidual, Examples) {
  EXPECT_EQ(einstein_residual(0, 1, 2), 0.0);
  EXPECT_NEAR(einstein_residual(0, 1.1, 2), 0.1, 1e-15);
  EXPECT_EQ(einstein_residual(5, 5.5, 6), 0.0);
}

TEST(EinsteinResidual, InvalidExchange) {
  for (auto [a, ap] : {std::pair{2.0, 2.0}, std::pair{3.0, 1.0}}) {
    try {
      (void)einstein_residual(a, 0.0, ap);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_exchange);
    }
  }
}

TEST(EinsteinResidual, InvariantUnderCommonShift) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_real_distribution<double> gap(0.01, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double ta = u(rng);
    const double tap = ta + gap(rng);
    const double tb = u(rng);
    const double s = std::round(u(rng));
    ASSERT_NEAR(einstein_residual(ta + s, tb + s, tap + s), einstein_residual(ta, tb, tap), 1e-12);
  }
}

TEST(EchoCount, FromChannelLogs) {
  const std::vector<LogEntry> forward{{ClockReading{10, 0.0}, ClockReading{10, 0.15}, 10.15, 0}};
  const std::vector<LogEntry> reverse{{ClockReading{10, 0.0}, ClockReading{10, 0.15}, 10.15, 0},
                                      {ClockReading{11, 0.0}, ClockReading{11, 0.3}, 11.3, 1}};
  EXPECT_NEAR(echo_count(forward, reverse, 10, 10.0), 1.3, 1e-12);
  try {
    (void)echo_count(forward, reverse, 10, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::echo_timeout);
  }
  EXPECT_THROW((void)echo_count(forward, reverse, 11, 10.0), Error);
}

TEST(EchoCount, StaticPairMatchesEventEnumeration) {
  const Trace t = run(echo_scenario(0.3));
  int echoes = 0;
  for (const auto& r : t.rows()) {
    if (r.kind != RowKind::echo) continue;
    ++echoes;
    ASSERT_NEAR(parse_numerals(r.payload).at(0), enumerate_echo(0, 0.3), 1e-12);
    ASSERT_NEAR(enumerate_echo(0, 0.3), 1.3, 1e-15);
  }
  EXPECT_GT(echoes, 20);
}

TEST(EchoCount, RandomDelaysMatchEnumerationAndLowerBound) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> whole(0.0, 3.0);
  std::uniform_real_distribution<double> frac(0.02, 0.45);
  for (int trial = 0; trial < 60; ++trial) {
    const double f = frac(rng);
    const double delay = std::floor(whole(rng)) + (trial % 2 ? f : 1.0 - f);
    const Trace t = run(echo_scenario(delay));
    const auto series = echo_series(t, "A->B");
    ASSERT_FALSE(series.empty()) << delay;
    for (const auto& [time, delta] : series) {
      ASSERT_GE(delta, 2.0 * delay - 1e-12);
      const std::int64_t m = std::llround(time - delta);
      ASSERT_NEAR(delta, enumerate_echo(m, delay), 1e-9) << delay;
    }
  }
}

TEST(Steer, Examples) {
  ControllerState c = unbounded(0.2, 0.02);
  const std::vector<double> zero{0.0}, w{1.0};
  auto [c0, d0] = steer(c, zero, w);
  EXPECT_EQ(d0, 0.0);
  EXPECT_EQ(c0.integral, c.integral);

  ControllerState p = unbounded(0.1, 0.0);
  const std::vector<double> dev{0.2};
  EXPECT_NEAR(steer(p, dev, w).second, -0.02, 1e-15);

  EXPECT_EQ(steer(c, std::vector<double>{}, std::vector<double>{}).second, 0.0);
  EXPECT_THROW((void)steer(c, dev, std::vector<double>{}), Error);
  EXPECT_THROW((void)steer(c, dev, std::vector<double>{-1.0}), Error);
}

TEST(Steer, WeightedMeanError) {
  ControllerState p = unbounded(1.0, 0.0);
  const std::vector<double> dev{0.3, -0.1};
  const std::vector<double> w{1.0, 3.0};
  EXPECT_NEAR(steer(p, dev, w).second, -(0.3 - 0.3) / 4.0, 1e-15);
  EXPECT_EQ(steer(p, dev, std::vector<double>{0.0, 0.0}).second, 0.0);
}

TEST(Steer, CommandAndIntegralBounds) {
  ControllerState c;
  c.command_bound = 0.01;
  c.integral_bound = 0.5;
  const std::vector<double> dev{0.4}, w{1.0};
  for (int i = 0; i < 100; ++i) {
    auto [next, delta] = steer(c, dev, w);
    ASSERT_LE(std::fabs(delta), 0.01 + 1e-15);
    ASSERT_LE(std::fabs(next.integral), 0.5);
    c = next;
  }
}

TEST(Steer, FastReceiverIsSlowedDown) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(1e-4, 0.2);
  for (int i = 0; i < 1000; ++i) {
    ControllerState c;
    const std::vector<double> dev{pos(rng)}, w{1.0};
    ASSERT_LT(steer(c, dev, w).second, 0.0);
  }
}

TEST(Steer, ClosedLoopMatchesScalarRecurrence) {
  const auto oracle = recurrence(0.2, 0.2, 0.02, 400);
  const std::size_t n = settle_index(oracle, 0.01);
  ASSERT_GT(n, 0u);
  ASSERT_LT(n, 100u);

  ControllerState c = unbounded(0.2, 0.02);
  std::vector<double> e{0.2};
  for (int k = 0; k < 400; ++k) {
    const std::vector<double> dev{e.back()}, w{1.0};
    auto [next, delta] = steer(c, dev, w);
    c = next;
    e.push_back(e.back() + c.last_output);
  }
  for (std::size_t k = 0; k < e.size(); ++k) ASSERT_NEAR(e[k], oracle[k], 1e-12);
  EXPECT_EQ(settle_index(e, 0.01), n);
}

TEST(Steer, EngineLoopSettlesWithinRecurrenceBound) {
  // Receiver B steers on arrivals one cycle after emission; its initial phase
  // error is 0.2 relative to the aiming point.
  const auto oracle = recurrence(0.2, 0.2, 0.02, 400);
  const std::size_t n = settle_index(oracle, 0.01);

  Scenario s;
  s.horizon = 300;
  s.propagation.c = 1.0;
  NodeSpec a;
  a.id = "A";
  a.control.enabled = false;
  NodeSpec b;
  b.id = "B";
  b.worldline = StaticWorldline{Vec3(1.0, 0, 0)};
  b.initial_reading = 0.2;
  b.correction_bound = 0.5;
  b.control.command_bound = 1.0;
  b.transmit.enabled = false;
  s.nodes = {a, b};
  s.channels = {ChannelSpec{"A", "B", {AimingPoint{AimKind::phase, 0.0}}}};
  const Trace t = run(s);
  std::vector<double> dev;
  for (const auto& r : t.rows()) {
    if (r.kind == RowKind::arrival) dev.push_back(phase_deviation({r.count, r.phase}, 0.0));
  }
  ASSERT_NEAR(dev.at(0), 0.2, 1e-12);
  EXPECT_LE(settle_index(dev, 0.01), n);
}
