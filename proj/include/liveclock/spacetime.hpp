#pragma once

// Prescribed worldlines in flat space and light-cone intersection for signal
// arrival times.

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <sstream>
#include <variant>

#include "liveclock/errors.hpp"

namespace liveclock {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;

struct StaticWorldline {
  Vec3 position = Vec3::Zero();
};

struct UniformVelocityWorldline {
  Vec3 initial_position = Vec3::Zero();  // position at t = 0
  Vec3 velocity = Vec3::Zero();
};

/// Circle in the plane z = center.z, counter-clockwise for angular_rate > 0.
struct CircularWorldline {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double angular_rate = 0.0;  // rad/s
  double initial_angle = 0.0;
};

using Worldline = std::variant<StaticWorldline, UniformVelocityWorldline, CircularWorldline>;

struct PropagationModel {
  double c = kSpeedOfLight;
  std::optional<double> conformal_factor;  // uniform scaling of all delays; unset means 1
  bool relativistic_rates = false;

  /// Signal speed after conformal scaling.
  [[nodiscard]] double effective_speed() const { return c / conformal_factor.value_or(1.0); }
};

inline bool operator==(const StaticWorldline& a, const StaticWorldline& b) { return a.position == b.position; }
inline bool operator==(const UniformVelocityWorldline& a, const UniformVelocityWorldline& b) {
  return a.initial_position == b.initial_position && a.velocity == b.velocity;
}
inline bool operator==(const CircularWorldline& a, const CircularWorldline& b) {
  return a.center == b.center && a.radius == b.radius && a.angular_rate == b.angular_rate &&
         a.initial_angle == b.initial_angle;
}
inline bool operator==(const PropagationModel& a, const PropagationModel& b) {
  return a.c == b.c && a.conformal_factor == b.conformal_factor && a.relativistic_rates == b.relativistic_rates;
}

struct SolverOptions {
  double abs_tol = 1e-15;  // seconds
  double rel_tol = 1e-12;
  int max_iterations = 64;
};

[[nodiscard]] inline Vec3 position_at(const Worldline& w, double t) {
  struct Visitor {
    double t;
    Vec3 operator()(const StaticWorldline& s) const { return s.position; }
    Vec3 operator()(const UniformVelocityWorldline& u) const { return u.initial_position + u.velocity * t; }
    Vec3 operator()(const CircularWorldline& c) const {
      const double angle = c.angular_rate * t + c.initial_angle;
      return c.center + Vec3(c.radius * std::cos(angle), c.radius * std::sin(angle), 0.0);
    }
  };
  return std::visit(Visitor{t}, w);
}

[[nodiscard]] inline Vec3 velocity_at(const Worldline& w, double t) {
  struct Visitor {
    double t;
    Vec3 operator()(const StaticWorldline&) const { return Vec3::Zero(); }
    Vec3 operator()(const UniformVelocityWorldline& u) const { return u.velocity; }
    Vec3 operator()(const CircularWorldline& c) const {
      const double angle = c.angular_rate * t + c.initial_angle;
      const double speed = c.radius * c.angular_rate;
      return Vec3(-speed * std::sin(angle), speed * std::cos(angle), 0.0);
    }
  };
  return std::visit(Visitor{t}, w);
}

/// Upper bound on the speed along the whole worldline.
[[nodiscard]] inline double max_speed(const Worldline& w) {
  struct Visitor {
    double operator()(const StaticWorldline&) const { return 0.0; }
    double operator()(const UniformVelocityWorldline& u) const { return u.velocity.norm(); }
    double operator()(const CircularWorldline& c) const { return std::fabs(c.radius * c.angular_rate); }
  };
  return std::visit(Visitor{}, w);
}

/// Proper-rate factor sqrt(1 - v^2/c^2), or 1 when relativistic rates are off.
[[nodiscard]] inline double kinematic_rate_factor(const Worldline& w, double t, const PropagationModel& model) {
  if (!model.relativistic_rates) return 1.0;
  const double beta = velocity_at(w, t).norm() / model.c;
  return std::sqrt(1.0 - beta * beta);
}

/// Earliest t > emit_t at which the receiver meets the future light cone of the
/// emission event: |x_r(t) - emit_pos| = c_eff (t - emit_t).
///
/// The light-cone function g(tau) = |x_r(emit_t + tau) - emit_pos| - c_eff tau is
/// strictly decreasing for a subluminal receiver, with g(0) >= 0 and
/// g(d0 / (c_eff - v_max)) <= 0. Newton from the static-distance estimate, kept
/// inside that bracket by bisection.
[[nodiscard]] inline double arrival_time(const Vec3& emit_pos, double emit_t, const Worldline& receiver,
                                         const PropagationModel& model, const SolverOptions& opts = {}) {
  const double c = model.effective_speed();
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::invalid_argument, "signal speed must be > 0");
  const double v_max = max_speed(receiver);
  if (v_max >= c) throw Error(ErrorKind::propagation, "receiver is not subluminal; no unique future intersection");
  const double d0 = (position_at(receiver, emit_t) - emit_pos).norm();
  if (d0 == 0.0) throw Error(ErrorKind::propagation, "receiver coincides with the emission event");

  const auto g = [&](double tau) { return (position_at(receiver, emit_t + tau) - emit_pos).norm() - c * tau; };

  double lo = 0.0;
  double hi = d0 / (c - v_max);
  double tau = d0 / c;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vec3 sep = position_at(receiver, emit_t + tau) - emit_pos;
    const double dist = sep.norm();
    const double value = dist - c * tau;
    if (value > 0.0) lo = tau; else hi = tau;
    if (value == 0.0) break;
    const double slope = (dist > 0.0 ? sep.dot(velocity_at(receiver, emit_t + tau)) / dist : 0.0) - c;
    double next = tau - value / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - tau);
    tau = next;
    if (step <= opts.abs_tol + opts.rel_tol * tau) {
      const double t_arr = emit_t + tau;
      if (!(t_arr > emit_t)) throw Error(ErrorKind::propagation, "delay below coordinate-time resolution");
      return t_arr;
    }
  }
  if (g(tau) == 0.0 && emit_t + tau > emit_t) return emit_t + tau;
  std::ostringstream msg;
  msg << "light-cone solve did not converge in " << opts.max_iterations << " iterations; residual "
      << g(tau) << " m at delay " << tau << " s";
  throw Error(ErrorKind::solver, msg.str());
}

}  // namespace liveclock
