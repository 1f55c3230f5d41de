#pragma once

// Per-node feedback: deviations from aiming points and the PI steering law.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

#include "liveclock/channel_log.hpp"
#include "liveclock/clock_core.hpp"
#include "liveclock/errors.hpp"

namespace liveclock {

enum class AimKind { phase, echo, einstein };

constexpr std::string_view to_string(AimKind k) {
  switch (k) {
    case AimKind::phase: return "phase";
    case AimKind::echo: return "echo";
    case AimKind::einstein: return "einstein";
  }
  return "phase";
}

/// A target relation a channel is steered toward.
///  - phase:    value is phi_0, steered by the receiver of the channel.
///  - echo:     value is the echo-count constant Delta_0, steered by the sender.
///  - einstein: value is unused (target residual 0); residuals are computed by
///              the sender and steered by the receiver. Weight 0 measures only.
struct AimingPoint {
  AimKind kind = AimKind::phase;
  double value = 0.0;
  double weight = 1.0;
  double tolerance = 0.0;

  friend bool operator==(const AimingPoint&, const AimingPoint&) = default;
};

struct ControllerState {
  double kp = 0.2;
  double ki = 0.02;
  double integral = 0.0;
  double last_error = 0.0;
  double last_output = 0.0;     // cumulative correction issued so far
  double command_bound = 5e-2;  // max |rate_delta| per steer call
  double output_bound = std::numeric_limits<double>::infinity();  // mirrors the clock's correction clamp
  double integral_bound = 1e3;

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

/// Wrapped difference rx.phase - phi0, mapped into (-1/2, 1/2].
[[nodiscard]] inline double phase_deviation(const ClockReading& rx, double phi0) {
  return split_reading(rx.phase - phi0).phase;
}

/// Einstein midpoint residual t_B - (t_A + t'_A)/2; positive when B reads ahead.
[[nodiscard]] inline double einstein_residual(double t_a, double t_b, double t_a_prime) {
  if (!(t_a < t_a_prime)) throw Error(ErrorKind::invalid_exchange, "t_A must precede t'_A");
  return t_b - 0.5 * (t_a + t_a_prime);
}

/// Echo count at A's integer reading m, recovered from the two channel logs:
/// the forward log gives B's reading at reception of m, and the first reverse
/// character B transmitted at or after that reading which reached A closes the
/// echo. Returns A's reading at that reception minus m.
[[nodiscard]] inline double echo_count(std::span<const LogEntry> forward, std::span<const LogEntry> reverse,
                                       std::int64_t m, double timeout_cycles) {
  const auto sent = std::find_if(forward.begin(), forward.end(),
                                 [m](const LogEntry& e) { return e.tx_reading.count == m; });
  if (sent == forward.end()) throw Error(ErrorKind::echo_timeout, "transmission at the given reading never reached B");
  const double b_received = sent->rx_reading.value();
  for (const LogEntry& e : reverse) {
    if (e.tx_reading.value() >= b_received && e.rx_time >= sent->rx_time) {
      const double delta = e.rx_reading.value() - static_cast<double>(m);
      if (delta > timeout_cycles) break;
      return delta;
    }
  }
  throw Error(ErrorKind::echo_timeout, "no echo observed within timeout");
}

/// Weighted PI step. The positional law u = -(kp * error + ki * integral) is
/// issued incrementally: the returned delta moves the previously issued output
/// toward u, limited to command_bound per call. The output saturates at
/// output_bound, and the integral freezes while saturation would deepen
/// (conditional integration). An empty or zero-weight deviation list coasts
/// with zero delta, holding the current correction.
[[nodiscard]] inline std::pair<ControllerState, double> steer(ControllerState ctrl, std::span<const double> deviations,
                                                              std::span<const double> weights) {
  if (deviations.size() != weights.size()) {
    throw Error(ErrorKind::invalid_argument, "deviations and weights differ in length");
  }
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < deviations.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw Error(ErrorKind::invalid_argument, "weights must be nonnegative");
    weight_sum += weights[i];
    weighted += weights[i] * deviations[i];
  }
  if (weight_sum == 0.0) return {ctrl, 0.0};

  const double error = weighted / weight_sum;
  double integral = std::clamp(ctrl.integral + error, -ctrl.integral_bound, ctrl.integral_bound);
  double target = -(ctrl.kp * error + ctrl.ki * integral);
  if (std::fabs(target) > ctrl.output_bound && std::fabs(integral) > std::fabs(ctrl.integral)) {
    integral = ctrl.integral;
    target = -(ctrl.kp * error + ctrl.ki * integral);
  }
  target = std::clamp(target, -ctrl.output_bound, ctrl.output_bound);
  const double delta = std::clamp(target - ctrl.last_output, -ctrl.command_bound, ctrl.command_bound);
  ctrl.integral = integral;
  ctrl.last_error = error;
  ctrl.last_output += delta;
  return {ctrl, delta};
}

}  // namespace liveclock
