#pragma once

// A single live clock: its reading, the (count, phase) split, drift noise and
// rate steering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "liveclock/errors.hpp"

namespace liveclock {

/// A clock value split as count + phase, with -1/2 < phase <= 1/2.
struct ClockReading {
  std::int64_t count = 0;
  double phase = 0.0;

  [[nodiscard]] double value() const { return static_cast<double>(count) + phase; }

  friend bool operator==(const ClockReading&, const ClockReading&) = default;
};

// Beyond this magnitude every double is an integer and the count no longer fits
// comfortably in 64 bits.
inline constexpr double kMaxReadingMagnitude = 4.0e18;

/// Splits a reading in cycles into its cycle count and phase.
/// The count is the smallest integer >= value - 1/2, so a value exactly halfway
/// between integers rounds down and carries phase +1/2.
[[nodiscard]] inline ClockReading split_reading(double value) {
  if (!std::isfinite(value) || std::fabs(value) > kMaxReadingMagnitude) {
    throw Error(ErrorKind::invalid_argument, "reading must be finite and representable");
  }
  // round() leaves |value - count| <= 1/2 and the subtraction is exact
  // (Sterbenz), so count + phase reconstructs value bit-for-bit.
  double count = std::round(value);
  double phase = value - count;
  if (phase == -0.5) {
    count -= 1.0;
    phase = 0.5;
  }
  return ClockReading{static_cast<std::int64_t>(count), phase};
}

inline void check_eta(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "eta must lie strictly inside (0, 1)");
  }
}

/// Half-width of the writing window for duty parameter eta.
[[nodiscard]] inline double writing_half_width(double eta) {
  check_eta(eta);
  return (1.0 - eta) / 2.0;
}

/// True iff the reading sits inside the writing phase |phase| < (1 - eta)/2.
[[nodiscard]] inline bool in_writing_phase(const ClockReading& reading, double eta) {
  return std::fabs(reading.phase) < writing_half_width(eta);
}

/// Two-component oscillator noise: white FM plus random-walk FM.
struct DriftModel {
  double white_fm_sigma = 0.0;  // fractional frequency, redrawn every cycle
  double rw_fm_sigma = 0.0;     // random-walk step of fractional frequency per cycle
  std::uint64_t seed = 0;

  [[nodiscard]] bool ideal() const { return white_fm_sigma == 0.0 && rw_fm_sigma == 0.0; }

  friend bool operator==(const DriftModel&, const DriftModel&) = default;
};

/// Accumulator for a DriftModel. Samples are redrawn once per cycle boundary.
class DriftState {
 public:
  DriftState() = default;

  explicit DriftState(const DriftModel& model) : model_(model), rng_(model.seed) {
    if (model.white_fm_sigma < 0.0 || model.rw_fm_sigma < 0.0 ||
        !std::isfinite(model.white_fm_sigma) || !std::isfinite(model.rw_fm_sigma)) {
      throw Error(ErrorKind::invalid_argument, "drift sigmas must be finite and >= 0");
    }
    draw_white();
  }

  /// Current fractional-frequency offset contributed by noise.
  [[nodiscard]] double offset() const { return rw_level_ + white_; }
  [[nodiscard]] double rw_level() const { return rw_level_; }
  [[nodiscard]] const DriftModel& model() const { return model_; }
  [[nodiscard]] std::uint64_t cycles() const { return cycles_; }

  /// Advances the noise process by one cycle.
  void step() {
    ++cycles_;
    if (model_.rw_fm_sigma > 0.0) rw_level_ += model_.rw_fm_sigma * normal_(rng_);
    draw_white();
  }

 private:
  void draw_white() { white_ = model_.white_fm_sigma > 0.0 ? model_.white_fm_sigma * normal_(rng_) : 0.0; }

  DriftModel model_{};
  std::mt19937_64 rng_{};
  std::normal_distribution<double> normal_{0.0, 1.0};
  double rw_level_ = 0.0;
  double white_ = 0.0;
  std::uint64_t cycles_ = 0;
};

inline constexpr double kDefaultCorrectionBound = 1e-2;
// Floor on the total fractional rate factor; keeps the rate positive even under
// extreme noise draws.
inline constexpr double kMinRateFactor = 1e-6;

struct ClockState {
  double reading = 0.0;       // cycles
  double rate = 1.0;          // nominal cycles per second of coordinate time
  double rate_correction = 0.0;
  double correction_bound = kDefaultCorrectionBound;
  double eta = 0.5;
  DriftState drift{};
  double next_boundary = 1.0;  // next integer reading, where noise is redrawn
};

[[nodiscard]] inline ClockState make_clock(double initial_reading, double rate, double eta,
                                           const DriftModel& drift,
                                           double correction_bound = kDefaultCorrectionBound) {
  check_eta(eta);
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorKind::invalid_argument, "rate must be > 0");
  if (!std::isfinite(initial_reading)) throw Error(ErrorKind::invalid_argument, "reading must be finite");
  if (!(correction_bound >= 0.0 && correction_bound < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "correction bound must lie in [0, 1)");
  }
  ClockState s;
  s.reading = initial_reading;
  s.rate = rate;
  s.eta = eta;
  s.correction_bound = correction_bound;
  s.drift = DriftState(drift);
  s.next_boundary = std::floor(initial_reading) + 1.0;
  return s;
}

/// Cycles per second of coordinate time right now.
[[nodiscard]] inline double effective_rate(const ClockState& s, double kinematic_factor = 1.0) {
  const double factor = std::max(kMinRateFactor, 1.0 + s.drift.offset() + s.rate_correction);
  return s.rate * factor * kinematic_factor;
}

/// Tolerance (cycles) within which a reading counts as having reached a cycle boundary.
[[nodiscard]] inline double boundary_tolerance(double boundary) {
  return 1e-12 + 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(boundary);
}

/// Coordinate time until the reading reaches its next integer.
[[nodiscard]] inline double time_to_next_tick(const ClockState& s, double kinematic_factor = 1.0) {
  return std::max(0.0, (s.next_boundary - s.reading) / effective_rate(s, kinematic_factor));
}

/// In-place integration over dt seconds. The rate is piecewise constant between
/// integer readings; every crossed integer redraws the noise sample, so
/// splitting dt into pieces never changes the result.
inline void advance_by(ClockState& s, double dt, double kinematic_factor = 1.0) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::invalid_argument, "dt must be finite and >= 0");
  if (!(kinematic_factor > 0.0)) throw Error(ErrorKind::invalid_argument, "kinematic factor must be > 0");
  double remaining = dt;
  while (remaining > 0.0) {
    const double eff = effective_rate(s, kinematic_factor);
    const double target = s.reading + eff * remaining;
    const double tol = boundary_tolerance(s.next_boundary);
    if (target >= s.next_boundary - tol) {
      // A target within tolerance past the boundary is rounding, not a new cycle.
      remaining = target <= s.next_boundary + tol ? 0.0 : std::max(0.0, remaining - (s.next_boundary - s.reading) / eff);
      s.reading = s.next_boundary;
      s.next_boundary += 1.0;
      s.drift.step();
    } else {
      s.reading = target;
      remaining = 0.0;
    }
  }
}

/// Lands the reading exactly on the pending integer boundary, redrawing noise.
/// Used to absorb coordinate-time rounding at scheduled tick instants.
inline void complete_cycle(ClockState& s) {
  s.reading = s.next_boundary;
  s.next_boundary += 1.0;
  s.drift.step();
}

[[nodiscard]] inline ClockState advance(ClockState s, double dt, double kinematic_factor = 1.0) {
  advance_by(s, dt, kinematic_factor);
  return s;
}

/// Adds delta to the commanded correction, clamped to the configured bound.
inline void command_rate_in_place(ClockState& s, double delta) {
  s.rate_correction = std::clamp(s.rate_correction + delta, -s.correction_bound, s.correction_bound);
}

[[nodiscard]] inline ClockState command_rate(ClockState s, double delta) {
  command_rate_in_place(s, delta);
  return s;
}

}  // namespace liveclock
