#pragma once

#include <cstdint>
#include <vector>

#include "liveclock/clock_core.hpp"

namespace liveclock {

/// One accepted character on a channel: the sender's reading at transmission
/// paired with the receiver's reading at reception.
struct LogEntry {
  ClockReading tx_reading;
  ClockReading rx_reading;
  double rx_time = 0.0;  // coordinate seconds
  std::uint64_t sequence = 0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using ChannelLog = std::vector<LogEntry>;

}  // namespace liveclock
