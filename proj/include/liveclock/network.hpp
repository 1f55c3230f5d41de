#pragma once

// Channels as directed edges, numeral-bearing signals, and the phase gate at
// reception.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "liveclock/channel_log.hpp"
#include "liveclock/clock_core.hpp"
#include "liveclock/control.hpp"
#include "liveclock/errors.hpp"
#include "liveclock/spacetime.hpp"

namespace liveclock {

using NodeId = std::string;

// Payload numerals ---------------------------------------------------------

/// Shortest decimal text that round-trips the double.
[[nodiscard]] inline std::string format_numeral(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error(ErrorKind::invalid_argument, "unformattable numeral");
  return std::string(buf, end);
}

[[nodiscard]] inline std::string format_numeral(std::int64_t value) { return std::to_string(value); }

/// Splits a payload of space-separated decimal numerals.
[[nodiscard]] inline std::vector<double> parse_numerals(std::string_view payload) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < payload.size()) {
    if (payload[i] == ' ') {
      ++i;
      continue;
    }
    const std::size_t j = std::min(payload.find(' ', i), payload.size());
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(payload.data() + i, payload.data() + j, v);
    if (ec != std::errc{} || ptr != payload.data() + j) {
      throw Error(ErrorKind::invalid_argument, "malformed numeral in payload: " + std::string(payload.substr(i, j - i)));
    }
    out.push_back(v);
    i = j;
  }
  return out;
}

// Record memory --------------------------------------------------------------

struct Record {
  NodeId source;  // "oracle" for injected numerals
  std::string payload;
  std::optional<ClockReading> tx_reading;
  ClockReading rx_reading;

  friend bool operator==(const Record&, const Record&) = default;
};

inline constexpr std::size_t kDefaultMemoryCapacity = 1024;

/// Bounded ring of the most recent records.
class RecordMemory {
 public:
  explicit RecordMemory(std::size_t capacity = kDefaultMemoryCapacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorKind::invalid_argument, "record memory capacity must be >= 1");
  }

  void push(Record r) {
    if (records_.size() == capacity_) records_.pop_front();
    records_.push_back(std::move(r));
    ++total_;
  }

  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::uint64_t total_written() const { return total_; }
  [[nodiscard]] const Record& operator[](std::size_t i) const { return records_[i]; }
  [[nodiscard]] auto begin() const { return records_.begin(); }
  [[nodiscard]] auto end() const { return records_.end(); }

 private:
  std::size_t capacity_;
  std::deque<Record> records_;
  std::uint64_t total_ = 0;
};

// Nodes, signals, channels ----------------------------------------------------

struct LiveClockNode {
  NodeId id;
  Worldline worldline = StaticWorldline{};
  ClockState clock;
  ControllerState controller;
  RecordMemory memory;
  std::uint64_t next_sequence = 0;
};

struct Signal {
  NodeId source;
  NodeId destination;
  std::string payload;
  ClockReading tx_reading;
  double emit_t = 0.0;
  double arrival_t = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t sequence = 0;
};

enum class ChannelStatus { acquiring, locked, lost };

constexpr std::string_view to_string(ChannelStatus s) {
  switch (s) {
    case ChannelStatus::acquiring: return "acquiring";
    case ChannelStatus::locked: return "locked";
    case ChannelStatus::lost: return "lost";
  }
  return "acquiring";
}

inline constexpr int kDefaultStatusWindow = 8;

struct Channel {
  NodeId src;
  NodeId dst;
  ChannelLog log;
  double aiming_phase = 0.0;
  ChannelStatus status = ChannelStatus::acquiring;
  int status_window = kDefaultStatusWindow;

  std::uint64_t transmitted = 0;
  std::uint64_t accepted = 0;
  std::uint64_t dropped = 0;
  int consecutive_accepts = 0;
  int consecutive_drops = 0;

  /// Hysteresis: W consecutive drops declare the channel lost, W consecutive
  /// accepts declare it locked.
  void note_reception(bool ok) {
    if (ok) {
      ++accepted;
      ++consecutive_accepts;
      consecutive_drops = 0;
      if (consecutive_accepts >= status_window) status = ChannelStatus::locked;
    } else {
      ++dropped;
      ++consecutive_drops;
      consecutive_accepts = 0;
      if (consecutive_drops >= status_window) status = ChannelStatus::lost;
    }
  }

  [[nodiscard]] std::uint64_t in_flight() const { return transmitted - accepted - dropped; }
};

class NetworkGraph {
 public:
  void add_node(const NodeId& id) {
    if (!nodes_.insert(id).second) throw Error(ErrorKind::invalid_argument, "duplicate node id " + id);
  }

  Channel& add_channel(Channel channel) {
    if (channel.src == channel.dst) throw Error(ErrorKind::invalid_argument, "self-loop channel at " + channel.src);
    if (!nodes_.contains(channel.src) || !nodes_.contains(channel.dst)) {
      throw Error(ErrorKind::invalid_argument, "channel endpoint is not a node: " + channel.src + "->" + channel.dst);
    }
    auto key = std::make_pair(channel.src, channel.dst);
    auto [it, inserted] = channels_.try_emplace(key, std::move(channel));
    if (!inserted) throw Error(ErrorKind::duplicate_channel, key.first + "->" + key.second);
    return it->second;
  }

  /// Lookup by ordered pair; (b, a) is a different channel from (a, b).
  [[nodiscard]] Channel* channel_between(const NodeId& a, const NodeId& b) {
    auto it = channels_.find({a, b});
    return it == channels_.end() ? nullptr : &it->second;
  }
  [[nodiscard]] const Channel* channel_between(const NodeId& a, const NodeId& b) const {
    auto it = channels_.find({a, b});
    return it == channels_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] bool has_node(const NodeId& id) const { return nodes_.contains(id); }
  [[nodiscard]] const std::set<NodeId>& nodes() const { return nodes_; }
  [[nodiscard]] const std::map<std::pair<NodeId, NodeId>, Channel>& channels() const { return channels_; }
  [[nodiscard]] std::map<std::pair<NodeId, NodeId>, Channel>& channels() { return channels_; }

 private:
  std::set<NodeId> nodes_;
  std::map<std::pair<NodeId, NodeId>, Channel> channels_;
};

[[nodiscard]] inline const Channel* channel_between(const NetworkGraph& g, const NodeId& a, const NodeId& b) {
  return g.channel_between(a, b);
}

// Transmission and reception ---------------------------------------------------

inline constexpr double kTransmitPhaseTolerance = 1e-9;

/// Stamps a signal at the sender's integer reading.
[[nodiscard]] inline Signal transmit(LiveClockNode& node, Channel& channel, std::string payload, double now_t) {
  if (channel.src != node.id) throw Error(ErrorKind::routing, "node " + node.id + " does not own channel " + channel.src + "->" + channel.dst);
  const ClockReading tx = split_reading(node.clock.reading);
  if (std::fabs(tx.phase) > kTransmitPhaseTolerance) {
    throw Error(ErrorKind::scheduling, "transmit requested at non-integer reading " + format_numeral(node.clock.reading));
  }
  ++channel.transmitted;
  return Signal{node.id, channel.dst, std::move(payload), tx, now_t, std::numeric_limits<double>::quiet_NaN(),
                node.next_sequence++};
}

struct Reception {
  bool accepted = false;
  ClockReading rx_reading;
};

/// Phase gate: the character enters only inside the receiver's writing phase.
/// The node's clock must already be advanced to signal.arrival_t.
inline Reception receive(LiveClockNode& node, NetworkGraph& graph, const Signal& signal) {
  if (signal.destination != node.id) throw Error(ErrorKind::routing, "signal for " + signal.destination + " delivered to " + node.id);
  Channel* channel = graph.channel_between(signal.source, node.id);
  if (channel == nullptr) throw Error(ErrorKind::routing, "no channel from unknown source " + signal.source + " to " + node.id);

  const ClockReading rx = split_reading(node.clock.reading);
  const bool ok = in_writing_phase(rx, node.clock.eta);
  channel->note_reception(ok);
  if (ok) {
    channel->log.push_back(LogEntry{signal.tx_reading, rx, signal.arrival_t, signal.sequence});
    node.memory.push(Record{signal.source, signal.payload, signal.tx_reading, rx});
  }
  return Reception{ok, rx};
}

}  // namespace liveclock
