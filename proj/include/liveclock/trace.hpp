#pragma once

// Trace rows, in-memory traces, and the CSV / JSON streaming writers.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "liveclock/network.hpp"

namespace liveclock {

enum class RowKind { tick, transmit, arrival, oracle, residual, echo, echo_timeout, end };

constexpr std::string_view to_string(RowKind k) {
  switch (k) {
    case RowKind::tick: return "tick";
    case RowKind::transmit: return "transmit";
    case RowKind::arrival: return "arrival";
    case RowKind::oracle: return "oracle";
    case RowKind::residual: return "residual";
    case RowKind::echo: return "echo";
    case RowKind::echo_timeout: return "echo_timeout";
    case RowKind::end: return "end";
  }
  return "tick";
}

/// One trace row. Unused optional fields are written empty (CSV) or null (JSON).
///  - arrival rows: accepted set, phase is the receiver's phase at arrival.
///  - residual rows: residual_s is the Einstein residual the initiating node
///    computed for the exchange on `channel`.
///  - echo rows: payload holds the echo count in cycles as a numeral.
struct TraceRow {
  double time_s = 0.0;
  RowKind kind = RowKind::tick;
  NodeId node_id;
  double reading_cycles = 0.0;
  std::int64_t count = 0;
  double phase = 0.0;
  std::string channel;
  std::string payload;
  std::optional<bool> accepted;
  double rate_correction = 0.0;
  std::optional<double> residual_s;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline constexpr std::string_view kTraceColumns =
    "time_s,event_kind,node_id,reading_cycles,count,phase,channel,payload,accepted,rate_correction,residual_s";

[[nodiscard]] inline std::string channel_label(const NodeId& src, const NodeId& dst) { return src + "->" + dst; }

/// Run metadata the analyses need alongside the rows.
struct TraceHeader {
  struct NodeInfo {
    NodeId id;
    double eta = 0.5;
  };
  struct ChannelInfo {
    NodeId src;
    NodeId dst;
    double aiming_phase = 0.0;
  };
  double horizon = 0.0;
  double nominal_rate = 1.0;
  double end_time = 0.0;
  double lock_hold_fraction = 0.5;
  std::vector<NodeInfo> nodes;
  std::vector<ChannelInfo> channels;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void begin(const TraceHeader&) {}
  virtual void row(const TraceRow& r) = 0;
  virtual void finish() {}
};

/// Append-only in-memory trace.
class Trace : public TraceSink {
 public:
  void begin(const TraceHeader& h) override { header_ = h; }
  void row(const TraceRow& r) override { rows_.push_back(r); }

  [[nodiscard]] const TraceHeader& header() const { return header_; }
  [[nodiscard]] const std::vector<TraceRow>& rows() const& { return rows_; }
  [[nodiscard]] std::vector<TraceRow> rows() && { return std::move(rows_); }

 private:
  TraceHeader header_;
  std::vector<TraceRow> rows_;
};

/// Fans rows out to several sinks.
class TeeSink : public TraceSink {
 public:
  explicit TeeSink(std::vector<TraceSink*> sinks) : sinks_(std::move(sinks)) {}
  void begin(const TraceHeader& h) override { for (auto* s : sinks_) s->begin(h); }
  void row(const TraceRow& r) override { for (auto* s : sinks_) s->row(r); }
  void finish() override { for (auto* s : sinks_) s->finish(); }

 private:
  std::vector<TraceSink*> sinks_;
};

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

class CsvTraceWriter : public TraceSink {
 public:
  explicit CsvTraceWriter(std::ostream& out) : out_(out) {}

  void begin(const TraceHeader&) override { out_ << kTraceColumns << '\n'; }
  void row(const TraceRow& r) override {
    out_ << format_numeral(r.time_s) << ',' << to_string(r.kind) << ',' << detail::csv_field(r.node_id) << ','
         << format_numeral(r.reading_cycles) << ',' << r.count << ',' << format_numeral(r.phase) << ','
         << detail::csv_field(r.channel) << ',' << detail::csv_field(r.payload) << ',';
    if (r.accepted) out_ << (*r.accepted ? "true" : "false");
    out_ << ',' << format_numeral(r.rate_correction) << ',';
    if (r.residual_s) out_ << format_numeral(*r.residual_s);
    out_ << '\n';
  }
  void finish() override { out_.flush(); }

 private:
  std::ostream& out_;
};

[[nodiscard]] inline nlohmann::ordered_json to_json(const TraceRow& r) {
  nlohmann::ordered_json j;
  j["time_s"] = r.time_s;
  j["event_kind"] = std::string(to_string(r.kind));
  j["node_id"] = r.node_id;
  j["reading_cycles"] = r.reading_cycles;
  j["count"] = r.count;
  j["phase"] = r.phase;
  j["channel"] = r.channel;
  j["payload"] = r.payload;
  j["accepted"] = r.accepted ? nlohmann::ordered_json(*r.accepted) : nlohmann::ordered_json(nullptr);
  j["rate_correction"] = r.rate_correction;
  j["residual_s"] = r.residual_s ? nlohmann::ordered_json(*r.residual_s) : nlohmann::ordered_json(nullptr);
  return j;
}

/// Streams a JSON array of row objects whose keys mirror the CSV columns.
class JsonTraceWriter : public TraceSink {
 public:
  explicit JsonTraceWriter(std::ostream& out) : out_(out) {}

  void begin(const TraceHeader&) override { out_ << "["; }
  void row(const TraceRow& r) override {
    out_ << (first_ ? "\n" : ",\n") << to_json(r).dump();
    first_ = false;
  }
  void finish() override {
    out_ << "\n]\n";
    out_.flush();
  }

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace liveclock
