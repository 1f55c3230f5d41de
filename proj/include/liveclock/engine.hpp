#pragma once

// Deterministic discrete-event loop over a scenario.
//
// Events are ordered by (time, kind rank, node, insertion sequence) with
// arrivals ranked before ticks by default, so a signal landing exactly on a
// tick is visible to that tick's steering. Each node's clock is integrated
// lazily up to the time of the next event that touches it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "liveclock/clock_core.hpp"
#include "liveclock/control.hpp"
#include "liveclock/errors.hpp"
#include "liveclock/network.hpp"
#include "liveclock/scenario.hpp"
#include "liveclock/spacetime.hpp"
#include "liveclock/trace.hpp"

namespace liveclock {

struct EngineOptions {
  /// Rewrites a payload in flight (fault injection for locality tests).
  std::function<std::string(const Signal&)> payload_filter;
};

/// Appends an oracle injection: the numeral reaches the node's record memory at
/// its first writing phase at or after at_t.
[[nodiscard]] inline Scenario inject_oracle(Scenario scenario, const NodeId& node, double at_t, std::string numeral) {
  if (scenario.node(node) == nullptr) throw Error(ErrorKind::invalid_argument, "unknown node " + node);
  if (!(at_t >= 0.0 && at_t <= scenario.end_time())) {
    throw Error(ErrorKind::invalid_argument, "oracle injection time lies outside the horizon");
  }
  scenario.oracles.push_back(OracleSpec{node, at_t, std::move(numeral)});
  return scenario;
}

// Payload group markers following the sender's count numeral.
inline constexpr double kAckGroup = 1.0;       // followed by: peer tx count, own rx reading
inline constexpr double kResidualGroup = 2.0;  // followed by: Einstein residual in cycles

class Engine {
 public:
  explicit Engine(Scenario scenario, EngineOptions options = {})
      : scenario_(std::move(scenario)), options_(std::move(options)) {
    if (auto errors = validate(scenario_); !errors.empty()) throw ScenarioError(std::move(errors));
    setup();
  }
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Runs to the horizon, streaming rows into sink. On failure the rows
  /// produced so far are flushed before the error propagates.
  void run(TraceSink& sink) {
    if (ran_) throw Error(ErrorKind::invalid_argument, "engine already ran");
    ran_ = true;
    sink.begin(header());
    sink_ = &sink;
    try {
      loop();
    } catch (...) {
      sink.finish();
      sink_ = nullptr;
      throw;
    }
    sink.finish();
    sink_ = nullptr;
  }

  [[nodiscard]] Trace run() {
    Trace trace;
    run(trace);
    return trace;
  }

  [[nodiscard]] const Scenario& scenario() const { return scenario_; }
  [[nodiscard]] const NetworkGraph& graph() const { return graph_; }
  [[nodiscard]] std::uint64_t events_processed() const { return events_processed_; }

  [[nodiscard]] const LiveClockNode& node(const NodeId& id) const { return nodes_.at(index_.at(id)).node; }

  [[nodiscard]] TraceHeader header() const {
    TraceHeader h;
    h.horizon = scenario_.horizon;
    h.nominal_rate = scenario_.nominal_rate;
    h.end_time = scenario_.end_time();
    h.lock_hold_fraction = scenario_.lock_hold_fraction;
    for (const auto& n : scenario_.nodes) h.nodes.push_back({n.id, n.eta});
    for (const auto& c : scenario_.channels) {
      const AimingPoint* phase = c.aim(AimKind::phase);
      h.channels.push_back({c.src, c.dst, phase ? phase->value : 0.0});
    }
    return h;
  }

 private:
  enum class EventKind { arrival, tick, oracle, end };

  struct Event {
    double time = 0.0;
    int rank = 0;
    std::size_t node = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::tick;
    std::size_t slot = 0;  // signal slot or oracle index

    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (rank != o.rank) return rank > o.rank;
      if (node != o.node) return node > o.node;
      return seq > o.seq;
    }
  };

  /// Einstein / echo exchange bookkeeping between this node and one peer.
  struct Exchange {
    std::optional<std::pair<double, double>> ack;  // peer's tx count, our rx reading (we respond)
    std::optional<double> residual;                // computed by us, owed to the peer
    double last_closed = -std::numeric_limits<double>::infinity();
    std::deque<std::int64_t> outstanding;          // our tx counts awaiting an echo
    double timeout = 0.0;
  };

  struct Runtime {
    LiveClockNode node;
    const NodeSpec* spec = nullptr;
    double last_t = 0.0;
    std::vector<double> deviations;
    std::vector<double> weights;
    std::deque<std::string> deferred_oracles;
    std::vector<const ChannelSpec*> outgoing;
    std::map<NodeId, Exchange> exchanges;
  };

  int rank_of(EventKind k) const {
    switch (k) {
      case EventKind::arrival: return scenario_.arrival_before_tick ? 0 : 1;
      case EventKind::tick: return scenario_.arrival_before_tick ? 1 : 0;
      case EventKind::oracle: return 2;
      case EventKind::end: return 3;
    }
    return 3;
  }

  void push(double time, EventKind kind, std::size_t node, std::size_t slot = 0) {
    queue_.push(Event{time, rank_of(kind), node, next_seq_++, kind, slot});
  }

  void setup() {
    std::vector<const NodeSpec*> specs;
    for (const auto& n : scenario_.nodes) specs.push_back(&n);
    std::sort(specs.begin(), specs.end(), [](const NodeSpec* a, const NodeSpec* b) { return a->id < b->id; });

    for (const NodeSpec* spec : specs) {
      Runtime rt;
      rt.spec = spec;
      rt.node.id = spec->id;
      rt.node.worldline = spec->worldline;
      DriftModel drift{spec->white_fm_sigma, spec->rw_fm_sigma, node_seed(scenario_, *spec)};
      rt.node.clock = make_clock(spec->initial_reading, scenario_.node_rate(*spec), spec->eta, drift,
                                 spec->correction_bound);
      rt.node.controller.kp = spec->control.kp;
      rt.node.controller.ki = spec->control.ki;
      rt.node.controller.command_bound = spec->control.command_bound;
      rt.node.controller.integral_bound = spec->control.integral_bound;
      rt.node.controller.output_bound = spec->correction_bound;
      rt.node.memory = RecordMemory(spec->memory);
      index_[spec->id] = nodes_.size();
      graph_.add_node(spec->id);
      nodes_.push_back(std::move(rt));
    }

    for (const auto& c : scenario_.channels) {
      Channel ch;
      ch.src = c.src;
      ch.dst = c.dst;
      ch.status_window = scenario_.status_window;
      if (const AimingPoint* phase = c.aim(AimKind::phase)) ch.aiming_phase = phase->value;
      graph_.add_channel(std::move(ch));
      nodes_[index_.at(c.src)].outgoing.push_back(&c);
    }
    for (auto& rt : nodes_) {
      std::sort(rt.outgoing.begin(), rt.outgoing.end(),
                [](const ChannelSpec* a, const ChannelSpec* b) { return a->dst < b->dst; });
    }

    // Exchanges are initiated on channels carrying einstein or echo aims.
    const double c_eff = scenario_.propagation.effective_speed();
    for (const auto& c : scenario_.channels) {
      if (!initiates_exchange(c)) continue;
      const Runtime& a = nodes_[index_.at(c.src)];
      const Runtime& b = nodes_[index_.at(c.dst)];
      const double distance = (position_at(a.node.worldline, 0.0) - position_at(b.node.worldline, 0.0)).norm();
      const double round_trip = 2.0 * distance / c_eff * scenario_.nominal_rate + static_cast<double>(b.spec->transmit.every);
      nodes_[index_.at(c.src)].exchanges[c.dst].timeout = scenario_.echo_timeout.value_or(4.0 * round_trip);
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const ClockState& clock = nodes_[i].node.clock;
      const bool on_tick = clock.reading == std::floor(clock.reading);
      push(on_tick ? 0.0 : time_to_next_tick(clock, kinematic_factor(nodes_[i], 0.0)), EventKind::tick, i);
    }
    for (std::size_t k = 0; k < scenario_.oracles.size(); ++k) {
      push(scenario_.oracles[k].at, EventKind::oracle, index_.at(scenario_.oracles[k].node), k);
    }
    push(scenario_.end_time(), EventKind::end, 0);
  }

  static bool initiates_exchange(const ChannelSpec& c) {
    return c.timing && (c.aim(AimKind::einstein) != nullptr || c.aim(AimKind::echo) != nullptr);
  }

  double kinematic_factor(const Runtime& rt, double t) const {
    return kinematic_rate_factor(rt.node.worldline, t, scenario_.propagation);
  }

  void advance_node(Runtime& rt, double t) {
    if (t > rt.last_t) {
      advance_by(rt.node.clock, t - rt.last_t, kinematic_factor(rt, rt.last_t));
      rt.last_t = t;
    }
  }

  void loop() {
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      ++events_processed_;
      switch (ev.kind) {
        case EventKind::end: finish(ev.time); return;
        case EventKind::tick: on_tick(ev); break;
        case EventKind::arrival: on_arrival(ev); break;
        case EventKind::oracle: on_oracle(ev); break;
      }
    }
  }

  TraceRow node_row(const Runtime& rt, double t, RowKind kind) const {
    const ClockReading r = split_reading(rt.node.clock.reading);
    TraceRow row;
    row.time_s = t;
    row.kind = kind;
    row.node_id = rt.node.id;
    row.reading_cycles = rt.node.clock.reading;
    row.count = r.count;
    row.phase = r.phase;
    row.rate_correction = rt.node.clock.rate_correction;
    return row;
  }

  void emit(TraceRow row) { sink_->row(row); }

  void on_tick(const Event& ev) {
    Runtime& rt = nodes_[ev.node];
    advance_node(rt, ev.time);
    ClockState& clock = rt.node.clock;
    // Absorb coordinate-time rounding so the tick lands exactly on its integer.
    const double gap = clock.next_boundary - clock.reading;
    if (gap > 0.0 && gap <= 1e-9 * std::max(1.0, std::fabs(clock.next_boundary))) complete_cycle(clock);

    if (rt.spec->control.enabled && !rt.deviations.empty()) {
      auto [ctrl, delta] = steer(rt.node.controller, rt.deviations, rt.weights);
      rt.node.controller = ctrl;
      command_rate_in_place(clock, delta);
    }
    rt.deviations.clear();
    rt.weights.clear();

    const ClockReading now = split_reading(clock.reading);
    for (auto& [peer, ex] : rt.exchanges) {
      while (!ex.outstanding.empty() && clock.reading - static_cast<double>(ex.outstanding.front()) > ex.timeout) {
        TraceRow row = node_row(rt, ev.time, RowKind::echo_timeout);
        row.channel = channel_label(rt.node.id, peer);
        row.payload = format_numeral(ex.outstanding.front());
        emit(row);
        ex.outstanding.pop_front();
      }
    }

    const TransmitSchedule& sched = rt.spec->transmit;
    const std::int64_t phase_slot = ((now.count - sched.offset) % sched.every + sched.every) % sched.every;
    if (sched.enabled && phase_slot == 0) {
      for (const ChannelSpec* spec : rt.outgoing) send(rt, *spec, ev.time);
    }

    while (!rt.deferred_oracles.empty()) {
      record_oracle(rt, ev.time, rt.deferred_oracles.front());
      rt.deferred_oracles.pop_front();
    }

    emit(node_row(rt, ev.time, RowKind::tick));
    push(ev.time + time_to_next_tick(clock, kinematic_factor(rt, ev.time)), EventKind::tick, ev.node);
  }

  std::string build_payload(Runtime& rt, const ChannelSpec& spec, std::int64_t count) {
    if (!spec.timing) return format_numeral(static_cast<std::int64_t>(rt.node.next_sequence));
    std::string payload = format_numeral(count);
    auto it = rt.exchanges.find(spec.dst);
    // Acknowledge the peer's latest exchange signal on the first character back.
    const ChannelSpec* reverse = scenario_.channel(spec.dst, spec.src);
    auto& inbound = inbound_[{spec.dst, spec.src}];
    if (reverse != nullptr && initiates_exchange(*reverse) && inbound.ack) {
      payload += " " + format_numeral(kAckGroup) + " " + format_numeral(inbound.ack->first) + " " +
                 format_numeral(inbound.ack->second);
      inbound.ack.reset();
    }
    if (it != rt.exchanges.end() && it->second.residual && spec.aim(AimKind::einstein) != nullptr) {
      payload += " " + format_numeral(kResidualGroup) + " " + format_numeral(*it->second.residual);
      it->second.residual.reset();
    }
    return payload;
  }

  void send(Runtime& rt, const ChannelSpec& spec, double t) {
    Channel* channel = graph_.channel_between(spec.src, spec.dst);
    const std::int64_t count = split_reading(rt.node.clock.reading).count;
    Signal sig = transmit(rt.node, *channel, build_payload(rt, spec, count), t);
    Runtime& dst = nodes_[index_.at(spec.dst)];
    sig.arrival_t = arrival_time(position_at(rt.node.worldline, t), t, dst.node.worldline, scenario_.propagation);
    if (initiates_exchange(spec)) rt.exchanges[spec.dst].outstanding.push_back(count);

    TraceRow row = node_row(rt, t, RowKind::transmit);
    row.channel = channel_label(spec.src, spec.dst);
    row.payload = sig.payload;
    emit(row);

    if (options_.payload_filter) sig.payload = options_.payload_filter(sig);
    const double arrival = sig.arrival_t;
    std::size_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
      in_flight_[slot] = std::move(sig);
    } else {
      slot = in_flight_.size();
      in_flight_.push_back(std::move(sig));
    }
    push(arrival, EventKind::arrival, index_.at(spec.dst), slot);
  }

  void add_deviation(Runtime& rt, double deviation, const AimingPoint& aim) {
    if (aim.weight <= 0.0) return;
    rt.deviations.push_back(std::fabs(deviation) <= aim.tolerance ? 0.0 : deviation);
    rt.weights.push_back(aim.weight);
  }

  void on_arrival(const Event& ev) {
    Runtime& rt = nodes_[ev.node];
    advance_node(rt, ev.time);
    const Signal sig = std::move(in_flight_[ev.slot]);
    free_slots_.push_back(ev.slot);

    const Reception rec = receive(rt.node, graph_, sig);
    const ChannelSpec& spec = *scenario_.channel(sig.source, sig.destination);

    TraceRow row = node_row(rt, ev.time, RowKind::arrival);
    row.channel = channel_label(sig.source, sig.destination);
    row.payload = sig.payload;
    row.accepted = rec.accepted;
    emit(row);

    // Arrival timing is measured even when the character itself is lost.
    if (const AimingPoint* phase = spec.aim(AimKind::phase)) add_deviation(rt, phase_deviation(rec.rx_reading, phase->value), *phase);
    if (!rec.accepted || !spec.timing) return;

    std::vector<double> nums;
    try {
      nums = parse_numerals(sig.payload);
    } catch (const Error&) {
      return;  // unreadable payload carries no timing information
    }
    if (nums.empty()) return;
    const double peer_count = nums[0];
    const double rx = rec.rx_reading.value();

    if (initiates_exchange(spec)) inbound_[{sig.source, sig.destination}].ack = std::make_pair(peer_count, rx);

    for (std::size_t i = 1; i < nums.size();) {
      if (nums[i] == kAckGroup && i + 2 < nums.size()) {
        close_exchange(rt, sig.source, nums[i + 1], nums[i + 2], peer_count, rx, ev.time);
        i += 3;
      } else if (nums[i] == kResidualGroup && i + 1 < nums.size()) {
        if (const AimingPoint* einstein = spec.aim(AimKind::einstein)) add_deviation(rt, nums[i + 1], *einstein);
        i += 2;
      } else {
        break;
      }
    }
  }

  /// Our exchange toward `peer` closes: we sent at t_a, the peer read t_b on
  /// reception and answered at its count peer_tx; we read t_a_prime now.
  void close_exchange(Runtime& rt, const NodeId& peer, double t_a, double t_b, double peer_tx, double t_a_prime,
                      double t) {
    auto it = rt.exchanges.find(peer);
    if (it == rt.exchanges.end()) return;
    Exchange& ex = it->second;
    if (!(t_a > ex.last_closed) || !(t_a < t_a_prime)) return;
    ex.last_closed = t_a;
    while (!ex.outstanding.empty() && static_cast<double>(ex.outstanding.front()) <= t_a) ex.outstanding.pop_front();

    const ChannelSpec& forward = *scenario_.channel(rt.node.id, peer);
    const double echo = t_a_prime - t_a;
    TraceRow row = node_row(rt, t, RowKind::echo);
    row.channel = channel_label(rt.node.id, peer);
    row.payload = format_numeral(echo);
    emit(row);
    if (const AimingPoint* aim = forward.aim(AimKind::echo)) add_deviation(rt, echo - aim->value, *aim);

    if (forward.aim(AimKind::einstein) != nullptr) {
      // Remove the peer's holding time before replying, measured on its own clock.
      const double hold = peer_tx - t_b;
      const double residual = einstein_residual(t_a, t_b, t_a_prime - hold);
      ex.residual = residual;
      TraceRow res = node_row(rt, t, RowKind::residual);
      res.channel = channel_label(rt.node.id, peer);
      res.residual_s = residual / scenario_.nominal_rate;
      emit(res);
    }
  }

  void record_oracle(Runtime& rt, double t, const std::string& numeral) {
    rt.node.memory.push(Record{"oracle", numeral, std::nullopt, split_reading(rt.node.clock.reading)});
    TraceRow row = node_row(rt, t, RowKind::oracle);
    row.payload = numeral;
    emit(row);
  }

  void on_oracle(const Event& ev) {
    Runtime& rt = nodes_[ev.node];
    advance_node(rt, ev.time);
    const std::string& numeral = scenario_.oracles[ev.slot].numeral;
    if (rt.deferred_oracles.empty() && in_writing_phase(split_reading(rt.node.clock.reading), rt.node.clock.eta)) {
      record_oracle(rt, ev.time, numeral);
    } else {
      rt.deferred_oracles.push_back(numeral);  // delivered at the next tick, the centre of a writing window
    }
  }

  void finish(double t) {
    for (auto& rt : nodes_) {
      advance_node(rt, t);
      emit(node_row(rt, t, RowKind::end));
    }
  }

  Scenario scenario_;
  EngineOptions options_;
  NetworkGraph graph_;
  std::vector<Runtime> nodes_;
  std::map<NodeId, std::size_t> index_;
  // Responder-side ack state keyed by the initiating channel (src, dst).
  std::map<std::pair<NodeId, NodeId>, Exchange> inbound_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::vector<Signal> in_flight_;
  std::vector<std::size_t> free_slots_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t events_processed_ = 0;
  TraceSink* sink_ = nullptr;
  bool ran_ = false;
};

/// Builds an engine for the scenario and runs it to the horizon.
[[nodiscard]] inline Trace run(const Scenario& scenario, EngineOptions options = {}) {
  Engine engine(scenario, std::move(options));
  return engine.run();
}

}  // namespace liveclock
