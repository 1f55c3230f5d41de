#pragma once

// Post-run and static analyses: lock metrics, Einstein residual statistics,
// echo-count series, Sagnac loop asymmetry, and lattice feasibility of
// zero-phase channel patterns.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "liveclock/control.hpp"
#include "liveclock/errors.hpp"
#include "liveclock/scenario.hpp"
#include "liveclock/trace.hpp"

namespace liveclock {

// Lattice feasibility ---------------------------------------------------------

using LatticePoint = std::array<std::int64_t, 3>;

struct FeasibilityInput {
  std::vector<LatticePoint> vertices;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// feasible: every required length is an integer multiple of
/// period_multiplier * sqrt(squarefree_class), the common tick period.
/// infeasible: witness holds two edge indices with incommensurable lengths.
struct FeasibilityResult {
  bool feasible = true;
  std::int64_t squarefree_class = 1;
  std::int64_t period_multiplier = 1;
  std::optional<std::pair<std::size_t, std::size_t>> witness;
};

[[nodiscard]] inline std::int64_t isqrt(std::int64_t n) {
  if (n < 0) throw Error(ErrorKind::invalid_argument, "isqrt of a negative number");
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  // Division keeps the comparisons free of overflow near 2^63.
  while (r > 0 && r > n / r) --r;
  while (r + 1 <= n / (r + 1)) ++r;
  return r;
}

[[nodiscard]] inline bool is_perfect_square(std::int64_t n) {
  if (n < 0) return false;
  const std::int64_t r = isqrt(n);
  return r * r == n;
}

/// n = squarefree * multiplier^2 with squarefree having no repeated prime factor.
[[nodiscard]] inline std::pair<std::int64_t, std::int64_t> squarefree_decomposition(std::int64_t n) {
  if (n <= 0) throw Error(ErrorKind::invalid_argument, "squarefree decomposition needs n > 0");
  std::int64_t squarefree = 1;
  std::int64_t multiplier = 1;
  for (std::int64_t p = 2; p * p <= n; ++p) {
    int exponent = 0;
    while (n % p == 0) {
      n /= p;
      ++exponent;
    }
    for (int k = 0; k < exponent / 2; ++k) multiplier *= p;
    if (exponent % 2 == 1) squarefree *= p;
  }
  squarefree *= n;
  return {squarefree, multiplier};
}

[[nodiscard]] inline std::int64_t squared_length(const LatticePoint& a, const LatticePoint& b) {
  std::int64_t s = 0;
  for (int i = 0; i < 3; ++i) {
    const std::int64_t d = a[i] - b[i];
    if (std::llabs(d) > 1'000'000'000) throw Error(ErrorKind::invalid_argument, "lattice coordinates too large");
    s += d * d;
  }
  return s;
}

/// Zero-phase signalling along all required edges needs every edge delay to be
/// a whole number of a common tick, i.e. all edge lengths commensurable. Two
/// lengths sqrt(s1), sqrt(s2) are commensurable iff s1 and s2 share their
/// squarefree part, which integer factoring decides exactly.
[[nodiscard]] inline FeasibilityResult stripes_feasible(const FeasibilityInput& input) {
  std::set<LatticePoint> distinct(input.vertices.begin(), input.vertices.end());
  if (distinct.size() != input.vertices.size()) throw Error(ErrorKind::invalid_argument, "vertices must be distinct");
  for (const auto& [a, b] : input.edges) {
    if (a >= input.vertices.size() || b >= input.vertices.size()) {
      throw Error(ErrorKind::invalid_argument, "edge references a missing vertex");
    }
    if (a == b) throw Error(ErrorKind::invalid_argument, "edge joins a vertex to itself");
  }

  FeasibilityResult result;
  if (input.edges.empty()) return result;
  std::int64_t multiplier_gcd = 0;
  std::int64_t first_class = 0;
  for (std::size_t i = 0; i < input.edges.size(); ++i) {
    const auto& [a, b] = input.edges[i];
    const auto [cls, mult] = squarefree_decomposition(squared_length(input.vertices[a], input.vertices[b]));
    if (i == 0) {
      first_class = cls;
    } else if (cls != first_class) {
      result.feasible = false;
      result.witness = std::make_pair(std::size_t{0}, i);
      return result;
    }
    multiplier_gcd = std::gcd(multiplier_gcd, mult);
  }
  result.squarefree_class = first_class;
  result.period_multiplier = multiplier_gcd;
  return result;
}

/// Box edges plus all face diagonals of an a x b x c brick anchored at the origin.
/// Edges come first (12), then face diagonals (12).
[[nodiscard]] inline FeasibilityInput brick_with_face_diagonals(std::int64_t a, std::int64_t b, std::int64_t c) {
  FeasibilityInput in;
  for (std::int64_t x : {std::int64_t{0}, a}) {
    for (std::int64_t y : {std::int64_t{0}, b}) {
      for (std::int64_t z : {std::int64_t{0}, c}) in.vertices.push_back({x, y, z});
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> diagonals;
  for (std::size_t i = 0; i < in.vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < in.vertices.size(); ++j) {
      int differing = 0;
      for (int k = 0; k < 3; ++k) differing += in.vertices[i][k] != in.vertices[j][k];
      if (differing == 1) in.edges.emplace_back(i, j);
      if (differing == 2) diagonals.emplace_back(i, j);
    }
  }
  in.edges.insert(in.edges.end(), diagonals.begin(), diagonals.end());
  return in;
}

/// Smallest Euler brick a <= b <= c <= limit, ordered by (c, b, a).
[[nodiscard]] inline std::optional<std::array<std::int64_t, 3>> find_euler_brick(std::int64_t limit) {
  for (std::int64_t c = 1; c <= limit; ++c) {
    for (std::int64_t b = 1; b <= c; ++b) {
      if (!is_perfect_square(b * b + c * c)) continue;
      for (std::int64_t a = 1; a <= b; ++a) {
        if (is_perfect_square(a * a + b * b) && is_perfect_square(a * a + c * c)) {
          return std::array<std::int64_t, 3>{a, b, c};
        }
      }
    }
  }
  return std::nullopt;
}

/// Geometry file: either {"vertices": [[x,y,z],...], "edges": [[i,j],...]}
/// or {"brick": [a,b,c]} for a box with all edges and face diagonals.
[[nodiscard]] inline FeasibilityInput parse_geometry_text(const std::string& text) {
  FeasibilityInput in;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::config, "geometry must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key != "vertices" && key != "edges" && key != "brick") throw Error(ErrorKind::config, "unknown geometry key " + key);
    }
    if (j.contains("brick")) {
      if (j.contains("vertices") || j.contains("edges")) {
        throw Error(ErrorKind::config, "geometry gives both brick and vertices/edges");
      }
      const auto b = j.at("brick").get<std::array<std::int64_t, 3>>();
      if (b[0] <= 0 || b[1] <= 0 || b[2] <= 0) throw Error(ErrorKind::config, "brick edges must be positive");
      return brick_with_face_diagonals(b[0], b[1], b[2]);
    }
    in.vertices = j.at("vertices").get<std::vector<LatticePoint>>();
    in.edges = j.at("edges").get<std::vector<std::pair<std::size_t, std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, std::string("geometry: ") + e.what());
  }
  return in;
}

// Trace analyses ----------------------------------------------------------------

struct SagnacResult {
  double measured_s = 0.0;
  double predicted_s = 0.0;

  [[nodiscard]] double ratio() const { return measured_s / predicted_s; }
};

[[nodiscard]] inline double sagnac_prediction(double angular_rate, double radius, double c) {
  return 4.0 * std::numbers::pi * radius * radius * angular_rate / (c * c);
}

namespace detail {

inline std::map<std::string, std::vector<double>> residuals_by_channel(const Trace& trace, double from_time) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& row : trace.rows()) {
    if (row.kind == RowKind::residual && row.residual_s && row.time_s >= from_time) {
      out[row.channel].push_back(*row.residual_s);
    }
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Loop asymmetry of one-way Einstein residuals around a rotating ring:
/// the summed mean residuals of exchanges initiated along the loop order
/// minus those initiated against it. Residual rows before warmup_s are skipped.
[[nodiscard]] inline SagnacResult sagnac_asymmetry(const Trace& trace, std::span<const NodeId> loop, double angular_rate,
                                                   double radius, double c, double warmup_s = 0.0) {
  if (loop.size() < 2) throw Error(ErrorKind::incomplete_loop, "loop needs at least two nodes");
  const auto residuals = detail::residuals_by_channel(trace, warmup_s);
  auto mean_for = [&](const NodeId& a, const NodeId& b) {
    auto it = residuals.find(channel_label(a, b));
    if (it == residuals.end() || it->second.empty()) {
      throw Error(ErrorKind::incomplete_loop, "no Einstein exchanges recorded on " + channel_label(a, b));
    }
    return detail::mean(it->second);
  };
  double co = 0.0;
  double counter = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const NodeId& a = loop[i];
    const NodeId& b = loop[(i + 1) % loop.size()];
    co += mean_for(a, b);
    counter += mean_for(b, a);
  }
  return SagnacResult{co - counter, sagnac_prediction(angular_rate, radius, c)};
}

/// Echo counts recorded for exchanges initiated on `channel` ("A->B"): (time_s, cycles).
[[nodiscard]] inline std::vector<std::pair<double, double>> echo_series(const Trace& trace, const std::string& channel) {
  std::vector<std::pair<double, double>> out;
  for (const auto& row : trace.rows()) {
    if (row.kind == RowKind::echo && row.channel == channel) out.emplace_back(row.time_s, parse_numerals(row.payload).at(0));
  }
  return out;
}

struct ChannelReport {
  NodeId src;
  NodeId dst;
  std::uint64_t transmitted = 0;
  std::uint64_t accepted = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
  double drop_rate = 0.0;
  std::optional<std::int64_t> lock_time;  // receiver cycle after which every reception was accepted
  bool locked = false;
  std::optional<double> post_lock_max_deviation;  // max |phase - phi_0| after lock
};

struct PairReport {
  NodeId initiator;
  NodeId responder;
  std::size_t exchanges = 0;
  double mean_residual_s = 0.0;
  double mean_abs_residual_s = 0.0;
  double max_abs_residual_s = 0.0;
};

struct SyncReport {
  std::vector<ChannelReport> channels;
  std::vector<PairReport> pairs;
  std::optional<SagnacResult> sagnac;
};

struct SagnacOptions {
  std::vector<NodeId> loop;
  double angular_rate = 0.0;
  double radius = 0.0;
  double c = 0.0;
  double warmup_s = 0.0;
};

struct ReportOptions {
  std::optional<SagnacOptions> sagnac;
  double residual_warmup_s = 0.0;  // pair statistics skip residuals before this time
};

/// Lock time is the receiver's cycle count at the first accepted reception
/// after the last drop (0 when nothing was ever dropped). A channel counts as
/// locked when that lock leaves at least lock_hold_fraction of the horizon.
[[nodiscard]] inline SyncReport sync_report(const Trace& trace, const ReportOptions& options = {}) {
  const TraceHeader& h = trace.header();
  struct Arrival {
    std::int64_t count;
    double phase;
    bool accepted;
  };
  std::map<std::string, std::vector<Arrival>> arrivals;
  std::map<std::string, std::uint64_t> transmitted;
  for (const auto& row : trace.rows()) {
    if (row.kind == RowKind::arrival) arrivals[row.channel].push_back({row.count, row.phase, row.accepted.value_or(false)});
    if (row.kind == RowKind::transmit) ++transmitted[row.channel];
  }

  SyncReport report;
  for (const auto& info : h.channels) {
    const std::string label = channel_label(info.src, info.dst);
    ChannelReport cr;
    cr.src = info.src;
    cr.dst = info.dst;
    cr.transmitted = transmitted[label];
    const auto& list = arrivals[label];
    std::optional<std::size_t> last_drop;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].accepted) ++cr.accepted;
      else {
        ++cr.dropped;
        last_drop = i;
      }
    }
    cr.in_flight = cr.transmitted - cr.accepted - cr.dropped;
    const std::uint64_t received = cr.accepted + cr.dropped;
    cr.drop_rate = received ? static_cast<double>(cr.dropped) / static_cast<double>(received) : 0.0;

    std::optional<std::size_t> lock_index;
    if (!list.empty()) {
      if (!last_drop) {
        cr.lock_time = 0;
        lock_index = 0;
      } else if (*last_drop + 1 < list.size()) {
        lock_index = *last_drop + 1;
        cr.lock_time = list[*lock_index].count;
      }
    }
    if (lock_index) {
      double worst = 0.0;
      for (std::size_t i = *lock_index; i < list.size(); ++i) {
        worst = std::max(worst, std::fabs(phase_deviation(ClockReading{0, list[i].phase}, info.aiming_phase)));
      }
      cr.post_lock_max_deviation = worst;
      cr.locked = static_cast<double>(*cr.lock_time) <= h.horizon * (1.0 - h.lock_hold_fraction);
    }
    report.channels.push_back(cr);
  }

  for (const auto& [label, values] : detail::residuals_by_channel(trace, options.residual_warmup_s)) {
    PairReport pr;
    const auto arrow = label.find("->");
    pr.initiator = label.substr(0, arrow);
    pr.responder = label.substr(arrow + 2);
    pr.exchanges = values.size();
    double abs_sum = 0.0;
    for (double v : values) {
      abs_sum += std::fabs(v);
      pr.max_abs_residual_s = std::max(pr.max_abs_residual_s, std::fabs(v));
    }
    pr.mean_residual_s = detail::mean(values);
    pr.mean_abs_residual_s = values.empty() ? 0.0 : abs_sum / static_cast<double>(values.size());
    report.pairs.push_back(pr);
  }

  if (options.sagnac) {
    const SagnacOptions& s = *options.sagnac;
    report.sagnac = sagnac_asymmetry(trace, s.loop, s.angular_rate, s.radius, s.c, s.warmup_s);
  }
  return report;
}

/// Report options implied by a scenario (Sagnac loop when one is declared).
[[nodiscard]] inline ReportOptions report_options(const Scenario& s) {
  ReportOptions out;
  if (s.sagnac) {
    const double warmup = s.sagnac->warmup_cycles / s.nominal_rate;
    out.sagnac = SagnacOptions{s.sagnac->loop, s.sagnac->angular_rate, s.sagnac->radius, s.propagation.c, warmup};
    out.residual_warmup_s = warmup;
  }
  return out;
}

// Report output -------------------------------------------------------------------

inline constexpr std::string_view kReportColumns =
    "record,channel,transmitted,accepted,dropped,in_flight,drop_rate,lock_time,locked,post_lock_max_deviation,"
    "exchanges,mean_residual_s,mean_abs_residual_s,max_abs_residual_s,measured_s,predicted_s";

inline void write_report_csv(std::ostream& out, const SyncReport& r) {
  out << kReportColumns << '\n';
  for (const auto& c : r.channels) {
    out << "channel," << channel_label(c.src, c.dst) << ',' << c.transmitted << ',' << c.accepted << ',' << c.dropped
        << ',' << c.in_flight << ',' << format_numeral(c.drop_rate) << ',';
    if (c.lock_time) out << *c.lock_time;
    out << ',' << (c.locked ? "true" : "false") << ',';
    if (c.post_lock_max_deviation) out << format_numeral(*c.post_lock_max_deviation);
    out << ",,,,,,\n";
  }
  for (const auto& p : r.pairs) {
    out << "pair," << channel_label(p.initiator, p.responder) << ",,,,,,,,," << p.exchanges << ','
        << format_numeral(p.mean_residual_s) << ',' << format_numeral(p.mean_abs_residual_s) << ','
        << format_numeral(p.max_abs_residual_s) << ",,\n";
  }
  if (r.sagnac) {
    out << "sagnac,,,,,,,,,,,,,," << format_numeral(r.sagnac->measured_s) << ','
        << format_numeral(r.sagnac->predicted_s) << '\n';
  }
}

[[nodiscard]] inline nlohmann::ordered_json to_json(const SyncReport& r) {
  using oj = nlohmann::ordered_json;
  oj channels = oj::array();
  for (const auto& c : r.channels) {
    channels.push_back({{"channel", channel_label(c.src, c.dst)},
                        {"transmitted", c.transmitted},
                        {"accepted", c.accepted},
                        {"dropped", c.dropped},
                        {"in_flight", c.in_flight},
                        {"drop_rate", c.drop_rate},
                        {"lock_time", c.lock_time ? oj(*c.lock_time) : oj(nullptr)},
                        {"locked", c.locked},
                        {"post_lock_max_deviation",
                         c.post_lock_max_deviation ? oj(*c.post_lock_max_deviation) : oj(nullptr)}});
  }
  oj pairs = oj::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"channel", channel_label(p.initiator, p.responder)},
                     {"exchanges", p.exchanges},
                     {"mean_residual_s", p.mean_residual_s},
                     {"mean_abs_residual_s", p.mean_abs_residual_s},
                     {"max_abs_residual_s", p.max_abs_residual_s}});
  }
  oj out = {{"channels", channels}, {"pairs", pairs}};
  out["sagnac"] = r.sagnac ? oj{{"measured_s", r.sagnac->measured_s}, {"predicted_s", r.sagnac->predicted_s}}
                           : oj(nullptr);
  return out;
}

}  // namespace liveclock
