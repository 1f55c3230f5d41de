#pragma once

// Scenario files: JSON with an explicit schema_version. Parsing collects every
// syntax or semantic problem before reporting.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "liveclock/clock_core.hpp"
#include "liveclock/control.hpp"
#include "liveclock/errors.hpp"
#include "liveclock/network.hpp"
#include "liveclock/spacetime.hpp"

namespace liveclock {

inline constexpr int kSchemaVersion = 1;

struct TransmitSchedule {
  std::int64_t every = 1;   // transmit when (count - offset) is a multiple of every
  std::int64_t offset = 0;
  bool enabled = true;

  friend bool operator==(const TransmitSchedule&, const TransmitSchedule&) = default;
};

struct ControlConfig {
  bool enabled = true;
  double kp = 0.2;
  double ki = 0.02;
  double command_bound = 5e-2;
  double integral_bound = 1e3;

  friend bool operator==(const ControlConfig&, const ControlConfig&) = default;
};

struct NodeSpec {
  NodeId id;
  Worldline worldline = StaticWorldline{};
  double eta = 0.5;
  double initial_reading = 0.0;
  std::optional<double> rate;  // cycles/s; defaults to the scenario's nominal rate
  double white_fm_sigma = 0.0;
  double rw_fm_sigma = 0.0;
  std::optional<std::uint64_t> seed;  // overrides the derived per-node seed
  double correction_bound = kDefaultCorrectionBound;
  ControlConfig control;
  TransmitSchedule transmit;
  std::size_t memory = kDefaultMemoryCapacity;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct ChannelSpec {
  NodeId src;
  NodeId dst;
  std::vector<AimingPoint> aims{AimingPoint{}};
  bool timing = true;  // payload numerals carry clock readings

  [[nodiscard]] const AimingPoint* aim(AimKind kind) const {
    for (const auto& a : aims) {
      if (a.kind == kind) return &a;
    }
    return nullptr;
  }

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

struct OracleSpec {
  NodeId node;
  double at = 0.0;  // coordinate seconds
  std::string numeral;

  friend bool operator==(const OracleSpec&, const OracleSpec&) = default;
};

struct SagnacSpec {
  std::vector<NodeId> loop;  // ordered in the sense of rotation
  double angular_rate = 0.0;
  double radius = 0.0;
  double warmup_cycles = 0.0;

  friend bool operator==(const SagnacSpec&, const SagnacSpec&) = default;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  double horizon = 0.0;        // nominal cycles
  double nominal_rate = 1.0;   // cycles per coordinate second
  std::uint64_t seed = 0;
  PropagationModel propagation;
  std::string metric = "flat";
  int status_window = kDefaultStatusWindow;
  std::optional<double> echo_timeout;  // cycles; default 4x nominal round trip
  bool arrival_before_tick = true;
  double lock_hold_fraction = 0.5;
  std::vector<NodeSpec> nodes;
  std::vector<ChannelSpec> channels;
  std::vector<OracleSpec> oracles;
  std::optional<SagnacSpec> sagnac;

  [[nodiscard]] double end_time() const { return horizon / nominal_rate; }
  [[nodiscard]] double node_rate(const NodeSpec& n) const { return n.rate.value_or(nominal_rate); }

  [[nodiscard]] const NodeSpec* node(const NodeId& id) const {
    for (const auto& n : nodes) {
      if (n.id == id) return &n;
    }
    return nullptr;
  }
  [[nodiscard]] const ChannelSpec* channel(const NodeId& src, const NodeId& dst) const {
    for (const auto& c : channels) {
      if (c.src == src && c.dst == dst) return &c;
    }
    return nullptr;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Raised when a scenario fails to parse or validate; carries every problem found.
class ScenarioError : public Error {
 public:
  explicit ScenarioError(std::vector<std::string> errors)
      : Error(ErrorKind::config, join(errors)), errors_(std::move(errors)) {}

  [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e;
    }
    return out;
  }
  std::vector<std::string> errors_;
};

// Seeds ---------------------------------------------------------------------

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-node noise seed derived from the master seed and the node id alone, so
/// adding or removing nodes leaves every other node's stream untouched.
[[nodiscard]] inline std::uint64_t derive_node_seed(std::uint64_t master, std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

[[nodiscard]] inline std::uint64_t node_seed(const Scenario& s, const NodeSpec& n) {
  return n.seed ? *n.seed : derive_node_seed(s.seed, n.id);
}

namespace detail {

using json = nlohmann::json;

/// Typed field access on one JSON object that records problems instead of throwing.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  [[nodiscard]] bool ok() const { return obj_.is_object(); }
  [[nodiscard]] bool has(const std::string& key) {
    seen_.insert(key);
    return ok() && obj_.contains(key);
  }
  [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }
  [[nodiscard]] const json& raw(const std::string& key) { seen_.insert(key); return obj_.at(key); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_number()) out = v.get<double>();
    else errors_.push_back(at(key) + ": expected a number");
  }
  void number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_number_integer() && (std::is_signed_v<Int> || v.get<std::int64_t>() >= 0 || v.is_number_unsigned())) {
      out = v.get<Int>();
    } else {
      errors_.push_back(at(key) + ": expected an integer");
    }
  }
  void integer(const std::string& key, std::optional<std::uint64_t>& out) {
    if (!has(key)) return;
    std::uint64_t v = 0;
    integer(key, v);
    out = v;
  }
  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_boolean()) out = v.get<bool>();
    else errors_.push_back(at(key) + ": expected true or false");
  }
  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_string()) out = v.get<std::string>();
    else errors_.push_back(at(key) + ": expected a string");
  }
  void vec3(const std::string& key, Vec3& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_array() && v.size() == 3 && v[0].is_number() && v[1].is_number() && v[2].is_number()) {
      out = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    } else {
      errors_.push_back(at(key) + ": expected an array of three numbers");
    }
  }

  /// Reports keys that no accessor asked for.
  void reject_unknown() {
    if (!ok()) return;
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.contains(key)) errors_.push_back(at(key) + ": unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline Worldline read_worldline(const json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader r(j, path, errors);
  std::string kind = "static";
  r.string("kind", kind);
  Worldline out = StaticWorldline{};
  if (kind == "static") {
    StaticWorldline w;
    r.vec3("position", w.position);
    out = w;
  } else if (kind == "uniform_velocity") {
    UniformVelocityWorldline w;
    r.vec3("position", w.initial_position);
    r.vec3("velocity", w.velocity);
    out = w;
  } else if (kind == "circular") {
    CircularWorldline w;
    r.vec3("center", w.center);
    r.number("radius", w.radius);
    r.number("angular_rate", w.angular_rate);
    r.number("initial_angle", w.initial_angle);
    if (!(w.radius >= 0.0)) errors.push_back(r.at("radius") + " = " + format_numeral(w.radius) + " must be >= 0");
    out = w;
  } else {
    errors.push_back(r.at("kind") + ": unknown worldline kind '" + kind +
                     "' (expected static, uniform_velocity or circular)");
  }
  r.reject_unknown();
  return out;
}

inline AimingPoint read_aim(const json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader r(j, path, errors);
  AimingPoint a;
  std::string kind = "phase";
  r.string("kind", kind);
  if (kind == "phase") a.kind = AimKind::phase;
  else if (kind == "echo") a.kind = AimKind::echo;
  else if (kind == "einstein") a.kind = AimKind::einstein;
  else errors.push_back(r.at("kind") + ": unknown aiming point kind '" + kind + "' (expected phase, echo or einstein)");
  r.number("value", a.value);
  r.number("weight", a.weight);
  r.number("tolerance", a.tolerance);
  r.reject_unknown();
  return a;
}

inline NodeSpec read_node(const json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader r(j, path, errors);
  NodeSpec n;
  r.string("id", n.id);
  if (r.has("worldline")) n.worldline = read_worldline(r.raw("worldline"), r.at("worldline"), errors);
  r.number("eta", n.eta);
  r.number("initial_reading", n.initial_reading);
  r.number("rate", n.rate);
  r.integer("seed", n.seed);
  r.number("correction_bound", n.correction_bound);
  r.integer("memory", n.memory);
  if (r.has("drift")) {
    FieldReader d(r.raw("drift"), r.at("drift"), errors);
    d.number("white_fm_sigma", n.white_fm_sigma);
    d.number("rw_fm_sigma", n.rw_fm_sigma);
    d.reject_unknown();
  }
  if (r.has("control")) {
    FieldReader c(r.raw("control"), r.at("control"), errors);
    c.boolean("enabled", n.control.enabled);
    c.number("kp", n.control.kp);
    c.number("ki", n.control.ki);
    c.number("command_bound", n.control.command_bound);
    c.number("integral_bound", n.control.integral_bound);
    c.reject_unknown();
  }
  if (r.has("transmit")) {
    FieldReader t(r.raw("transmit"), r.at("transmit"), errors);
    t.boolean("enabled", n.transmit.enabled);
    t.integer("every", n.transmit.every);
    t.integer("offset", n.transmit.offset);
    t.reject_unknown();
  }
  r.reject_unknown();
  return n;
}

inline ChannelSpec read_channel(const json& j, const std::string& path, std::vector<std::string>& errors) {
  FieldReader r(j, path, errors);
  ChannelSpec c;
  r.string("src", c.src);
  r.string("dst", c.dst);
  r.boolean("timing", c.timing);
  if (r.has("aim")) {
    const json& aims = r.raw("aim");
    if (!aims.is_array()) {
      errors.push_back(r.at("aim") + ": expected an array of aiming points");
    } else {
      c.aims.clear();
      for (std::size_t i = 0; i < aims.size(); ++i) {
        c.aims.push_back(read_aim(aims[i], r.at("aim") + "[" + std::to_string(i) + "]", errors));
      }
    }
  }
  r.reject_unknown();
  return c;
}

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline std::string channel_name(const NodeId& a, const NodeId& b) { return a + "->" + b; }

}  // namespace detail

/// Semantic checks; returns every violation found.
[[nodiscard]] inline std::vector<std::string> validate(const Scenario& s) {
  std::vector<std::string> errors;
  auto bad = [&errors](const std::string& what) { errors.push_back(what); };
  if (s.schema_version != kSchemaVersion) {
    bad("schema_version = " + std::to_string(s.schema_version) + " is not supported (expected " +
        std::to_string(kSchemaVersion) + ")");
  }
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon)) bad("horizon = " + format_numeral(s.horizon) + " must be > 0");
  if (!(s.nominal_rate > 0.0) || !std::isfinite(s.nominal_rate)) bad("nominal_rate must be > 0");
  if (!(s.propagation.c > 0.0) || !std::isfinite(s.propagation.c)) bad("propagation.c must be > 0");
  if (s.propagation.conformal_factor && !(*s.propagation.conformal_factor > 0.0)) {
    bad("propagation.conformal_factor must be > 0");
  }
  if (s.metric != "flat" && s.metric != "conformally_flat") {
    bad("propagation.metric = '" + s.metric +
        "': curved metrics are not supported; only flat and conformally_flat propagation is implemented");
  }
  if (s.status_window < 1) bad("status_window must be >= 1");
  if (s.echo_timeout && !(*s.echo_timeout > 0.0)) bad("echo_timeout must be > 0");
  if (!(s.lock_hold_fraction >= 0.0 && s.lock_hold_fraction <= 1.0)) bad("lock_hold_fraction must lie in [0, 1]");

  const double c_eff = s.propagation.c / s.propagation.conformal_factor.value_or(1.0);
  std::set<NodeId> ids;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const NodeSpec& n = s.nodes[i];
    const std::string p = "nodes[" + std::to_string(i) + "]";
    if (n.id.empty()) bad(p + ".id must be a non-empty string");
    else if (!ids.insert(n.id).second) bad(p + ".id '" + n.id + "' is duplicated");
    if (!(n.eta > 0.0 && n.eta < 1.0)) bad(p + ".eta = " + format_numeral(n.eta) + " must lie strictly inside (0, 1)");
    if (n.rate && !(*n.rate > 0.0)) bad(p + ".rate must be > 0");
    if (!std::isfinite(n.initial_reading)) bad(p + ".initial_reading must be finite");
    if (!(n.white_fm_sigma >= 0.0)) bad(p + ".drift.white_fm_sigma must be >= 0");
    if (!(n.rw_fm_sigma >= 0.0)) bad(p + ".drift.rw_fm_sigma must be >= 0");
    if (!(n.correction_bound >= 0.0 && n.correction_bound < 1.0)) bad(p + ".correction_bound must lie in [0, 1)");
    if (!(n.control.kp >= 0.0) || !(n.control.ki >= 0.0)) bad(p + ".control gains must be >= 0");
    if (!(n.control.command_bound > 0.0)) bad(p + ".control.command_bound must be > 0");
    if (!(n.control.integral_bound > 0.0)) bad(p + ".control.integral_bound must be > 0");
    if (n.transmit.every < 1) bad(p + ".transmit.every must be >= 1");
    if (n.memory < 1) bad(p + ".memory must be >= 1");
    if (c_eff > 0.0 && max_speed(n.worldline) >= c_eff) bad(p + ".worldline speed must stay below the signal speed");
  }

  std::set<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i < s.channels.size(); ++i) {
    const ChannelSpec& c = s.channels[i];
    const std::string p = "channels[" + std::to_string(i) + "]";
    const NodeSpec* dst = s.node(c.dst);
    if (!ids.contains(c.src)) bad(p + ".src '" + c.src + "' is not a declared node");
    if (!ids.contains(c.dst)) bad(p + ".dst '" + c.dst + "' is not a declared node");
    if (c.src == c.dst) bad(p + " is a self-loop at '" + c.src + "'");
    if (!pairs.insert({c.src, c.dst}).second) bad(p + " duplicates channel " + detail::channel_name(c.src, c.dst));
    std::set<AimKind> kinds;
    for (std::size_t k = 0; k < c.aims.size(); ++k) {
      const AimingPoint& a = c.aims[k];
      const std::string ap = p + ".aim[" + std::to_string(k) + "]";
      if (!kinds.insert(a.kind).second) bad(ap + " repeats aiming kind " + std::string(to_string(a.kind)));
      if (!(a.weight >= 0.0)) bad(ap + ".weight must be >= 0");
      if (!(a.tolerance >= 0.0)) bad(ap + ".tolerance must be >= 0");
      if (a.kind == AimKind::phase) {
        if (!(a.value > -0.5 && a.value <= 0.5)) bad(ap + ".value (phi_0) must lie in (-1/2, 1/2]");
        else if (dst && dst->eta > 0.0 && dst->eta < 1.0 && !(std::fabs(a.value) < (1.0 - dst->eta) / 2.0)) {
          bad(ap + ".value (phi_0) lies outside the writing window of '" + c.dst + "'");
        }
      } else {
        if (!c.timing) bad(ap + " needs a timing channel");
        const ChannelSpec* rev = s.channel(c.dst, c.src);
        if (rev == nullptr) bad(ap + " needs the reverse channel " + detail::channel_name(c.dst, c.src));
        else if (!rev->timing) bad(ap + " needs the reverse channel to be a timing channel");
      }
    }
  }

  for (std::size_t i = 0; i < s.oracles.size(); ++i) {
    const OracleSpec& o = s.oracles[i];
    const std::string p = "oracles[" + std::to_string(i) + "]";
    if (!ids.contains(o.node)) bad(p + ".node '" + o.node + "' is not a declared node");
    if (!(o.at >= 0.0 && o.at <= s.end_time())) bad(p + ".at must lie within the horizon");
  }

  if (s.sagnac) {
    const SagnacSpec& g = *s.sagnac;
    if (g.loop.size() < 3) bad("sagnac.loop needs at least three nodes");
    for (std::size_t i = 0; i < g.loop.size(); ++i) {
      const NodeId& a = g.loop[i];
      const NodeId& b = g.loop[(i + 1) % g.loop.size()];
      if (!ids.contains(a)) bad("sagnac.loop[" + std::to_string(i) + "] '" + a + "' is not a declared node");
      for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        const ChannelSpec* ch = s.channel(x, y);
        if (ch == nullptr || ch->aim(AimKind::einstein) == nullptr) {
          bad("sagnac.loop needs an einstein exchange on " + detail::channel_name(x, y));
        }
      }
    }
    if (!(g.radius >= 0.0)) bad("sagnac.radius must be >= 0");
    if (!(g.warmup_cycles >= 0.0)) bad("sagnac.warmup_cycles must be >= 0");
  }
  return errors;
}

/// Parses scenario text; throws ScenarioError listing every problem.
[[nodiscard]] inline Scenario parse_scenario_text(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_and_column(text, e.byte);
    throw ScenarioError({"syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                         e.what()});
  }

  std::vector<std::string> errors;
  Scenario s;
  detail::FieldReader r(root, "scenario", errors);
  if (!r.ok()) throw ScenarioError(errors);
  if (!r.has("schema_version")) errors.push_back("schema_version is required");
  r.integer("schema_version", s.schema_version);
  if (!r.has("horizon")) errors.push_back("horizon is required");
  r.number("horizon", s.horizon);
  r.number("nominal_rate", s.nominal_rate);
  r.integer("seed", s.seed);
  r.integer("status_window", s.status_window);
  r.number("echo_timeout", s.echo_timeout);
  r.boolean("arrival_before_tick", s.arrival_before_tick);
  r.number("lock_hold_fraction", s.lock_hold_fraction);
  if (r.has("propagation")) {
    detail::FieldReader p(r.raw("propagation"), "propagation", errors);
    p.number("c", s.propagation.c);
    p.number("conformal_factor", s.propagation.conformal_factor);
    p.boolean("relativistic", s.propagation.relativistic_rates);
    p.string("metric", s.metric);
    p.reject_unknown();
  }
  auto read_array = [&](const std::string& key, auto&& each) {
    if (!r.has(key)) return;
    const json& arr = r.raw(key);
    if (!arr.is_array()) {
      errors.push_back(key + ": expected an array");
      return;
    }
    for (std::size_t i = 0; i < arr.size(); ++i) each(arr[i], key + "[" + std::to_string(i) + "]");
  };
  read_array("nodes", [&](const json& j, const std::string& p) { s.nodes.push_back(detail::read_node(j, p, errors)); });
  read_array("channels", [&](const json& j, const std::string& p) {
    s.channels.push_back(detail::read_channel(j, p, errors));
  });
  read_array("oracles", [&](const json& j, const std::string& p) {
    detail::FieldReader o(j, p, errors);
    OracleSpec spec;
    o.string("node", spec.node);
    o.number("at", spec.at);
    o.string("numeral", spec.numeral);
    o.reject_unknown();
    s.oracles.push_back(spec);
  });
  if (r.has("sagnac")) {
    detail::FieldReader g(r.raw("sagnac"), "sagnac", errors);
    SagnacSpec spec;
    if (g.has("loop")) {
      const json& loop = g.raw("loop");
      if (loop.is_array()) {
        for (const auto& id : loop) {
          if (id.is_string()) spec.loop.push_back(id.get<std::string>());
          else errors.push_back("sagnac.loop: expected node id strings");
        }
      } else {
        errors.push_back("sagnac.loop: expected an array");
      }
    }
    g.number("angular_rate", spec.angular_rate);
    g.number("radius", spec.radius);
    g.number("warmup_cycles", spec.warmup_cycles);
    g.reject_unknown();
    s.sagnac = spec;
  }
  r.reject_unknown();

  auto semantic = validate(s);
  errors.insert(errors.end(), semantic.begin(), semantic.end());
  if (!errors.empty()) throw ScenarioError(std::move(errors));
  return s;
}

[[nodiscard]] inline Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot read scenario file '" + path + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

// Serialization ---------------------------------------------------------------

namespace detail {

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const Worldline& w) {
  struct Visitor {
    json operator()(const StaticWorldline& s) const { return {{"kind", "static"}, {"position", to_json(s.position)}}; }
    json operator()(const UniformVelocityWorldline& u) const {
      return {{"kind", "uniform_velocity"}, {"position", to_json(u.initial_position)}, {"velocity", to_json(u.velocity)}};
    }
    json operator()(const CircularWorldline& c) const {
      return {{"kind", "circular"}, {"center", to_json(c.center)}, {"radius", c.radius},
              {"angular_rate", c.angular_rate}, {"initial_angle", c.initial_angle}};
    }
  };
  return std::visit(Visitor{}, w);
}

}  // namespace detail

/// Full scenario with defaults filled in; parse_scenario_text(to_json(s).dump()) == s.
[[nodiscard]] inline nlohmann::json to_json(const Scenario& s) {
  using detail::json;
  json root;
  root["schema_version"] = s.schema_version;
  root["horizon"] = s.horizon;
  root["nominal_rate"] = s.nominal_rate;
  root["seed"] = s.seed;
  root["status_window"] = s.status_window;
  if (s.echo_timeout) root["echo_timeout"] = *s.echo_timeout;
  root["arrival_before_tick"] = s.arrival_before_tick;
  root["lock_hold_fraction"] = s.lock_hold_fraction;
  json prop = {{"c", s.propagation.c}, {"relativistic", s.propagation.relativistic_rates}, {"metric", s.metric}};
  if (s.propagation.conformal_factor) prop["conformal_factor"] = *s.propagation.conformal_factor;
  root["propagation"] = prop;

  json nodes = json::array();
  for (const auto& n : s.nodes) {
    json j = {{"id", n.id},
              {"worldline", detail::to_json(n.worldline)},
              {"eta", n.eta},
              {"initial_reading", n.initial_reading},
              {"correction_bound", n.correction_bound},
              {"memory", n.memory},
              {"drift", {{"white_fm_sigma", n.white_fm_sigma}, {"rw_fm_sigma", n.rw_fm_sigma}}},
              {"control",
               {{"enabled", n.control.enabled},
                {"kp", n.control.kp},
                {"ki", n.control.ki},
                {"command_bound", n.control.command_bound},
                {"integral_bound", n.control.integral_bound}}},
              {"transmit", {{"enabled", n.transmit.enabled}, {"every", n.transmit.every}, {"offset", n.transmit.offset}}}};
    if (n.rate) j["rate"] = *n.rate;
    if (n.seed) j["seed"] = *n.seed;
    nodes.push_back(j);
  }
  root["nodes"] = nodes;

  json channels = json::array();
  for (const auto& c : s.channels) {
    json aims = json::array();
    for (const auto& a : c.aims) {
      aims.push_back({{"kind", std::string(to_string(a.kind))}, {"value", a.value}, {"weight", a.weight},
                      {"tolerance", a.tolerance}});
    }
    channels.push_back({{"src", c.src}, {"dst", c.dst}, {"timing", c.timing}, {"aim", aims}});
  }
  root["channels"] = channels;

  json oracles = json::array();
  for (const auto& o : s.oracles) oracles.push_back({{"node", o.node}, {"at", o.at}, {"numeral", o.numeral}});
  root["oracles"] = oracles;

  if (s.sagnac) {
    root["sagnac"] = {{"loop", s.sagnac->loop},
                      {"angular_rate", s.sagnac->angular_rate},
                      {"radius", s.sagnac->radius},
                      {"warmup_cycles", s.sagnac->warmup_cycles}};
  }
  return root;
}

[[nodiscard]] inline std::string serialize_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

}  // namespace liveclock
