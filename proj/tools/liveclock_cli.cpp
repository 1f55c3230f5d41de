// liveclock: run, validate and analyse live-clock scenarios.
//
//   liveclock run --scenario FILE [--seed N] [--horizon N] [--out DIR] [--format csv|json]
//   liveclock check --scenario FILE
//   liveclock stripes GEOMETRY
//   liveclock brick --limit N
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "liveclock.hpp"

namespace fs = std::filesystem;
using namespace liveclock;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

int report_invalid(const ScenarioError& e) {
  for (const auto& msg : e.errors()) std::cerr << "error: " << msg << '\n';
  return kInvalid;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon;
  std::string out = "out";
  std::string format = "csv";
};

int cmd_run(const RunArgs& args) {
  Scenario s;
  try {
    s = parse_scenario(args.scenario);
    if (args.seed) s.seed = *args.seed;
    if (args.horizon) s.horizon = *args.horizon;
    if (auto errors = validate(s); !errors.empty()) throw ScenarioError(std::move(errors));
  } catch (const ScenarioError& e) {
    return report_invalid(e);
  }

  fs::create_directories(args.out);
  const bool json = args.format == "json";
  const fs::path trace_path = fs::path(args.out) / (json ? "trace.json" : "trace.csv");
  const fs::path report_path = fs::path(args.out) / (json ? "report.json" : "report.csv");

  std::ofstream trace_file(trace_path, std::ios::binary);
  if (!trace_file) {
    std::cerr << "error: cannot write " << trace_path.string() << '\n';
    return kRuntime;
  }
  CsvTraceWriter csv(trace_file);
  JsonTraceWriter js(trace_file);
  Trace memory;
  TeeSink tee({json ? static_cast<TraceSink*>(&js) : static_cast<TraceSink*>(&csv), &memory});

  try {
    Engine engine(s);
    engine.run(tee);
    std::cerr << "liveclock: " << engine.events_processed() << " events, " << memory.rows().size()
              << " trace rows, horizon " << format_numeral(s.horizon) << " cycles\n";
    const SyncReport report = sync_report(memory, report_options(s));
    std::ofstream report_file(report_path, std::ios::binary);
    if (json) report_file << to_json(report).dump(2) << '\n';
    else write_report_csv(report_file, report);
  } catch (const ScenarioError& e) {
    return report_invalid(e);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kRuntime;
  }
  std::cerr << "liveclock: wrote " << trace_path.string() << " and " << report_path.string() << '\n';
  return kOk;
}

int cmd_check(const std::string& path) {
  try {
    const Scenario s = parse_scenario(path);
    std::cout << "ok: " << s.nodes.size() << " nodes, " << s.channels.size() << " channels, horizon "
              << format_numeral(s.horizon) << " cycles\n";
    return kOk;
  } catch (const ScenarioError& e) {
    return report_invalid(e);
  }
}

int cmd_stripes(const std::string& path) {
  FeasibilityInput input;
  try {
    input = parse_geometry_text(read_file(path));
    const FeasibilityResult r = stripes_feasible(input);
    if (r.feasible) {
      std::cout << "feasible: tick period " << r.period_multiplier;
      if (r.squarefree_class != 1) std::cout << " * sqrt(" << r.squarefree_class << ")";
      std::cout << '\n';
    } else {
      const auto [i, j] = *r.witness;
      auto describe = [&](std::size_t e) {
        const auto& [a, b] = input.edges[e];
        return "edge " + std::to_string(e) + " (" + std::to_string(a) + "-" + std::to_string(b) +
               ", length^2 = " + std::to_string(squared_length(input.vertices[a], input.vertices[b])) + ")";
      };
      std::cout << "infeasible: " << describe(i) << " and " << describe(j) << " have an irrational length ratio\n";
    }
    return kOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_brick(std::int64_t limit) {
  if (const auto brick = find_euler_brick(limit)) {
    std::cout << (*brick)[0] << ' ' << (*brick)[1] << ' ' << (*brick)[2] << '\n';
  } else {
    std::cout << "none\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for networks of live clocks"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "simulate a scenario, write trace and report");
  run->add_option("--scenario", run_args.scenario, "scenario file")->required();
  run->add_option("--seed", run_args.seed, "master seed (overrides the file)");
  run->add_option("--horizon", run_args.horizon, "horizon in nominal cycles (overrides the file)");
  run->add_option("--out", run_args.out, "output directory")->capture_default_str();
  run->add_option("--format", run_args.format, "trace and report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  std::string check_path;
  auto* check = app.add_subcommand("check", "validate a scenario file");
  check->add_option("--scenario", check_path, "scenario file")->required();

  std::string geometry;
  auto* stripes = app.add_subcommand("stripes", "zero-phase feasibility of a lattice geometry");
  stripes->add_option("geometry", geometry, "geometry file")->required();

  std::int64_t limit = 300;
  auto* brick = app.add_subcommand("brick", "smallest Euler brick with edges up to --limit");
  brick->add_option("--limit", limit, "largest edge")->capture_default_str()->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*check) return cmd_check(check_path);
    if (*stripes) return cmd_stripes(geometry);
    if (*brick) return cmd_brick(limit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kInvalid;
}
