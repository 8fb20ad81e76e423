#include "hwdbg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <set>
#include <tuple>

#include "hwdbg/runtime.hpp"

namespace hwdbg {

const std::string& bench_design() {
  static const std::string text = R"(// Overhead workload: four accumulators and a reduction.
module top {
  clock clk;
  input data[4] : 16;
  input mode : 2;
  reg acc[4] : 16 @clk;
  output sum : 16;
  output odd : 4;

  seq @clk {
    for i in 0..4 {
      if data[i] % 2 { acc[i] = acc[i] + data[i]; } else { acc[i] = acc[i] - mode; }
    }
  }

  comb {
    sum = 0;
    odd = 0;
    for i in 0..4 {
      if acc[i] % 3 { sum = sum + acc[i]; }
      if data[i] % 2 { odd = odd + 1; }
    }
  }
}
)";
  return text;
}

Workload synthetic_workload(uint64_t edges, uint64_t seed) {
  Workload w{compile(bench_design(), "bench.mh", OptLevel::kDebug), {}};
  std::mt19937_64 rng(seed);
  std::vector<InputMap> stimulus;
  stimulus.reserve(edges);
  for (uint64_t c = 0; c < edges; ++c) {
    InputMap in;
    for (int i = 0; i < 4; ++i) {
      in["data[" + std::to_string(i) + "]"] = Value::make(rng() & 0xffff, 16);
    }
    in["mode"] = Value::make(rng() & 3, 2);
    stimulus.push_back(std::move(in));
  }
  CycleSim sim(w.compiled.lowered.netlist, std::move(stimulus));
  sim.enable_trace();
  sim.run();
  w.trace = sim.trace();
  return w;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

double BenchReport::attached_ratio() const { return median(attached) / median(bare); }
double BenchReport::conditional_ratio() const { return median(conditional) / median(bare); }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs the replay to its end under serve(), with the given locations
// inserted before the first resume.
double attached_run(VcdReplay& sim, const SymbolTable& table,
                    const std::vector<const BreakpointRow*>& locations, uint64_t& stops,
                    size_t* inserted) {
  sim.rewind();
  DebuggerCore core(sim, table, DebuggerCore::locate(sim, table));
  for (const BreakpointRow* row : locations) {
    auto ids = core.insert_breakpoint(row->file, row->line, row->column, "0");
    if (inserted) *inserted += ids.size();
  }
  core.set_listener([&](const CoreEvent& e) {
    if (e.kind == CoreEvent::Kind::kStopped) {
      ++stops;
      core.post([](DebuggerCore& c) { c.resume(ResumeCommand::kContinue); });
    } else if (e.kind == CoreEvent::Kind::kEnded) {
      core.post([](DebuggerCore& c) { c.detach(); });
    }
  });
  core.post([](DebuggerCore& c) { c.resume(ResumeCommand::kContinue); });
  const auto start = Clock::now();
  core.serve();
  return seconds_since(start);
}

}  // namespace

BenchReport bench_replay(std::shared_ptr<const TraceStore> trace, const SymbolTable& table,
                         const BenchOptions& options) {
  BenchReport r;
  VcdReplay bare(trace);
  r.edges = bare.edges().size();
  if (r.edges < kMinBenchEdges) {
    throw Error("the workload has " + std::to_string(r.edges) + " rising edges; at least " +
                std::to_string(kMinBenchEdges) + " are needed for a meaningful measurement");
  }
  if (options.runs < 1) throw Error("at least one run is needed");

  std::vector<const BreakpointRow*> locations;
  std::set<std::tuple<std::string, uint32_t, uint32_t>> seen;
  for (const auto& row : table.breakpoints) {
    if (locations.size() >= options.conditional) break;
    if (seen.emplace(row.file, row.line, row.column).second) locations.push_back(&row);
  }

  VcdReplay attached(trace);
  VcdReplay conditional(trace);
  for (int run = 0; run < options.runs; ++run) {
    bare.rewind();
    const auto start = Clock::now();
    bare.run();
    r.bare.push_back(seconds_since(start));
    r.attached.push_back(attached_run(attached, table, {}, r.stops, nullptr));
    size_t inserted = 0;
    r.conditional.push_back(attached_run(conditional, table, locations, r.stops, &inserted));
    r.conditional_breakpoints = inserted;
  }
  return r;
}

std::string format_report(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "edges %llu, %zu runs (median)\n"
                "  (a) bare replay             %9.3f ms\n"
                "  (b) attached, 0 breakpoints %9.3f ms  ratio %.3f\n"
                "  (c) attached, %zu never-firing conditional breakpoints %9.3f ms  ratio %.3f\n"
                "  stop events %llu\n",
                static_cast<unsigned long long>(r.edges), r.bare.size(), median(r.bare) * 1e3,
                median(r.attached) * 1e3, r.attached_ratio(), r.conditional_breakpoints,
                median(r.conditional) * 1e3, r.conditional_ratio(),
                static_cast<unsigned long long>(r.stops));
  return buf;
}

}  // namespace hwdbg
