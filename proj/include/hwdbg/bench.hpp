#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hwdbg/lowering.hpp"
#include "hwdbg/sim.hpp"

namespace hwdbg {

inline constexpr uint64_t kMinBenchEdges = 10000;

// Source of the built-in workload design, stored under `bench.mh`.
const std::string& bench_design();

struct Workload {
  Compiled compiled;
  TraceStore trace;
};

// Compiles bench_design() and records `edges` cycles of random stimulus.
Workload synthetic_workload(uint64_t edges, uint64_t seed = 1);

struct BenchOptions {
  int runs = 5;
  // Breakpoint locations inserted with a condition that never holds.
  size_t conditional = 8;
};

struct BenchReport {
  uint64_t edges = 0;
  size_t conditional_breakpoints = 0;  // rows inserted for (c)
  std::vector<double> bare;            // seconds per run
  std::vector<double> attached;
  std::vector<double> conditional;
  uint64_t stops = 0;  // stop events seen across (b) and (c)

  double attached_ratio() const;
  double conditional_ratio() const;
};

double median(std::vector<double> v);

// Times (a) bare replay, (b) replay under a debugger core with no
// breakpoints and (c) with never-firing conditional breakpoints. Runs are
// interleaved. Throws Error when the trace has fewer than kMinBenchEdges
// rising edges.
BenchReport bench_replay(std::shared_ptr<const TraceStore> trace, const SymbolTable& table,
                         const BenchOptions& options = {});

std::string format_report(const BenchReport& r);

}  // namespace hwdbg
