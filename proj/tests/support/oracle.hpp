#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hwdbg/lowering.hpp"
#include "hwdbg/runtime.hpp"

namespace hwdbg::testing {

struct LocalValue {
  std::string name;
  uint32_t width = 0;
  bool known = true;
  uint64_t bits = 0;

  auto operator<=>(const LocalValue&) const = default;
};

// One thread of one stop, or one interpreter log entry.
struct StopRecord {
  uint64_t time = 0;
  SourceKey key;
  std::string thread;
  std::vector<LocalValue> locals;  // sorted by name

  auto operator<=>(const StopRecord&) const = default;
};

// The interpreter's statement log as stops at cycle-sim times, limited to
// statements that still have a breakpoint row in `table`.
std::vector<StopRecord> oracle_stops(const ExecutionTrace& trace, const SymbolTable& table);

// Inserts a breakpoint on every line with one, runs `sim` to the end with
// `continue`, and returns every firing thread of every stop.
std::vector<StopRecord> debugger_stops(SimHandle& sim, const SymbolTable& table);

std::vector<StopRecord> flatten(const StopEvent& stop);

// Human-readable differences between two sorted record lists; empty when equal.
std::vector<std::string> diff_stops(const std::vector<StopRecord>& expected,
                                    const std::vector<StopRecord>& actual, size_t limit = 5);

}  // namespace hwdbg::testing
